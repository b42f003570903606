#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn voshm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_voshm")).args(args).output().expect("voshm binary runs")
}

pub fn path_arg(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

pub fn assert_ok(out: &Output) {
    assert!(out.status.success(), "exit {:?}\nstderr: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
}

/// Fits the surrogate and learns the environmental model into a fresh artifacts directory.
pub fn build_artifacts(root: &Path, config: Option<&Path>) -> PathBuf {
    let artifacts = root.join("artifacts");
    let scratch = root.join("setup_out");
    for cmd in ["fit-surrogate", "learn-env"] {
        let mut args = vec![cmd, "--artifacts", path_arg(&artifacts), "--out", path_arg(&scratch)];
        if let Some(c) = config {
            args.extend(["--config", path_arg(c)]);
        }
        assert_ok(&voshm(&args));
    }
    artifacts
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&read(path)).expect("valid json")
}

/// Column `name` of a CSV document as floats.
pub fn csv_column(text: &str, name: &str) -> Vec<f64> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().expect("header").split(',').collect();
    let j = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(j).unwrap().parse().unwrap()).collect()
}
