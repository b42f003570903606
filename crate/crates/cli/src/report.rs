use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use voshm_core::lifecycle::{CostEstimate, EpisodeRecord, EpisodeTraceRow, SurfacePoint};

use crate::config::RunConfig;
use crate::error::CliError;

pub const SURFACE_HEADER: &str = "p_th_I,p_th_R,dt_I,n,mean,std_error,C_I,C_R,C_clsdn,R_F";
pub const TRAJECTORY_HEADER: &str = "scenario,branch,time,variable,value";

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

/// Creates the output directory and echoes the resolved configuration into it.
pub fn prepare_output(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    write_text(&dir.join("resolved_config.toml"), &cfg.to_toml())
}

pub fn episodes_csv(records: &[EpisodeRecord]) -> String {
    let mut s = String::from(EpisodeRecord::CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    s
}

pub fn trace_csv(rows: &[EpisodeTraceRow]) -> String {
    let mut s = String::from(EpisodeTraceRow::CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    s
}

/// Long-format rows of the state and reliability trajectories.
pub fn append_trajectories(out: &mut String, scenario: u64, branch: &str, rows: &[EpisodeTraceRow]) {
    for r in rows {
        let t = r.filter.time;
        for (name, v) in [
            ("x_true", r.x_true),
            ("mean_x", r.filter.mean_x),
            ("sd_x", r.filter.sd_x),
            ("hazard", r.hazard),
            ("pr_filtered", r.pr_filtered),
            ("pr_true", r.pr_true),
        ] {
            let _ = writeln!(out, "{scenario},{branch},{t},{name},{v}");
        }
    }
}

pub fn surface_csv(surface: &[SurfacePoint]) -> String {
    let mut s = String::from(SURFACE_HEADER);
    s.push('\n');
    for p in surface {
        let c = &p.cost;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            p.policy.p_th_i,
            p.policy.p_th_r,
            p.policy.dt_i,
            c.n,
            c.total.mean,
            c.total.std_error,
            c.inspection.mean,
            c.repair.mean,
            c.closedown.mean,
            c.risk.mean
        );
    }
    s
}

/// Mean and standard error, `null` when undefined.
#[derive(Debug, Serialize)]
pub struct Stat {
    pub mean: Option<f64>,
    pub std_error: Option<f64>,
}

impl Stat {
    pub fn new(mean: f64, std_error: f64) -> Self {
        let finite = |v: f64| v.is_finite().then_some(v);
        Self { mean: finite(mean), std_error: finite(std_error) }
    }
}

#[derive(Debug, Serialize)]
pub struct CostSummary {
    pub n: usize,
    pub excluded: usize,
    pub total: Stat,
    pub inspection: Stat,
    pub repair: Stat,
    pub closedown: Stat,
    pub risk: Stat,
}

impl From<&CostEstimate> for CostSummary {
    fn from(c: &CostEstimate) -> Self {
        let s = |m: voshm_core::lifecycle::MeanSe| Stat::new(m.mean, m.std_error);
        Self {
            n: c.n,
            excluded: c.excluded,
            total: s(c.total),
            inspection: s(c.inspection),
            repair: s(c.repair),
            closedown: s(c.closedown),
            risk: s(c.risk),
        }
    }
}
