//! Dense grid Bayes filter for a scalar linear-drift state with lognormal noise,
//! compound-Poisson jumps and Gaussian observations. Used as a reference for the
//! particle filter.

use voshm_core::deterioration::{AugmentedState, DeteriorationParams, transition_step};
use voshm_core::filter::{FilterSettings, ParticleEnsemble, ShockKnowledge};
use voshm_core::observation::inspection_log_likelihood;
use voshm_core::rng::raw_stream_rng;
use voshm_core::stats::standard_normal;

pub const RATE: f64 = 0.5;
pub const OMEGA_SD: f64 = 0.3;
pub const SHOCK_RATE: f64 = 0.1;
pub const D_MEAN: f64 = 1.0;
pub const D_CV: f64 = 0.25;
pub const OBS_SD: f64 = 1.0;
pub const PARTICLES: usize = 20_000;
pub const GRID_POINTS: usize = 2000;
pub const GRID_MAX: f64 = 50.0;
pub const STEPS: usize = 50;

pub fn model_params() -> DeteriorationParams {
    DeteriorationParams {
        a_mean: RATE,
        a_cv: 0.0,
        b_mean: 1.0,
        b_cv: 0.0,
        omega_mean: 0.0,
        omega_sd: OMEGA_SD,
        shock_rate: SHOCK_RATE,
        d_mean: D_MEAN,
        d_cv: D_CV,
        horizon_years: STEPS as f64,
    }
}

fn phi(z: f64) -> f64 {
    0.5 * libm_erfc(-z / std::f64::consts::SQRT_2)
}

fn libm_erfc(x: f64) -> f64 {
    1.0 - voshm_core::stats::erf(x)
}

/// Probability mass of a lognormal on cells `[(m − ½)h, (m + ½)h)`, lag 0 starting at zero.
fn lognormal_cells(mu: f64, s: f64, h: f64, n: usize) -> Vec<f64> {
    let cdf = |v: f64| if v <= 0.0 { 0.0 } else { phi((v.ln() - mu) / s) };
    (0..n).map(|m| cdf((m as f64 + 0.5) * h) - cdf((m as f64 - 0.5).max(0.0) * h)).collect()
}

fn convolve(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(n - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

pub struct GridFilter {
    pub h: f64,
    pub p: Vec<f64>,
    kernel: Vec<f64>,
}

impl GridFilter {
    pub fn new() -> Self {
        let h = GRID_MAX / (GRID_POINTS - 1) as f64;
        let n = GRID_POINTS;
        let gradual = lognormal_cells(RATE.ln(), OMEGA_SD, h, n);
        let sd_ln = (1.0 + D_CV * D_CV).ln().sqrt();
        let jump = lognormal_cells(D_MEAN.ln() - 0.5 * sd_ln * sd_ln, sd_ln, h, n);
        let mut kernel = vec![0.0; n];
        let mut term = gradual.clone();
        let mut poisson = (-SHOCK_RATE).exp();
        for k in 0..6 {
            if k > 0 {
                term = convolve(&term, &jump, n);
                poisson *= SHOCK_RATE / k as f64;
            }
            for (kv, t) in kernel.iter_mut().zip(&term) {
                *kv += poisson * t;
            }
        }
        let total: f64 = kernel.iter().sum();
        let mut acc = 0.0;
        let len = kernel.iter().position(|v| {
            acc += v;
            acc >= total * (1.0 - 1e-15)
        });
        kernel.truncate(len.map_or(n, |l| l + 1));
        let mut p = vec![0.0; n];
        p[0] = 1.0;
        Self { h, p, kernel }
    }

    pub fn predict(&mut self) {
        self.p = convolve(&self.p, &self.kernel, self.p.len());
    }

    pub fn update(&mut self, z: f64) {
        for (i, v) in self.p.iter_mut().enumerate() {
            let x = i as f64 * self.h;
            *v *= (-0.5 * ((z - x) / OBS_SD).powi(2)).exp();
        }
        let s: f64 = self.p.iter().sum();
        self.p.iter_mut().for_each(|v| *v /= s);
    }

    pub fn mean_sd(&self) -> (f64, f64) {
        let m: f64 = self.p.iter().enumerate().map(|(i, v)| v * i as f64 * self.h).sum();
        let var: f64 = self.p.iter().enumerate().map(|(i, v)| v * (i as f64 * self.h - m).powi(2)).sum();
        (m, var.sqrt())
    }
}

/// Largest relative errors of the particle filter mean and sd against the grid filter.
pub fn compare(seed: u64, n_particles: usize) -> (f64, f64) {
    let params = model_params();
    let mut truth_rng = raw_stream_rng(seed, 0, 100);
    let mut pf_rng = raw_stream_rng(seed, 0, 101);
    let mut truth = AugmentedState { x: 0.0, a: RATE, b: 1.0, time_since_repair: 0.0 };
    let mut pf = ParticleEnsemble::init(&params, n_particles, &mut pf_rng).unwrap();
    let settings = FilterSettings { n_particles, ..Default::default() };
    let mut grid = GridFilter::new();
    let (mut worst_mean, mut worst_sd) = (0.0f64, 0.0f64);
    for k in 1..=STEPS {
        let t = k as f64;
        truth = transition_step(&truth, t - 1.0, t, &params, &mut truth_rng);
        let z = truth.x + OBS_SD * standard_normal(&mut truth_rng);
        pf.predict(t, &params, ShockKnowledge::Unobserved, &mut pf_rng).unwrap();
        pf.update(|_, x| inspection_log_likelihood(z, x, 0.0, OBS_SD)).unwrap();
        grid.predict();
        grid.update(z);
        let (gm, gs) = grid.mean_sd();
        let (pm, ps) = pf.moments()[0];
        worst_mean = worst_mean.max((pm - gm).abs() / gm);
        worst_sd = worst_sd.max((ps - gs).abs() / gs);
        if pf.needs_resampling(&settings) {
            pf.gm_resample(&settings, &mut pf_rng);
        }
    }
    (worst_mean, worst_sd)
}
