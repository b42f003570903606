//! Particle filter over `(x, A, B)` with ESS-triggered Gaussian-mixture resampling.

pub mod gm;

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::deterioration::{gradual_increment, sample_shock_increment, DeteriorationParams};
use crate::error::{Error, Result};
use crate::reliability::HazardConvention;
use crate::stats::{standard_normal, weighted_mean_sd};

pub use gm::{fit_weighted_gm, EmSettings, GaussianMixture, GmComponent};

pub const MIN_PARTICLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSettings {
    pub n_particles: usize,
    /// Resample when `ESS < ess_threshold · n_particles`.
    pub ess_threshold: f64,
    pub max_components: usize,
    pub em_max_iterations: usize,
    pub em_tolerance: f64,
    pub em_regularization: f64,
    /// Jitter scale of the multinomial fallback, relative to the weighted sd.
    pub fallback_jitter: f64,
}

impl Default for FilterSettings {
    fn default() -> Self {
        Self {
            n_particles: 1000,
            ess_threshold: 0.5,
            max_components: 3,
            em_max_iterations: 50,
            em_tolerance: 1e-6,
            em_regularization: 1e-10,
            fallback_jitter: 0.05,
        }
    }
}

impl FilterSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < MIN_PARTICLES {
            return Err(Error::Config(format!("filter.n_particles must be >= {MIN_PARTICLES}")));
        }
        if !(self.ess_threshold > 0.0 && self.ess_threshold <= 1.0) {
            return Err(Error::Config("filter.ess_threshold must be in (0, 1]".into()));
        }
        if !(1..=3).contains(&self.max_components) || self.em_max_iterations == 0 {
            return Err(Error::Config("filter: max_components in 1..=3 and em_max_iterations >= 1".into()));
        }
        if !(self.em_tolerance > 0.0) || !(self.em_regularization >= 0.0) || !(self.fallback_jitter >= 0.0) {
            return Err(Error::Config("filter: EM tolerance must be positive, regularization and jitter >= 0".into()));
        }
        Ok(())
    }

    pub fn em(&self) -> EmSettings {
        EmSettings {
            max_components: self.max_components,
            max_iterations: self.em_max_iterations,
            tolerance: self.em_tolerance,
            regularization: self.em_regularization,
        }
    }
}

/// What the filter knows about shocks inside a prediction interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShockKnowledge {
    /// Shock occurrences are latent and follow the Poisson prior.
    Unobserved,
    /// Exactly this many shocks occurred, with unknown magnitudes.
    Observed(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityStep {
    /// Accumulated failure probability up to the previous epoch.
    pub pr_prev: f64,
    /// One-step-ahead accumulated failure probability.
    pub pr_pred: f64,
    pub hazard: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResampleReport {
    pub components: usize,
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub time: f64,
    pub mean_x: f64,
    pub sd_x: f64,
    pub mean_a: f64,
    pub sd_a: f64,
    pub mean_b: f64,
    pub sd_b: f64,
    pub ess: f64,
    pub resampled: bool,
}

impl TraceRow {
    pub const CSV_HEADER: &'static str = "time,mean_x,sd_x,mean_a,sd_a,mean_b,sd_b,ess,resampled";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.time, self.mean_x, self.sd_x, self.mean_a, self.sd_a, self.mean_b, self.sd_b, self.ess, self.resampled as u8
        )
    }
}

/// Weighted particle set. Local time since the last repair is shared by all particles.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub x: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub weights: Vec<f64>,
    /// Per-particle `ln(1 − Pr(F))` accumulated since the last repair.
    pub log_survival: Vec<f64>,
    /// Interval failure probabilities from the latest reliability step.
    pub last_interval: Vec<f64>,
    pub time: f64,
    pub time_since_repair: f64,
    ess: f64,
}

impl ParticleEnsemble {
    /// Draws `n_p` particles from the parameter priors with `x = 0`.
    pub fn init<R: Rng + ?Sized>(params: &DeteriorationParams, n_p: usize, rng: &mut R) -> Result<Self> {
        if n_p < MIN_PARTICLES {
            return Err(Error::Config(format!("at least {MIN_PARTICLES} particles are required")));
        }
        let mut a = Vec::with_capacity(n_p);
        let mut b = Vec::with_capacity(n_p);
        for _ in 0..n_p {
            a.push(params.sample_a(rng));
            b.push(params.sample_b(rng));
        }
        Self::from_particles(vec![0.0; n_p], a, b)
    }

    /// Ensemble with the given particles, uniform weights, at time zero.
    pub fn from_particles(x: Vec<f64>, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < MIN_PARTICLES || a.len() != n || b.len() != n {
            return Err(Error::Config(format!("need >= {MIN_PARTICLES} particles with matching components")));
        }
        Ok(Self {
            x,
            a,
            b,
            weights: vec![1.0 / n as f64; n],
            log_survival: vec![0.0; n],
            last_interval: vec![0.0; n],
            time: 0.0,
            time_since_repair: 0.0,
            ess: n as f64,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn ess(&self) -> f64 {
        self.ess
    }

    /// Advances every particle to `t_to`; weights are unchanged.
    pub fn predict<R: Rng + ?Sized>(
        &mut self,
        t_to: f64,
        params: &DeteriorationParams,
        shocks: ShockKnowledge,
        rng: &mut R,
    ) -> Result<()> {
        let dt = t_to - self.time;
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("prediction needs t_to > {}", self.time)));
        }
        let tau0 = self.time_since_repair;
        for j in 0..self.len() {
            let omega = params.sample_omega(rng);
            let jump = match shocks {
                ShockKnowledge::Unobserved => sample_shock_increment(dt, params, rng),
                ShockKnowledge::Observed(n) => (0..n).map(|_| params.sample_magnitude(rng)).sum(),
            };
            self.x[j] += gradual_increment(self.a[j], self.b[j], tau0, tau0 + dt, omega) + jump;
        }
        self.time = t_to;
        self.time_since_repair = tau0 + dt;
        Ok(())
    }

    /// Accumulated failure probability `Σ w·(1 − S)` under the current weights.
    pub fn failure_probability(&self) -> f64 {
        -self.weights.iter().zip(&self.log_survival).map(|(w, l)| w * l.exp_m1()).sum::<f64>()
    }

    /// Folds the interval failure probability of each predicted particle into its
    /// accumulated value and returns the one-step-ahead reliability summary.
    pub fn advance_reliability(
        &mut self,
        interval_prob: impl Fn(f64) -> f64,
        convention: HazardConvention,
    ) -> ReliabilityStep {
        let mut pr_prev = 0.0;
        let mut increment = 0.0;
        for j in 0..self.len() {
            let p = interval_prob(self.x[j]).clamp(0.0, 1.0);
            let f = -self.log_survival[j].exp_m1();
            let s = 1.0 - f;
            pr_prev += self.weights[j] * f;
            increment += self.weights[j] * s * p;
            self.log_survival[j] += (-p).ln_1p();
            self.last_interval[j] = p;
        }
        let den = match convention {
            HazardConvention::Survival => 1.0 - pr_prev,
            HazardConvention::AsPrinted => pr_prev,
        };
        let hazard = if increment == 0.0 {
            0.0
        } else if den > 0.0 {
            increment / den
        } else {
            f64::INFINITY
        };
        ReliabilityStep { pr_prev, pr_pred: pr_prev + increment, hazard }
    }

    /// Hazard of the latest interval re-evaluated with the current weights.
    pub fn filtered_hazard(&self, convention: HazardConvention) -> f64 {
        let mut increment = 0.0;
        let mut survival = 0.0;
        for j in 0..self.len() {
            let p = self.last_interval[j];
            let s_prev = if p < 1.0 { self.log_survival[j].exp() / (1.0 - p) } else { 0.0 };
            increment += self.weights[j] * s_prev * p;
            survival += self.weights[j] * s_prev;
        }
        let den = match convention {
            HazardConvention::Survival => survival,
            HazardConvention::AsPrinted => 1.0 - survival,
        };
        if increment == 0.0 {
            0.0
        } else if den > 0.0 {
            increment / den
        } else {
            f64::INFINITY
        }
    }

    /// Multiplies weights by `exp(log_lik(j, x_j))` and renormalizes in log space.
    ///
    /// If every weight underflows the previous weights are kept and a degeneracy error returned.
    pub fn update(&mut self, log_lik: impl Fn(usize, f64) -> f64) -> Result<()> {
        let lw: Vec<f64> = (0..self.len())
            .map(|j| {
                let l = log_lik(j, self.x[j]);
                if self.weights[j] > 0.0 && !l.is_nan() { self.weights[j].ln() + l } else { f64::NEG_INFINITY }
            })
            .collect();
        let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Degeneracy { time: self.time });
        }
        let mut sum = 0.0;
        let mut w: Vec<f64> = lw.iter().map(|l| (l - max).exp()).collect();
        for v in &w {
            sum += v;
        }
        for v in &mut w {
            *v /= sum;
        }
        self.weights = w;
        self.refresh_ess();
        Ok(())
    }

    fn refresh_ess(&mut self) {
        let s2: f64 = self.weights.iter().map(|w| w * w).sum();
        self.ess = (1.0 / s2).clamp(1.0, self.len() as f64);
    }

    pub fn needs_resampling(&self, settings: &FilterSettings) -> bool {
        self.ess < settings.ess_threshold * self.len() as f64
    }

    /// Weighted mean and sd of `(x, a, b)`.
    pub fn moments(&self) -> [(f64, f64); 3] {
        let w = &self.weights;
        [&self.x, &self.a, &self.b].map(|v| weighted_mean_sd(w.iter().copied().zip(v.iter().copied())))
    }

    pub fn trace_row(&self, resampled: bool) -> TraceRow {
        let [(mean_x, sd_x), (mean_a, sd_a), (mean_b, sd_b)] = self.moments();
        TraceRow { time: self.time, mean_x, sd_x, mean_a, sd_a, mean_b, sd_b, ess: self.ess, resampled }
    }

    /// Fits a Gaussian mixture to the weighted particles and draws a fresh, equally weighted set.
    ///
    /// Particles inherit the ensemble's accumulated failure probability.
    pub fn gm_resample<R: Rng + ?Sized>(&mut self, settings: &FilterSettings, rng: &mut R) -> ResampleReport {
        let n = self.len();
        let pf = self.failure_probability().clamp(0.0, 1.0);
        let scales = self.moments().map(|(m, s)| (m, s.max(1e-9 * m.abs()).max(1e-300)));
        let points: Vec<Vector3<f64>> = (0..n)
            .map(|j| {
                Vector3::new(
                    (self.x[j] - scales[0].0) / scales[0].1,
                    (self.a[j] - scales[1].0) / scales[1].1,
                    (self.b[j] - scales[2].0) / scales[2].1,
                )
            })
            .collect();
        let report = match fit_weighted_gm(&points, &self.weights, &settings.em()) {
            Ok(mix) => {
                for j in 0..n {
                    let y = mix.sample(rng);
                    self.x[j] = scales[0].0 + scales[0].1 * y[0];
                    self.a[j] = scales[1].0 + scales[1].1 * y[1];
                    self.b[j] = scales[2].0 + scales[2].1 * y[2];
                }
                ResampleReport { components: mix.components.len(), fallback: false }
            }
            Err(_) => {
                self.multinomial_resample(settings.fallback_jitter, &scales, rng);
                ResampleReport { components: 0, fallback: true }
            }
        };
        for j in 0..n {
            self.x[j] = self.x[j].max(0.0);
            self.a[j] = self.a[j].max(f64::MIN_POSITIVE);
        }
        self.weights = vec![1.0 / n as f64; n];
        self.log_survival = vec![(-pf).ln_1p(); n];
        self.last_interval = vec![0.0; n];
        self.ess = n as f64;
        report
    }

    fn multinomial_resample<R: Rng + ?Sized>(&mut self, jitter: f64, scales: &[(f64, f64); 3], rng: &mut R) {
        let n = self.len();
        let mut cdf = Vec::with_capacity(n);
        let mut acc = 0.0;
        for w in &self.weights {
            acc += w;
            cdf.push(acc);
        }
        let (x0, a0, b0) = (self.x.clone(), self.a.clone(), self.b.clone());
        for j in 0..n {
            let u: f64 = rng.random::<f64>() * acc;
            let i = cdf.partition_point(|c| *c <= u).min(n - 1);
            self.x[j] = x0[i] + jitter * scales[0].1 * standard_normal(rng);
            self.a[j] = a0[i] + jitter * scales[1].1 * standard_normal(rng);
            self.b[j] = b0[i] + jitter * scales[2].1 * standard_normal(rng);
        }
    }

    /// Sets every particle to the undamaged state and restarts local time.
    pub fn repair(&mut self) {
        self.x.iter_mut().for_each(|v| *v = 0.0);
        self.log_survival.iter_mut().for_each(|v| *v = 0.0);
        self.last_interval.iter_mut().for_each(|v| *v = 0.0);
        self.time_since_repair = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::raw_stream_rng;

    fn ensemble(n: usize) -> ParticleEnsemble {
        let mut rng = raw_stream_rng(1, 0, 0);
        ParticleEnsemble::init(&DeteriorationParams::default(), n, &mut rng).unwrap()
    }

    #[test]
    fn init_draws_priors() {
        let e = ensemble(100_000);
        assert!(e.x.iter().all(|v| *v == 0.0));
        assert!(e.weights.iter().all(|w| *w == 1e-5));
        let mean_a = e.a.iter().sum::<f64>() / e.len() as f64;
        assert!((mean_a / 1.94e-4 - 1.0).abs() < 0.01, "{mean_a}");
        assert!(ParticleEnsemble::init(&DeteriorationParams::default(), 99, &mut raw_stream_rng(1, 0, 0)).is_err());
    }

    #[test]
    fn ess_cases() {
        let mut e = ensemble(200);
        assert!((e.ess() - 200.0).abs() < 1e-9);
        e.update(|j, _| if j == 3 { 0.0 } else { f64::NEG_INFINITY }).unwrap();
        assert!((e.ess() - 1.0).abs() < 1e-12);
        let mut e = ensemble(200);
        e.update(|j, _| if j < 2 { 0.0 } else { f64::NEG_INFINITY }).unwrap();
        assert!((e.ess() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn flat_likelihood_keeps_weights() {
        let mut e = ensemble(150);
        let before = e.weights.clone();
        e.update(|_, _| -3.0).unwrap();
        for (a, b) in before.iter().zip(&e.weights) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn total_underflow_is_degeneracy() {
        let mut e = ensemble(150);
        let before = e.weights.clone();
        assert!(matches!(e.update(|_, _| f64::NEG_INFINITY), Err(Error::Degeneracy { .. })));
        assert_eq!(before, e.weights);
    }

    #[test]
    fn predict_without_noise_matches_transition() {
        let params = DeteriorationParams { omega_mean: 0.0, omega_sd: 0.0, shock_rate: 0.0, ..Default::default() };
        let mut e = ensemble(100);
        let mut rng = raw_stream_rng(2, 0, 0);
        let (a0, b0) = (e.a.clone(), e.b.clone());
        e.predict(1.0, &params, ShockKnowledge::Unobserved, &mut rng).unwrap();
        e.predict(2.0, &params, ShockKnowledge::Unobserved, &mut rng).unwrap();
        for j in 0..e.len() {
            let expected = gradual_increment(a0[j], b0[j], 0.0, 1.0, 0.0) + gradual_increment(a0[j], b0[j], 1.0, 2.0, 0.0);
            assert!((e.x[j] - expected).abs() < 1e-15);
        }
        assert_eq!((e.a, e.b), (a0, b0));
        assert!(matches!(ensemble(100).predict(0.0, &params, ShockKnowledge::Unobserved, &mut rng), Err(Error::Domain(_))));
    }

    #[test]
    fn observed_shock_adds_one_magnitude() {
        let params = DeteriorationParams { a_mean: 0.0, omega_sd: 0.0, ..Default::default() };
        let mut e = ensemble(2000);
        e.a.iter_mut().for_each(|a| *a = 0.0);
        let mut rng = raw_stream_rng(3, 0, 0);
        e.predict(0.5, &params, ShockKnowledge::Observed(1), &mut rng).unwrap();
        let mean = e.x.iter().sum::<f64>() / e.len() as f64;
        assert!(e.x.iter().all(|v| *v > 0.0));
        assert!((mean / 3.75 - 1.0).abs() < 0.03, "{mean}");
    }

    #[test]
    fn inspection_pulls_mean_toward_observation() {
        let params = DeteriorationParams { shock_rate: 0.0, ..Default::default() };
        let mut e = ensemble(1000);
        let mut rng = raw_stream_rng(4, 0, 0);
        for t in 1..=40 {
            e.predict(t as f64, &params, ShockKnowledge::Unobserved, &mut rng).unwrap();
        }
        let prior_mean = e.moments()[0].0;
        let z = prior_mean + 0.5;
        e.update(|_, x| crate::observation::inspection_log_likelihood(z, x, 0.05, 0.01)).unwrap();
        let post_mean = e.moments()[0].0;
        assert!(post_mean > prior_mean && (post_mean - z).abs() < (prior_mean - z).abs());
    }

    #[test]
    fn resampling_preserves_moments() {
        let mut rng = raw_stream_rng(5, 0, 0);
        let n = 10_000;
        let x: Vec<f64> = (0..n).map(|_| 2.0 + 0.5 * standard_normal(&mut rng)).collect();
        let a: Vec<f64> = (0..n).map(|_| 2e-4 * (1.0 + 0.3 * standard_normal(&mut rng))).collect();
        let b: Vec<f64> = (0..n).map(|_| 2.0 + 0.2 * standard_normal(&mut rng)).collect();
        let mut e = ParticleEnsemble::from_particles(x, a, b).unwrap();
        e.update(|_, x| -0.5 * ((x - 2.3) / 0.4).powi(2)).unwrap();
        let before = e.moments();
        let cov_before = weighted_cov_xb(&e);
        let report = e.gm_resample(&FilterSettings::default(), &mut rng);
        assert!(!report.fallback);
        assert_eq!(e.ess(), n as f64);
        let after = e.moments();
        for d in 0..3 {
            assert!((after[d].0 - before[d].0).abs() <= 0.03 * before[d].0.abs(), "mean {d}");
            assert!((after[d].1 - before[d].1).abs() <= 0.03 * before[d].1, "sd {d}");
        }
        assert!((weighted_cov_xb(&e) - cov_before).abs() <= 0.03 * before[0].1 * before[2].1);
    }

    fn weighted_cov_xb(e: &ParticleEnsemble) -> f64 {
        let [(mx, _), _, (mb, _)] = e.moments();
        (0..e.len()).map(|j| e.weights[j] * (e.x[j] - mx) * (e.b[j] - mb)).sum()
    }

    #[test]
    fn single_support_resample() {
        let mut e = ensemble(300);
        e.x.iter_mut().enumerate().for_each(|(j, v)| *v = j as f64 * 0.01);
        e.update(|j, _| if j == 7 { 0.0 } else { f64::NEG_INFINITY }).unwrap();
        let (x7, a7, b7) = (e.x[7], e.a[7], e.b[7]);
        let mut rng = raw_stream_rng(6, 0, 0);
        let report = e.gm_resample(&FilterSettings::default(), &mut rng);
        assert_eq!(report.components, 1);
        assert!(e.x.iter().all(|v| (v - x7).abs() < 1e-6));
        assert!(e.a.iter().all(|v| (v - a7).abs() < 1e-9));
        assert!(e.b.iter().all(|v| (v - b7).abs() < 1e-6));
    }

    #[test]
    fn reliability_bookkeeping() {
        let mut e = ensemble(100);
        let step = e.advance_reliability(|_| 1e-4, HazardConvention::Survival);
        assert_eq!(step.pr_prev, 0.0);
        assert!((step.pr_pred - 1e-4).abs() < 1e-16);
        assert!((step.hazard - 1e-4).abs() < 1e-16);
        let step = e.advance_reliability(|_| 2e-4, HazardConvention::Survival);
        assert!((step.pr_prev - 1e-4).abs() < 1e-16);
        assert!((step.pr_pred - (1.0 - (1.0 - 1e-4) * (1.0 - 2e-4))).abs() < 1e-15);
        assert!((step.hazard - 2e-4).abs() < 1e-15);
        assert!((e.filtered_hazard(HazardConvention::Survival) - 2e-4).abs() < 1e-15);
        e.repair();
        assert_eq!(e.failure_probability(), 0.0);
    }

    #[test]
    fn trace_csv_shape() {
        let row = ensemble(100).trace_row(true);
        assert_eq!(row.to_csv().split(',').count(), TraceRow::CSV_HEADER.split(',').count());
    }
}
