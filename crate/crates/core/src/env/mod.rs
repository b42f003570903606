//! Temperature dependence of the effective Young's modulus and its Bayesian learning.

pub mod tmcmc;

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{erf, normal_ln_pdf, standard_normal, MeanCv};
use crate::structure::ModalPredictor;
pub use tmcmc::{tmcmc, TmcmcOutput, TmcmcSettings};

/// Operating temperature range (degrees C) on which θ must stay positive.
pub const OPERATING_RANGE: (f64, f64) = (-20.0, 40.0);

pub const PARAM_NAMES: [&str; 5] = ["slope", "intercept", "step_size", "transition_center", "transition_width"];

/// Parameters of `θ(T) = slope·T + intercept + U·(1 − erf((T − Y)/τ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvModelParams {
    pub slope: f64,
    pub intercept: f64,
    pub step_size: f64,
    pub transition_center: f64,
    pub transition_width: f64,
}

impl Default for EnvModelParams {
    fn default() -> Self {
        Self::REFERENCE
    }
}

impl EnvModelParams {
    /// The "true" parameter set of the single-realization study.
    pub const REFERENCE: Self =
        Self { slope: -0.0057, intercept: 1.101, step_size: 0.174, transition_center: -1.292, transition_width: 3.464 };

    pub fn to_array(&self) -> [f64; 5] {
        [self.slope, self.intercept, self.step_size, self.transition_center, self.transition_width]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self { slope: v[0], intercept: v[1], step_size: v[2], transition_center: v[3], transition_width: v[4] }
    }

    pub fn theta(&self, t_celsius: f64) -> f64 {
        self.slope * t_celsius
            + self.intercept
            + self.step_size * (1.0 - erf((t_celsius - self.transition_center) / self.transition_width))
    }

    pub fn theta_derivative(&self, t_celsius: f64) -> f64 {
        let z = (t_celsius - self.transition_center) / self.transition_width;
        self.slope - 2.0 * self.step_size / (self.transition_width * PI.sqrt()) * (-z * z).exp()
    }

    /// Checks `τ > 0` and `θ > 0` over the operating range.
    pub fn validate(&self) -> Result<()> {
        if !(self.transition_width > 0.0) {
            return Err(Error::ModelValidity(format!("transition width must be positive, got {}", self.transition_width)));
        }
        let (lo, hi) = OPERATING_RANGE;
        let n = 240;
        for i in 0..=n {
            let t = lo + (hi - lo) * i as f64 / n as f64;
            if !(self.theta(t) > 0.0) {
                return Err(Error::ModelValidity(format!("theta({t}) = {} is not positive", self.theta(t))));
            }
        }
        Ok(())
    }
}

pub fn effective_youngs_modulus(params: &EnvModelParams, t_celsius: f64, e0: f64) -> Result<f64> {
    if !(e0 > 0.0) {
        return Err(Error::Domain(format!("nominal Young's modulus must be positive, got {e0}")));
    }
    let theta = params.theta(t_celsius);
    if !(theta > 0.0) {
        return Err(Error::ModelValidity(format!("theta({t_celsius}) = {theta} is not positive")));
    }
    Ok(theta * e0)
}

/// Independent normal priors, each given as (mean, cv).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvPrior {
    pub slope: MeanCv,
    pub intercept: MeanCv,
    pub step_size: MeanCv,
    pub transition_center: MeanCv,
    pub transition_width: MeanCv,
}

impl Default for EnvPrior {
    fn default() -> Self {
        Self {
            slope: MeanCv::new(-0.005, 0.1),
            intercept: MeanCv::new(1.115, 0.025),
            step_size: MeanCv::new(0.165, 0.1),
            transition_center: MeanCv::new(-1.0, 0.25),
            transition_width: MeanCv::new(3.0, 0.2),
        }
    }
}

impl EnvPrior {
    pub fn components(&self) -> [MeanCv; 5] {
        [self.slope, self.intercept, self.step_size, self.transition_center, self.transition_width]
    }

    pub fn means(&self) -> EnvModelParams {
        EnvModelParams::from_slice(&self.components().map(|c| c.mean))
    }

    pub fn sds(&self) -> [f64; 5] {
        self.components().map(|c| c.sd())
    }

    pub fn validate(&self) -> Result<()> {
        for (name, c) in PARAM_NAMES.iter().zip(self.components()) {
            if !(c.cv > 0.0) || !c.mean.is_finite() || c.mean == 0.0 {
                return Err(Error::Config(format!("env_prior.{name}: need a nonzero mean and cv > 0")));
            }
        }
        Ok(())
    }

    /// Log density; `-inf` for a non-positive transition width.
    pub fn ln_pdf(&self, v: &[f64]) -> f64 {
        if !(v[4] > 0.0) {
            return f64::NEG_INFINITY;
        }
        self.components().iter().zip(v).map(|(c, &x)| normal_ln_pdf(x, c.mean, c.sd())).sum()
    }

    /// Draws a parameter vector; the transition width is redrawn until positive.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> EnvModelParams {
        let mut v = [0.0; 5];
        for (slot, c) in v.iter_mut().zip(self.components()) {
            *slot = c.mean + c.sd() * standard_normal(rng);
        }
        while !(v[4] > 0.0) {
            v[4] = self.transition_width.mean + self.transition_width.sd() * standard_normal(rng);
        }
        EnvModelParams::from_slice(&v)
    }
}

/// Ambient temperature: annual sinusoid plus Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemperatureModel {
    pub mean: f64,
    pub amplitude: f64,
    /// Phase offset in years.
    pub phase: f64,
    pub noise_sd: f64,
}

impl Default for TemperatureModel {
    fn default() -> Self {
        Self { mean: 9.0, amplitude: 15.0, phase: 0.33, noise_sd: 4.0 }
    }
}

impl TemperatureModel {
    pub fn seasonal(&self, time_years: f64) -> f64 {
        self.mean + self.amplitude * (2.0 * PI * (time_years - self.phase)).sin()
    }

    pub fn sample<R: Rng + ?Sized>(&self, time_years: f64, rng: &mut R) -> f64 {
        self.seasonal(time_years) + self.noise_sd * standard_normal(rng)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sd >= 0.0) || !self.mean.is_finite() || !self.amplitude.is_finite() {
            return Err(Error::Config("temperature model: noise_sd must be >= 0 and values finite".into()));
        }
        Ok(())
    }
}

/// One undamaged-state record: a temperature and the identified eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalRecord {
    pub temperature: f64,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UndamagedModalDataset {
    pub records: Vec<ModalRecord>,
}

impl UndamagedModalDataset {
    /// True when the temperatures lie on both sides of freezing.
    pub fn spans_freezing(&self) -> bool {
        self.records.iter().any(|r| r.temperature < 0.0) && self.records.iter().any(|r| r.temperature > 0.0)
    }
}

/// Simulates `n_t` noisy eigenvalue sets of the undamaged structure, spread over the
/// first year of operation.
pub fn synthesize_undamaged_dataset<R: Rng + ?Sized>(
    truth: &EnvModelParams,
    predictor: &dyn ModalPredictor,
    e0: f64,
    temperature: &TemperatureModel,
    n_t: usize,
    c_lambda: f64,
    rng: &mut R,
) -> Result<UndamagedModalDataset> {
    if n_t < 2 {
        return Err(Error::Domain("n_t must be at least 2".into()));
    }
    let mut records = Vec::with_capacity(n_t);
    for i in 0..n_t {
        let t = temperature.sample(i as f64 / n_t as f64, rng);
        let e = effective_youngs_modulus(truth, t, e0)?;
        let mut eigenvalues = predictor.eigenvalues(0.0, e)?;
        for v in eigenvalues.iter_mut() {
            *v *= 1.0 + c_lambda * standard_normal(rng);
        }
        eigenvalues.sort_by(f64::total_cmp);
        records.push(ModalRecord { temperature: t, eigenvalues });
    }
    Ok(UndamagedModalDataset { records })
}

/// Log-likelihood of the dataset for one parameter vector; `-inf` when θ ≤ 0 at a record.
pub fn env_log_likelihood(
    dataset: &UndamagedModalDataset,
    params: &EnvModelParams,
    predictor: &dyn ModalPredictor,
    e0: f64,
    c_lambda: f64,
) -> f64 {
    let mut buf = [0.0; 16];
    let mut total = 0.0;
    for r in &dataset.records {
        let theta = params.theta(r.temperature);
        if !(theta > 0.0) {
            return f64::NEG_INFINITY;
        }
        let m = r.eigenvalues.len();
        if predictor.eigenvalues_into(0.0, theta * e0, &mut buf[..m]).is_err() {
            return f64::NEG_INFINITY;
        }
        for (obs, pred) in r.eigenvalues.iter().zip(&buf[..m]) {
            total += normal_ln_pdf(obs - pred, 0.0, c_lambda * obs);
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvPosterior {
    pub samples: Vec<[f64; 5]>,
    pub weights: Vec<f64>,
    pub mean: EnvModelParams,
    pub sd: [f64; 5],
    pub tempering: Vec<f64>,
    pub log_evidence: f64,
}

impl EnvPosterior {
    fn from_samples(samples: Vec<[f64; 5]>, tempering: Vec<f64>, log_evidence: f64) -> Self {
        let n = samples.len() as f64;
        let mut m = [0.0; 5];
        for s in &samples {
            for k in 0..5 {
                m[k] += s[k] / n;
            }
        }
        let mut sd = [0.0; 5];
        for s in &samples {
            for k in 0..5 {
                sd[k] += (s[k] - m[k]).powi(2) / n;
            }
        }
        let weights = vec![1.0 / n; samples.len()];
        Self { samples, weights, mean: EnvModelParams::from_slice(&m), sd: sd.map(f64::sqrt), tempering, log_evidence }
    }

    /// Posterior-to-prior standard deviation ratios; values near 1 flag unidentifiable parameters.
    pub fn sd_ratios(&self, prior: &EnvPrior) -> [f64; 5] {
        let p = prior.sds();
        std::array::from_fn(|k| self.sd[k] / p[k])
    }

    /// θ″: the model evaluated at the posterior means.
    pub fn theta_curve(&self) -> EnvModelParams {
        self.mean
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        if p.samples.is_empty() || p.samples.len() != p.weights.len() {
            return Err(Error::Config("posterior document has no samples or mismatched weights".into()));
        }
        Ok(p)
    }
}

/// Learns the θ model parameters from an undamaged dataset.
pub fn learn_env_posterior<R: Rng + ?Sized>(
    dataset: &UndamagedModalDataset,
    prior: &EnvPrior,
    predictor: &dyn ModalPredictor,
    e0: f64,
    c_lambda: f64,
    settings: &TmcmcSettings,
    rng: &mut R,
) -> Result<EnvPosterior> {
    prior.validate()?;
    if !(c_lambda > 0.0) && !dataset.records.is_empty() {
        return Err(Error::Config("c_lambda must be positive for learning".into()));
    }
    let out = tmcmc(
        5,
        |r| prior.sample(r).to_array().to_vec(),
        |v| prior.ln_pdf(v),
        |v| env_log_likelihood(dataset, &EnvModelParams::from_slice(v), predictor, e0, c_lambda),
        settings,
        rng,
    )?;
    let samples = out.samples.iter().map(|s| [s[0], s[1], s[2], s[3], s[4]]).collect();
    Ok(EnvPosterior::from_samples(samples, out.tempering, out.log_evidence))
}

/// Root-mean-square relative error of `estimate` against `truth` on `[lo, hi]`.
pub fn theta_relative_rmse(estimate: &EnvModelParams, truth: &EnvModelParams, lo: f64, hi: f64, n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        let t = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let tr = truth.theta(t);
        s += ((estimate.theta(t) - tr) / tr).powi(2);
    }
    (s / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_reference_values() {
        let p = EnvModelParams::REFERENCE;
        // oracle: erf by composite Simpson quadrature of the Gaussian density
        let erf_quad = |x: f64| {
            let n = 4000;
            let h = x / n as f64;
            let f = |t: f64| (-t * t).exp();
            let mut s = f(0.0) + f(x);
            for i in 1..n {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
            }
            2.0 / PI.sqrt() * s * h / 3.0
        };
        let th = |t: f64| p.slope * t + p.intercept + p.step_size * (1.0 - erf_quad((t - p.transition_center) / p.transition_width));
        assert!((p.theta(20.0) - th(20.0)).abs() < 1e-10);
        assert!((p.theta(-10.0) - th(-10.0)).abs() < 1e-10);
        assert!((p.theta(20.0) - 0.987).abs() < 5e-4);
        assert!((p.theta(-10.0) - 1.506).abs() < 5e-4);
    }

    #[test]
    fn affine_without_step() {
        let p = EnvModelParams { step_size: 0.0, ..EnvModelParams::REFERENCE };
        let (a, b, c) = (p.theta(-5.0), p.theta(5.0), p.theta(15.0));
        assert!(((b - a) - (c - b)).abs() < 1e-15);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let p = EnvModelParams::REFERENCE;
        for t in [-15.0, -3.0, -1.292, 0.5, 10.0, 30.0] {
            let h = 1e-5;
            let fd = (p.theta(t + h) - p.theta(t - h)) / (2.0 * h);
            let d = p.theta_derivative(t);
            assert!((fd - d).abs() <= 1e-6 * d.abs().max(1e-3), "T = {t}: {fd} vs {d}");
        }
    }

    #[test]
    fn effective_modulus() {
        let p = EnvModelParams::REFERENCE;
        let e = effective_youngs_modulus(&p, 20.0, 29.11e9).unwrap();
        assert!((e / 1e9 - 28.73).abs() < 0.02);
        let e = effective_youngs_modulus(&p, -10.0, 29.11e9).unwrap();
        assert!((e / 1e9 - 43.84).abs() < 0.02);
        let bad = EnvModelParams { intercept: -5.0, ..p };
        assert!(matches!(effective_youngs_modulus(&bad, 20.0, 29.11e9), Err(Error::ModelValidity(_))));
    }

    #[test]
    fn temperature_extremes_without_noise() {
        let m = TemperatureModel { noise_sd: 0.0, ..Default::default() };
        assert!((m.seasonal(0.33 + 0.25) - 24.0).abs() < 1e-12);
        assert!((m.seasonal(0.33 + 0.75) + 6.0).abs() < 1e-12);
    }

    #[test]
    fn prior_defaults_match_table() {
        let p = EnvPrior::default();
        assert_eq!(p.means().to_array(), [-0.005, 1.115, 0.165, -1.0, 3.0]);
        assert!(p.ln_pdf(&[-0.005, 1.115, 0.165, -1.0, -0.1]).is_infinite());
    }
}
