//! Gradual power-law deterioration with multiplicative noise plus compound-Poisson shocks.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::raw_stream_rng;
use crate::stats::{standard_normal, MeanCv};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeteriorationParams {
    #[serde(rename = "A_mean")]
    pub a_mean: f64,
    #[serde(rename = "A_cv")]
    pub a_cv: f64,
    #[serde(rename = "B_mean")]
    pub b_mean: f64,
    #[serde(rename = "B_cv")]
    pub b_cv: f64,
    pub omega_mean: f64,
    pub omega_sd: f64,
    pub shock_rate: f64,
    #[serde(rename = "D_mean")]
    pub d_mean: f64,
    #[serde(rename = "D_cv")]
    pub d_cv: f64,
    pub horizon_years: f64,
}

impl Default for DeteriorationParams {
    fn default() -> Self {
        Self {
            a_mean: 1.94e-4,
            a_cv: 0.4,
            b_mean: 2.0,
            b_cv: 0.1,
            omega_mean: -0.005,
            omega_sd: 0.1,
            shock_rate: 0.04,
            d_mean: 3.75,
            d_cv: 0.25,
            horizon_years: 50.0,
        }
    }
}

impl DeteriorationParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("A_mean", self.a_mean >= 0.0),
            ("A_cv", self.a_cv >= 0.0),
            ("B_cv", self.b_cv >= 0.0),
            ("omega_sd", self.omega_sd >= 0.0),
            ("shock_rate", self.shock_rate >= 0.0),
            ("D_mean", self.d_mean > 0.0),
            ("D_cv", self.d_cv >= 0.0),
            ("horizon_years", self.horizon_years > 0.0),
            ("B_mean", self.b_mean.is_finite() && self.omega_mean.is_finite()),
        ];
        for (key, ok) in checks {
            if !ok {
                return Err(Error::Config(format!("deterioration.{key} is out of range")));
            }
        }
        Ok(())
    }

    pub fn a_prior(&self) -> MeanCv {
        MeanCv::new(self.a_mean, self.a_cv)
    }

    pub fn b_prior(&self) -> MeanCv {
        MeanCv::new(self.b_mean, self.b_cv)
    }

    pub fn shock_magnitude(&self) -> MeanCv {
        MeanCv::new(self.d_mean, self.d_cv)
    }

    pub fn sample_a<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.a_mean == 0.0 {
            return 0.0;
        }
        let (mu, s) = self.a_prior().lognormal_params();
        (mu + s * standard_normal(rng)).exp()
    }

    pub fn sample_b<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.b_mean + self.b_prior().sd() * standard_normal(rng)
    }

    pub fn sample_omega<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.omega_mean + self.omega_sd * standard_normal(rng)
    }

    pub fn sample_magnitude<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (mu, s) = self.shock_magnitude().lognormal_params();
        (mu + s * standard_normal(rng)).exp()
    }
}

/// Deterioration state augmented with the time-invariant parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentedState {
    pub x: f64,
    pub a: f64,
    pub b: f64,
    pub time_since_repair: f64,
}

/// Midpoint-rule gradual increment over local times `[from, to]`.
#[inline]
pub fn gradual_increment(a: f64, b: f64, from: f64, to: f64, omega: f64) -> f64 {
    let mid = 0.5 * (from + to);
    a * b * mid.powf(b - 1.0) * (to - from) * omega.exp()
}

/// Sum of `Poisson(λ·dt)` independent shock magnitudes.
pub fn sample_shock_increment<R: Rng + ?Sized>(dt: f64, params: &DeteriorationParams, rng: &mut R) -> f64 {
    let mean = params.shock_rate * dt;
    if !(mean > 0.0) {
        return 0.0;
    }
    let n = if mean < 10.0 {
        // inversion
        let u: f64 = rng.random();
        let mut term = (-mean).exp();
        let mut cdf = term;
        let mut k = 0u64;
        while u > cdf && k < 200 {
            k += 1;
            term *= mean / k as f64;
            cdf += term;
        }
        k
    } else {
        Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
    };
    (0..n).map(|_| params.sample_magnitude(rng)).sum()
}

/// Advances one particle or state from `t_from` to `t_to` (calendar times); `(a, b)` are unchanged.
pub fn transition_step<R: Rng + ?Sized>(
    state: &AugmentedState,
    t_from: f64,
    t_to: f64,
    params: &DeteriorationParams,
    rng: &mut R,
) -> AugmentedState {
    let dt = t_to - t_from;
    let tau0 = state.time_since_repair;
    let omega = params.sample_omega(rng);
    let jump = sample_shock_increment(dt, params, rng);
    AugmentedState {
        x: state.x + gradual_increment(state.a, state.b, tau0, tau0 + dt, omega) + jump,
        time_since_repair: tau0 + dt,
        ..*state
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shock {
    pub time: f64,
    pub magnitude: f64,
}

/// One ground-truth realization: parameters, shocks and per-year process noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeteriorationScenario {
    pub a: f64,
    pub b: f64,
    pub shocks: Vec<Shock>,
    /// `omegas[k]` applies to calendar year `(k, k + 1]`.
    pub omegas: Vec<f64>,
    pub horizon: f64,
}

pub fn sample_scenario<R: Rng + ?Sized>(params: &DeteriorationParams, rng: &mut R) -> Result<DeteriorationScenario> {
    params.validate()?;
    let horizon = params.horizon_years;
    let a = params.sample_a(rng);
    let b = params.sample_b(rng);
    let n_years = horizon.ceil() as usize;
    let omegas = (0..n_years).map(|_| params.sample_omega(rng)).collect();
    let mut shocks = Vec::new();
    if params.shock_rate > 0.0 {
        let mut t = 0.0;
        loop {
            let u: f64 = rng.random();
            t += -(1.0 - u).ln() / params.shock_rate;
            if t > horizon {
                break;
            }
            shocks.push(Shock { time: t, magnitude: params.sample_magnitude(rng) });
        }
    }
    Ok(DeteriorationScenario { a, b, shocks, omegas, horizon })
}

impl DeteriorationScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !(self.a >= 0.0) || !self.b.is_finite() {
            return Err(Error::Config("scenario: need horizon > 0, A >= 0 and finite B".into()));
        }
        if self.omegas.len() < self.horizon.ceil() as usize {
            return Err(Error::Config("scenario: one omega per year of the horizon is required".into()));
        }
        if self.shocks.iter().any(|s| !(s.time > 0.0 && s.time <= self.horizon && s.magnitude > 0.0)) {
            return Err(Error::Config("scenario: shocks need times in (0, horizon] and positive magnitudes".into()));
        }
        if self.shocks.windows(2).any(|w| w[1].time < w[0].time) {
            return Err(Error::Config("scenario: shocks must be sorted by time".into()));
        }
        Ok(())
    }

    fn omega_at(&self, t: f64) -> f64 {
        let k = (t.floor() as usize).min(self.omegas.len() - 1);
        self.omegas[k]
    }

    /// Gradual increment over calendar `[t_from, t_to]` with local start time `tau_from`.
    pub fn gradual(&self, tau_from: f64, t_from: f64, t_to: f64) -> f64 {
        let dt = t_to - t_from;
        gradual_increment(self.a, self.b, tau_from, tau_from + dt, self.omega_at(0.5 * (t_from + t_to)))
    }

    /// Sum of shock magnitudes with times in `(t_from, t_to]`.
    pub fn shocks_in(&self, t_from: f64, t_to: f64) -> f64 {
        self.shocks.iter().filter(|s| s.time > t_from && s.time <= t_to).map(|s| s.magnitude).sum()
    }

    /// Yearly grid with every shock instant inserted.
    pub fn epoch_grid(&self, with_shocks: bool) -> Vec<f64> {
        let mut grid: Vec<f64> = (1..=self.horizon.floor() as usize).map(|k| k as f64).collect();
        if self.horizon.fract() > 0.0 {
            grid.push(self.horizon);
        }
        if with_shocks {
            for s in &self.shocks {
                if grid.iter().all(|g| (g - s.time).abs() > 1e-9) {
                    grid.push(s.time);
                }
            }
            grid.sort_by(f64::total_cmp);
        }
        grid
    }

    /// State on `grid` without any repair.
    pub fn path(&self, grid: &[f64]) -> Vec<f64> {
        let mut x = 0.0;
        let mut t = 0.0;
        grid.iter()
            .map(|&g| {
                x += self.gradual(t, t, g) + self.shocks_in(t, g);
                t = g;
                x
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }
}

/// How the i-fold convolutions of the shock magnitude are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvolutionMethod {
    /// 10^5 Monte Carlo sums with a fixed seed.
    MonteCarlo,
    /// Lognormal matched to the mean and variance of the sum.
    MomentMatched,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpCdf {
    pub value: f64,
    /// Upper bound on the probability mass of the omitted terms.
    pub truncation_bound: f64,
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Poisson tail `P(N > n)` for mean `m`, summed directly.
fn poisson_tail(m: f64, n: usize) -> f64 {
    let mut term = (-m).exp();
    for i in 1..=n {
        term *= m / i as f64;
    }
    let mut tail = 0.0;
    let mut i = n + 1;
    loop {
        term *= m / i as f64;
        tail += term;
        if term < 1e-300 || term < tail * 1e-17 {
            break;
        }
        i += 1;
    }
    tail
}

/// Truncated series for the CDF of the jump increment over `dt`.
pub fn shock_increment_cdf(
    d: f64,
    dt: f64,
    params: &DeteriorationParams,
    n_terms: usize,
    method: ConvolutionMethod,
) -> Result<JumpCdf> {
    if !(d >= 0.0) || n_terms == 0 || !(dt > 0.0) {
        return Err(Error::Domain("need d >= 0, dt > 0 and n_terms >= 1".into()));
    }
    let m = params.shock_rate * dt;
    let mut pmf = (-m).exp();
    let mut value = pmf;
    let dist = params.shock_magnitude();
    let mut rng = raw_stream_rng(0x5eed, 0, 0);
    const N_DRAWS: usize = 100_000;
    for i in 1..=n_terms {
        pmf *= m / i as f64;
        let fi = match method {
            ConvolutionMethod::MonteCarlo => {
                let hits = (0..N_DRAWS)
                    .filter(|_| (0..i).map(|_| params.sample_magnitude(&mut rng)).sum::<f64>() <= d)
                    .count();
                hits as f64 / N_DRAWS as f64
            }
            ConvolutionMethod::MomentMatched => {
                if d == 0.0 {
                    0.0
                } else {
                    let mean = i as f64 * dist.mean;
                    let var = i as f64 * dist.sd().powi(2);
                    let s2 = (1.0 + var / (mean * mean)).ln();
                    normal_cdf((d.ln() - (mean.ln() - 0.5 * s2)) / s2.sqrt())
                }
            }
        };
        value += pmf * fi;
    }
    Ok(JumpCdf { value: value.min(1.0), truncation_bound: poisson_tail(m, n_terms) })
}
