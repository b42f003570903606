//! Transitional (tempered sequential) Markov chain Monte Carlo.
//!
//! The likelihood is switched on gradually, `prior * L^p` for `0 = p_0 < ... < p_m = 1`.
//! Each tempering increment is chosen so that the coefficient of variation of the
//! incremental weights hits a target, the population is resampled, and every
//! chain takes a few Metropolis steps with a Gaussian proposal built from the
//! weighted sample covariance.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::standard_normal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TmcmcSettings {
    pub n_samples: usize,
    /// Target coefficient of variation of the incremental weights.
    pub target_cov: f64,
    pub mcmc_steps: usize,
    /// Initial proposal scale relative to the sample covariance.
    pub proposal_scale: f64,
    pub max_stages: usize,
}

impl Default for TmcmcSettings {
    fn default() -> Self {
        Self { n_samples: 1000, target_cov: 1.0, mcmc_steps: 3, proposal_scale: 0.4, max_stages: 200 }
    }
}

impl TmcmcSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 10 {
            return Err(Error::Config("tmcmc.n_samples must be at least 10".into()));
        }
        if !(self.target_cov > 0.0) || self.mcmc_steps == 0 || !(self.proposal_scale > 0.0) || self.max_stages == 0 {
            return Err(Error::Config("tmcmc settings must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TmcmcOutput {
    /// Equally weighted samples from the final stage.
    pub samples: Vec<Vec<f64>>,
    pub log_likelihoods: Vec<f64>,
    pub tempering: Vec<f64>,
    pub acceptance: Vec<f64>,
    pub log_evidence: f64,
}

fn weight_cov(log_l: &[f64], dp: f64, max: f64) -> f64 {
    let n = log_l.len() as f64;
    let (mut s, mut s2) = (0.0, 0.0);
    for &l in log_l {
        let w = (dp * (l - max)).exp();
        s += w;
        s2 += w * w;
    }
    let mean = s / n;
    let var = (s2 / n - mean * mean).max(0.0);
    var.sqrt() / mean
}

/// Systematic resampling of `n` indices proportional to `weights`.
pub fn systematic_resample<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let step = total / n as f64;
    let mut u = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut acc = weights[0];
    let mut i = 0;
    for _ in 0..n {
        while u > acc && i + 1 < weights.len() {
            i += 1;
            acc += weights[i];
        }
        out.push(i);
        u += step;
    }
    out
}

/// Runs the sampler. `log_prior` may return `-inf` outside the support.
pub fn tmcmc<R, S, P, L>(
    dim: usize,
    mut sample_prior: S,
    log_prior: P,
    log_likelihood: L,
    settings: &TmcmcSettings,
    rng: &mut R,
) -> Result<TmcmcOutput>
where
    R: Rng + ?Sized,
    S: FnMut(&mut R) -> Vec<f64>,
    P: Fn(&[f64]) -> f64,
    L: Fn(&[f64]) -> f64,
{
    settings.validate()?;
    let n = settings.n_samples;
    let safe_ll = |t: &[f64]| {
        let v = log_likelihood(t);
        if v.is_nan() { f64::NEG_INFINITY } else { v }
    };
    let mut samples: Vec<Vec<f64>> = (0..n).map(|_| sample_prior(rng)).collect();
    let mut log_p: Vec<f64> = samples.iter().map(|t| log_prior(t)).collect();
    let mut log_l: Vec<f64> = samples.iter().map(|t| safe_ll(t)).collect();
    let mut p = 0.0;
    let mut tempering = vec![0.0];
    let mut acceptance = Vec::new();
    let mut log_evidence = 0.0;
    let mut beta = settings.proposal_scale;

    while p < 1.0 {
        if tempering.len() > settings.max_stages {
            return Err(Error::Inference(format!("tempering did not reach 1 within {} stages (p = {p})", settings.max_stages)));
        }
        let max = log_l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Inference("all samples have zero likelihood".into()));
        }
        let remaining = 1.0 - p;
        let dp = if weight_cov(&log_l, remaining, max) <= settings.target_cov {
            remaining
        } else {
            let (mut lo, mut hi) = (0.0, remaining);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if weight_cov(&log_l, mid, max) > settings.target_cov {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            lo
        };
        if !(dp > 1e-14) {
            return Err(Error::Inference(format!(
                "sampler degeneracy at tempering {p:.3e}: incremental weights collapse onto one sample (max log-likelihood {max:.3e})"
            )));
        }
        let weights: Vec<f64> = log_l.iter().map(|&l| (dp * (l - max)).exp()).collect();
        let wsum: f64 = weights.iter().sum();
        log_evidence += (wsum / n as f64).ln() + dp * max;

        let mut mean = DVector::zeros(dim);
        for (w, t) in weights.iter().zip(&samples) {
            mean += DVector::from_column_slice(t) * (w / wsum);
        }
        let mut cov = DMatrix::zeros(dim, dim);
        for (w, t) in weights.iter().zip(&samples) {
            let d = DVector::from_column_slice(t) - &mean;
            cov.ger(w / wsum, &d, &d, 1.0);
        }
        let jitter = 1e-12 * cov.trace().max(1e-300) / dim as f64;
        for i in 0..dim {
            cov[(i, i)] += jitter;
        }

        let idx = systematic_resample(&weights, n, rng);
        let mut new_samples: Vec<Vec<f64>> = idx.iter().map(|&i| samples[i].clone()).collect();
        let mut new_lp: Vec<f64> = idx.iter().map(|&i| log_p[i]).collect();
        let mut new_ll: Vec<f64> = idx.iter().map(|&i| log_l[i]).collect();
        p += dp;
        if 1.0 - p < 1e-12 {
            p = 1.0;
        }

        let chol = nalgebra::Cholesky::new(cov * (beta * beta))
            .ok_or_else(|| Error::Inference("proposal covariance is not positive definite".into()))?;
        let l = chol.l();
        let mut accepted = 0usize;
        let mut z = DVector::zeros(dim);
        for k in 0..n {
            for _ in 0..settings.mcmc_steps {
                for v in z.iter_mut() {
                    *v = standard_normal(rng);
                }
                let step = &l * &z;
                let prop: Vec<f64> = new_samples[k].iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                let lp = log_prior(&prop);
                let u: f64 = rng.random();
                if !lp.is_finite() {
                    continue;
                }
                let ll = safe_ll(&prop);
                let log_ratio = (lp + p * ll) - (new_lp[k] + p * new_ll[k]);
                if u.ln() < log_ratio {
                    new_samples[k] = prop;
                    new_lp[k] = lp;
                    new_ll[k] = ll;
                    accepted += 1;
                }
            }
        }
        let rate = accepted as f64 / (n * settings.mcmc_steps) as f64;
        acceptance.push(rate);
        beta = (beta * (2.0 * (rate - 0.234)).exp()).clamp(0.05, 2.0);
        samples = new_samples;
        log_p = new_lp;
        log_l = new_ll;
        tempering.push(p);
    }

    Ok(TmcmcOutput { samples, log_likelihoods: log_l, tempering, acceptance, log_evidence })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::raw_stream_rng;
    use crate::stats::normal_ln_pdf;

    #[test]
    fn conjugate_normal_posterior() {
        // prior N(0, 1), 10 observations N(theta, 0.5^2) with mean 1.2
        let n_obs = 10.0;
        let ybar = 1.2;
        let s2 = 0.25;
        let post_var = 1.0 / (1.0 + n_obs / s2);
        let post_mean = post_var * n_obs * ybar / s2;
        let mut rng = raw_stream_rng(11, 0, 0);
        let out = tmcmc(
            1,
            |r| vec![standard_normal(r)],
            |t| normal_ln_pdf(t[0], 0.0, 1.0),
            |t| -0.5 * n_obs * (t[0] - ybar).powi(2) / s2,
            &TmcmcSettings { n_samples: 4000, ..Default::default() },
            &mut rng,
        )
        .unwrap();
        let m = out.samples.iter().map(|s| s[0]).sum::<f64>() / out.samples.len() as f64;
        let v = out.samples.iter().map(|s| (s[0] - m).powi(2)).sum::<f64>() / out.samples.len() as f64;
        assert!((m - post_mean).abs() < 0.02, "{m} vs {post_mean}");
        assert!((v.sqrt() / post_var.sqrt() - 1.0).abs() < 0.1);
        assert_eq!(*out.tempering.last().unwrap(), 1.0);
    }

    #[test]
    fn flat_likelihood_is_one_stage() {
        let mut rng = raw_stream_rng(1, 0, 0);
        let out = tmcmc(1, |r| vec![standard_normal(r)], |t| normal_ln_pdf(t[0], 0.0, 1.0), |_| 0.0, &TmcmcSettings::default(), &mut rng)
            .unwrap();
        assert_eq!(out.tempering, vec![0.0, 1.0]);
    }

    #[test]
    fn systematic_resampling_counts() {
        let mut rng = raw_stream_rng(3, 0, 0);
        let idx = systematic_resample(&[0.0, 3.0, 1.0], 8, &mut rng);
        assert_eq!(idx.iter().filter(|&&i| i == 1).count(), 6);
        assert_eq!(idx.iter().filter(|&&i| i == 2).count(), 2);
    }
}
