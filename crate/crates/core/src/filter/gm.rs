//! Weighted Gaussian-mixture fitting by EM with BIC model selection.

use nalgebra::{Cholesky, Matrix3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::standard_normal;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmSettings {
    pub max_components: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Covariance regularization relative to the trace of the data covariance.
    pub regularization: f64,
}

impl Default for EmSettings {
    fn default() -> Self {
        Self { max_components: 3, max_iterations: 50, tolerance: 1e-6, regularization: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmComponent {
    pub weight: f64,
    pub mean: Vector3<f64>,
    pub covariance: Matrix3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub components: Vec<GmComponent>,
    pub log_likelihood: f64,
    pub bic: f64,
    pub iterations: usize,
}

struct Prepared {
    weight_ln: f64,
    mean: Vector3<f64>,
    chol_l: Matrix3<f64>,
    log_det_half: f64,
}

fn prepare(c: &GmComponent) -> Option<Prepared> {
    let chol = Cholesky::new(c.covariance)?;
    let l = chol.l();
    let log_det_half = (0..3).map(|i| l[(i, i)].ln()).sum::<f64>();
    Some(Prepared { weight_ln: c.weight.ln(), mean: c.mean, chol_l: l, log_det_half })
}

fn component_ln_pdf(p: &Prepared, y: &Vector3<f64>) -> f64 {
    let d = y - p.mean;
    let z = p.chol_l.solve_lower_triangular(&d).unwrap_or_else(|| Vector3::repeat(f64::INFINITY));
    -0.5 * (z.norm_squared() + 3.0 * LN_2PI) - p.log_det_half
}

fn weighted_covariance(points: &[Vector3<f64>], weights: &[f64], mean: &Vector3<f64>, total: f64) -> Matrix3<f64> {
    let mut c = Matrix3::zeros();
    for (y, &w) in points.iter().zip(weights) {
        if w > 0.0 {
            let d = y - mean;
            c += d * d.transpose() * w;
        }
    }
    c / total
}

fn fit_k(points: &[Vector3<f64>], weights: &[f64], k: usize, reg: f64, settings: &EmSettings) -> Option<GaussianMixture> {
    let n = points.len();
    // initial partition: equal-weight groups along the first coordinate
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| points[i][0].total_cmp(&points[j][0]).then(i.cmp(&j)));
    let mut resp = vec![0.0; n * k];
    let mut acc = 0.0;
    for &i in &order {
        let g = ((acc * k as f64) as usize).min(k - 1);
        resp[i * k + g] = 1.0;
        acc += weights[i];
    }
    let mut components: Vec<GmComponent> = Vec::with_capacity(k);
    let mut prev_ll = f64::NEG_INFINITY;
    let mut ll = f64::NEG_INFINITY;
    let mut iterations = 0;
    let mut wr = vec![0.0; n];
    for it in 0..=settings.max_iterations {
        // M-step
        components.clear();
        for g in 0..k {
            let mut nk = 0.0;
            let mut mean = Vector3::zeros();
            for i in 0..n {
                wr[i] = weights[i] * resp[i * k + g];
                nk += wr[i];
                mean += points[i] * wr[i];
            }
            if !(nk > 1e-12) {
                return None;
            }
            mean /= nk;
            let mut cov = weighted_covariance(points, &wr, &mean, nk);
            for d in 0..3 {
                cov[(d, d)] += reg;
            }
            components.push(GmComponent { weight: nk, mean, covariance: cov });
        }
        let prepared: Vec<Prepared> = components.iter().map(prepare).collect::<Option<_>>()?;
        // E-step
        ll = 0.0;
        let mut lp = [0.0; 3];
        for i in 0..n {
            let mut max = f64::NEG_INFINITY;
            for g in 0..k {
                lp[g] = prepared[g].weight_ln + component_ln_pdf(&prepared[g], &points[i]);
                max = max.max(lp[g]);
            }
            if !max.is_finite() {
                return None;
            }
            let s: f64 = lp[..k].iter().map(|v| (v - max).exp()).sum();
            let lse = max + s.ln();
            for g in 0..k {
                resp[i * k + g] = (lp[g] - lse).exp();
            }
            ll += weights[i] * lse;
        }
        if !ll.is_finite() {
            return None;
        }
        iterations = it;
        if it > 0 && (ll - prev_ll).abs() <= settings.tolerance * prev_ll.abs().max(1e-300) {
            break;
        }
        prev_ll = ll;
    }
    Some(GaussianMixture { components, log_likelihood: ll, bic: f64::NAN, iterations })
}

/// Fits mixtures with `1..=max_components` components and keeps the lowest BIC.
///
/// The log-likelihood entering BIC is the weighted mean log-density scaled by the
/// number of points with positive weight.
pub fn fit_weighted_gm(points: &[Vector3<f64>], weights: &[f64], settings: &EmSettings) -> Result<GaussianMixture> {
    if points.is_empty() || points.len() != weights.len() {
        return Err(Error::Fit("mixture fit needs matching, nonempty points and weights".into()));
    }
    let total: f64 = weights.iter().sum();
    let w: Vec<f64> = weights.iter().map(|v| v / total).collect();
    let n_eff = 1.0 / w.iter().map(|v| v * v).sum::<f64>();
    let n_support = w.iter().filter(|v| **v > 0.0).count() as f64;
    let mut mean = Vector3::zeros();
    for (y, &wi) in points.iter().zip(&w) {
        mean += y * wi;
    }
    let cov = weighted_covariance(points, &w, &mean, 1.0);
    let reg = settings.regularization * cov.trace() + 1e-12;
    let mut best: Option<GaussianMixture> = None;
    for k in 1..=settings.max_components.clamp(1, 3) {
        if k > 1 && n_eff < (10 * k) as f64 {
            break;
        }
        if let Some(mut gm) = fit_k(points, &w, k, reg, settings) {
            let n_params = (10 * k - 1) as f64;
            gm.bic = -2.0 * n_support * gm.log_likelihood + n_params * n_support.ln();
            if best.as_ref().is_none_or(|b| gm.bic < b.bic) {
                best = Some(gm);
            }
        }
    }
    best.ok_or_else(|| Error::Fit("EM failed for every component count".into()))
}

impl GaussianMixture {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector3<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = self.components.len() - 1;
        for (g, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                pick = g;
                break;
            }
        }
        let c = &self.components[pick];
        let l = Cholesky::new(c.covariance).map(|ch| ch.l()).unwrap_or_else(Matrix3::zeros);
        let z = Vector3::new(standard_normal(rng), standard_normal(rng), standard_normal(rng));
        c.mean + l * z
    }

    pub fn ln_pdf(&self, y: &Vector3<f64>) -> f64 {
        let lp: Vec<f64> = self
            .components
            .iter()
            .filter_map(prepare)
            .map(|p| p.weight_ln + component_ln_pdf(&p, y))
            .collect();
        crate::stats::log_sum_exp(&lp)
    }
}
