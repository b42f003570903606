//! Small probability helpers shared by the models.

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
pub fn normal_ln_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// A distribution given by its mean and coefficient of variation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCv {
    pub mean: f64,
    pub cv: f64,
}

impl MeanCv {
    pub const fn new(mean: f64, cv: f64) -> Self {
        Self { mean, cv }
    }

    pub fn sd(&self) -> f64 {
        (self.mean * self.cv).abs()
    }

    pub fn normal(&self) -> Result<Normal<f64>> {
        Normal::new(self.mean, self.sd()).map_err(|e| Error::Config(format!("normal({self:?}): {e}")))
    }

    /// Log-scale `(mu, sigma)` of the lognormal with this mean and cv.
    pub fn lognormal_params(&self) -> (f64, f64) {
        let s2 = (1.0 + self.cv * self.cv).ln();
        (self.mean.ln() - 0.5 * s2, s2.sqrt())
    }

    pub fn lognormal(&self) -> Result<LogNormal<f64>> {
        if self.mean <= 0.0 {
            return Err(Error::Config(format!("lognormal mean must be positive, got {}", self.mean)));
        }
        let (mu, sigma) = self.lognormal_params();
        LogNormal::new(mu, sigma).map_err(|e| Error::Config(format!("lognormal({self:?}): {e}")))
    }

    /// Second raw moment of the lognormal with this mean and cv.
    pub fn lognormal_second_moment(&self) -> f64 {
        self.mean * self.mean * (1.0 + self.cv * self.cv)
    }
}

/// Weighted mean and standard deviation of `values`.
pub fn weighted_mean_sd(values: impl Iterator<Item = (f64, f64)> + Clone) -> (f64, f64) {
    let (sw, swx) = values.clone().fold((0.0, 0.0), |(sw, sx), (w, x)| (sw + w, sx + w * x));
    if sw <= 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = swx / sw;
    let var = values.fold(0.0, |acc, (w, x)| acc + w * (x - mean) * (x - mean)) / sw;
    (mean, var.max(0.0).sqrt())
}

/// `log(sum(exp(v)))` computed stably.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
