//! Gumbel demand, interval and accumulated failure probabilities, and the hazard rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gumbel distribution of the maximum load per year, in normalized-capacity units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandModel {
    pub scale: f64,
    pub location: f64,
}

impl Default for DemandModel {
    fn default() -> Self {
        Self { scale: 0.0509, location: 0.297 }
    }
}

impl DemandModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) || !self.location.is_finite() {
            return Err(Error::Config("reliability.gumbel_a must be positive and gumbel_b finite".into()));
        }
        Ok(())
    }

    /// `P(S_max > r) = 1 − exp(−exp(−(r − b)/a))`, accurate in the far tail.
    pub fn exceedance(&self, r: f64) -> f64 {
        -(-(-(r - self.location) / self.scale).exp()).exp_m1()
    }

    /// Failure probability for an interval of `dt` years of independent annual maxima.
    pub fn interval_exceedance(&self, r: f64, dt: f64) -> f64 {
        let p = self.exceedance(r);
        if dt == 1.0 {
            p
        } else {
            -(dt * (-p).ln_1p()).exp_m1()
        }
    }
}

/// Running `1 − ∏(1 − p_m)`.
pub fn accumulated_failure(interval_probs: &[f64]) -> Result<Vec<f64>> {
    let mut log_survival = 0.0;
    interval_probs
        .iter()
        .map(|&p| {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!("interval probability {p} outside [0, 1]")));
            }
            log_survival += (-p).ln_1p();
            Ok(-log_survival.exp_m1())
        })
        .collect()
}

/// Weighted average of per-particle accumulated failure probabilities.
pub fn posterior_failure_estimate(weights: &[f64], values: &[f64]) -> f64 {
    weights.iter().zip(values).map(|(w, v)| w * v).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HazardConvention {
    /// Increment divided by the survival probability up to the previous epoch.
    #[default]
    Survival,
    /// Increment divided by the previous accumulated failure probability.
    AsPrinted,
}

pub fn hazard_rate(pr_k: f64, pr_prev: f64, convention: HazardConvention) -> Result<f64> {
    if !(0.0..=1.0).contains(&pr_prev) || !(0.0..=1.0).contains(&pr_k) {
        return Err(Error::Domain(format!("probabilities outside [0, 1]: {pr_k}, {pr_prev}")));
    }
    let num = (pr_k - pr_prev).max(0.0);
    let den = match convention {
        HazardConvention::Survival => 1.0 - pr_prev,
        HazardConvention::AsPrinted => pr_prev,
    };
    if den == 0.0 {
        return if num == 0.0 { Ok(0.0) } else { Err(Error::Domain("hazard denominator is zero".into())) };
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn undamaged_failure_probability() {
        let p = DemandModel::default().exceedance(1.0);
        assert!((0.95e-6..=1.05e-6).contains(&p), "{p}");
        let at_location = DemandModel::default().exceedance(0.297);
        assert!((at_location - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn exceedance_matches_integrated_density() {
        // oracle: Simpson integration of the Gumbel density from r to a far upper limit
        let d = DemandModel::default();
        let pdf = |s: f64| {
            let z = (s - d.location) / d.scale;
            (-z - (-z).exp()).exp() / d.scale
        };
        for r in [0.4, 0.6, 0.8] {
            let hi = 3.0;
            let n = 200_000;
            let h = (hi - r) / n as f64;
            let mut s = pdf(r) + pdf(hi);
            for i in 1..n {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * pdf(r + i as f64 * h);
            }
            let integral = s * h / 3.0;
            assert!((integral - d.exceedance(r)).abs() < 1e-9, "r = {r}");
        }
    }

    #[test]
    fn accumulated_examples() {
        assert_eq!(accumulated_failure(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let v = accumulated_failure(&[1e-4, 2e-4]).unwrap();
        assert!((v[1] - 2.9998e-4).abs() < 1e-15);
        let p = 0.01;
        let v = accumulated_failure(&[p; 7]).unwrap();
        assert!((v[6] - (1.0 - (1.0 - p).powi(7))).abs() < 1e-15);
    }

    #[test]
    fn hazard_examples() {
        let h = hazard_rate(2e-4, 1e-4, HazardConvention::Survival).unwrap();
        assert!((h - 1e-4 / 0.9999).abs() < 1e-16);
        assert!((hazard_rate(2e-4, 1e-4, HazardConvention::AsPrinted).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(hazard_rate(0.3, 0.3, HazardConvention::Survival).unwrap(), 0.0);
        assert_eq!(hazard_rate(0.0, 0.0, HazardConvention::AsPrinted).unwrap(), 0.0);
        assert!(hazard_rate(1e-3, 0.0, HazardConvention::AsPrinted).is_err());
    }

    #[test]
    fn posterior_estimate() {
        assert!((posterior_failure_estimate(&[0.5, 0.5], &[0.0, 1e-3]) - 5e-4).abs() < 1e-18);
    }

    #[test]
    fn sub_year_interval() {
        let d = DemandModel::default();
        let p1 = d.interval_exceedance(0.6, 1.0);
        let half = d.interval_exceedance(0.6, 0.5);
        assert!(((1.0 - half).powi(2) - (1.0 - p1)).abs() < 1e-15);
    }
}
