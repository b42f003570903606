//! Measurement models: identified eigenvalues from the monitoring system and visual inspections.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{normal_ln_pdf, standard_normal};
use crate::structure::ModalPredictor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservationSettings {
    pub c_lambda: f64,
    pub cv_insp: f64,
    pub sigma_floor: f64,
    pub modes_min: usize,
    pub modes_max: usize,
}

impl Default for ObservationSettings {
    fn default() -> Self {
        Self { c_lambda: 0.02, cv_insp: 0.15, sigma_floor: 0.01, modes_min: 5, modes_max: 5 }
    }
}

impl ObservationSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_lambda >= 0.0) || !(self.cv_insp >= 0.0) || !(self.sigma_floor >= 0.0) {
            return Err(Error::Config("observation: c_lambda, cv_insp and sigma_floor must be >= 0".into()));
        }
        if !(3..=5).contains(&self.modes_min) || !(self.modes_min..=5).contains(&self.modes_max) {
            return Err(Error::Config("observation: need 3 <= modes_min <= modes_max <= 5".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShmObservation {
    pub time: f64,
    pub temperature: f64,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InspectionObservation {
    pub time: f64,
    pub measured_state: f64,
}

/// Perturbs model eigenvalues with the given standard normal draws and sorts them.
pub fn perturb_eigenvalues(model: &[f64], xi: &[f64], c_lambda: f64) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = model.iter().zip(xi).map(|(l, z)| l * (1.0 + c_lambda * z)).collect();
    if out.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("perturbed eigenvalue is not positive".into()));
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Samples identified eigenvalues `λ(x, E)·(1 + c·ξ)`, keeping the lowest `n_modes`.
pub fn sample_shm_observation<R: Rng + ?Sized>(
    time: f64,
    x_true: f64,
    t_celsius: f64,
    youngs_modulus: f64,
    predictor: &dyn ModalPredictor,
    c_lambda: f64,
    n_modes: usize,
    rng: &mut R,
) -> Result<ShmObservation> {
    if !(x_true >= 0.0) || !(c_lambda >= 0.0) {
        return Err(Error::Domain("need x >= 0 and c_lambda >= 0".into()));
    }
    let mut model = vec![0.0; n_modes];
    predictor.eigenvalues_into(x_true, youngs_modulus, &mut model)?;
    let draw = |rng: &mut R| (0..n_modes).map(|_| standard_normal(rng)).collect::<Vec<_>>();
    let eigenvalues = match perturb_eigenvalues(&model, &draw(rng), c_lambda) {
        Ok(v) => v,
        Err(_) => perturb_eigenvalues(&model, &draw(rng), c_lambda)?,
    };
    Ok(ShmObservation { time, temperature: t_celsius, eigenvalues })
}

/// Sum over modes of `Normal(λ̃ − λ(x, E); 0, (c·λ̃)²)` log-densities.
pub fn shm_log_likelihood(obs: &[f64], predicted: &[f64], c_lambda: f64) -> f64 {
    obs.iter().zip(predicted).map(|(o, p)| normal_ln_pdf(o - p, 0.0, c_lambda * o)).sum()
}

/// Same as [`shm_log_likelihood`] with the prediction evaluated by `predictor`.
pub fn shm_log_likelihood_at(
    obs: &ShmObservation,
    x: f64,
    youngs_modulus: f64,
    predictor: &dyn ModalPredictor,
    c_lambda: f64,
) -> Result<f64> {
    let mut buf = [0.0; 16];
    let m = obs.eigenvalues.len();
    predictor.eigenvalues_into(x, youngs_modulus, &mut buf[..m])?;
    Ok(shm_log_likelihood(&obs.eigenvalues, &buf[..m], c_lambda))
}

#[inline]
pub fn inspection_sd(x: f64, cv_insp: f64, sigma_floor: f64) -> f64 {
    (cv_insp * x).max(sigma_floor)
}

/// Inspection outcome from a standard normal draw `xi`, floored at zero.
pub fn inspection_outcome(x_true: f64, xi: f64, cv_insp: f64, sigma_floor: f64) -> f64 {
    (x_true + inspection_sd(x_true, cv_insp, sigma_floor) * xi).max(0.0)
}

pub fn sample_inspection<R: Rng + ?Sized>(
    time: f64,
    x_true: f64,
    cv_insp: f64,
    sigma_floor: f64,
    rng: &mut R,
) -> InspectionObservation {
    InspectionObservation { time, measured_state: inspection_outcome(x_true, standard_normal(rng), cv_insp, sigma_floor) }
}

pub fn inspection_log_likelihood(measured: f64, x: f64, cv_insp: f64, sigma_floor: f64) -> f64 {
    normal_ln_pdf(measured, x, inspection_sd(x, cv_insp, sigma_floor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::raw_stream_rng;
    use std::f64::consts::PI;

    fn brute_normal(x: f64, m: f64, s: f64) -> f64 {
        (-(x - m) * (x - m) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt())
    }

    #[test]
    fn shm_likelihood_matches_product_of_densities() {
        let mut rng = raw_stream_rng(5, 0, 0);
        for _ in 0..100 {
            let obs: Vec<f64> = (0..5).map(|i| 100.0 * (i + 1) as f64 * (1.0 + 0.1 * rng.random::<f64>())).collect();
            let pred: Vec<f64> = obs.iter().map(|o| o * (1.0 + 0.03 * standard_normal(&mut rng))).collect();
            let c = 0.02;
            let product: f64 = obs.iter().zip(&pred).map(|(o, p)| brute_normal(*o - *p, 0.0, c * o)).product();
            let ll = shm_log_likelihood(&obs, &pred, c);
            assert!((ll.exp() - product).abs() <= 1e-12 * product);
        }
    }

    #[test]
    fn zero_residual_peak() {
        let obs = [4.0, 9.0, 30.0];
        let ll = shm_log_likelihood(&obs, &obs, 0.02);
        let expected: f64 = obs.iter().map(|o| -(0.02 * o * (2.0 * PI).sqrt()).ln()).sum();
        assert!((ll - expected).abs() < 1e-12);
    }

    #[test]
    fn inspection_likelihood_matches_density() {
        let mut rng = raw_stream_rng(6, 0, 0);
        for _ in 0..100 {
            let x = 3.0 * rng.random::<f64>();
            let z = x + standard_normal(&mut rng) * 0.3;
            let d = brute_normal(z, x, (0.15 * x).max(0.01));
            let ll = inspection_log_likelihood(z, x, 0.15, 0.01);
            assert!((ll.exp() - d).abs() <= 1e-12 * d);
        }
        let a = inspection_log_likelihood(1.2, 1.0, 0.15, 0.01);
        let b = inspection_log_likelihood(0.8, 1.0, 0.15, 0.01);
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn exact_inspection_without_noise() {
        let mut rng = raw_stream_rng(7, 0, 0);
        assert_eq!(sample_inspection(1.0, 2.5, 0.0, 0.0, &mut rng).measured_state, 2.5);
        assert!(sample_inspection(1.0, 0.0, 0.15, 0.01, &mut rng).measured_state >= 0.0);
    }

    #[test]
    fn perturbed_values_sorted() {
        let v = perturb_eigenvalues(&[10.0, 10.5, 40.0], &[3.0, -3.0, 0.0], 0.02).unwrap();
        assert!(v.windows(2).all(|w| w[0] <= w[1]));
        assert!(perturb_eigenvalues(&[1.0], &[-100.0], 0.02).is_err());
    }
}
