//! Polynomial ridge-regression response surfaces for the modal map.
//!
//! Each mode family (a *branch*) gets its own two-dimensional polynomial in the
//! deterioration feature and `ln E`. Modes coupled to the damaged support drop as
//! it softens and cross the uncoupled ones, so the sorted eigenfrequencies have
//! kinks. The branch functions are smooth, and sorting the branch predictions
//! reproduces the kinks.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::model::{AssembledModel, ModalPredictor, ModalResult};
use crate::error::{Error, Result};

/// Coordinate used for deterioration inside the polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XFeature {
    /// `x` itself.
    Linear,
    /// `1 / (1 + x)`, proportional to the damaged spring stiffness.
    Reciprocal,
    /// `ln(1 + x)`.
    Log,
}

impl XFeature {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Self::Linear => x,
            Self::Reciprocal => 1.0 / (1.0 + x),
            Self::Log => x.ln_1p(),
        }
    }

    pub fn invert(self, t: f64) -> f64 {
        match self {
            Self::Linear => t,
            Self::Reciprocal => 1.0 / t - 1.0,
            Self::Log => t.exp_m1(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateSettings {
    pub degree: usize,
    pub ridge: f64,
    pub x_feature: XFeature,
    pub x_max: f64,
    /// Young's modulus range as multiples of the nominal value.
    pub e_min_factor: f64,
    pub e_max_factor: f64,
    pub n_x: usize,
    pub n_e: usize,
    /// Extra mode families tracked beyond `n_modes`.
    pub extra_branches: usize,
}

impl Default for SurrogateSettings {
    fn default() -> Self {
        Self {
            degree: 6,
            ridge: 1e-6,
            x_feature: XFeature::Log,
            x_max: 30.0,
            e_min_factor: 0.7,
            e_max_factor: 1.9,
            n_x: 25,
            n_e: 9,
            extra_branches: 3,
        }
    }
}

impl SurrogateSettings {
    /// Fit grids, uniform in the polynomial coordinates.
    pub fn grids(&self, e0: f64) -> (Vec<f64>, Vec<f64>) {
        (
            feature_grid(self.x_feature, self.x_max, self.n_x),
            log_grid(self.e_min_factor * e0, self.e_max_factor * e0, self.n_e),
        )
    }

    /// Held-out grids at the midpoints of the fit grids (in polynomial coordinates).
    pub fn held_out_grids(&self, e0: f64) -> (Vec<f64>, Vec<f64>) {
        let (tx0, tx1) = (self.x_feature.apply(0.0), self.x_feature.apply(self.x_max));
        let xs = (0..self.n_x - 1)
            .map(|i| self.x_feature.invert(tx0 + (i as f64 + 0.5) / (self.n_x - 1) as f64 * (tx1 - tx0)))
            .collect();
        let (l0, l1) = ((self.e_min_factor * e0).ln(), (self.e_max_factor * e0).ln());
        let es = (0..self.n_e - 1)
            .map(|i| (l0 + (i as f64 + 0.5) / (self.n_e - 1) as f64 * (l1 - l0)).exp())
            .collect();
        (xs, es)
    }
}

fn feature_grid(feature: XFeature, x_max: f64, n: usize) -> Vec<f64> {
    let (t0, t1) = (feature.apply(0.0), feature.apply(x_max));
    let mut xs: Vec<f64> = (0..n)
        .map(|i| feature.invert(t0 + i as f64 / (n - 1) as f64 * (t1 - t0)).max(0.0))
        .collect();
    xs[0] = 0.0;
    xs[n - 1] = x_max;
    xs
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + i as f64 / (n - 1) as f64 * (hi.ln() - lo.ln())).exp())
        .collect()
}

pub const MAX_DEGREE: usize = 8;

/// Fitted response surfaces, one per mode family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalSurrogate {
    pub degree: usize,
    pub ridge: f64,
    pub x_feature: XFeature,
    pub n_modes: usize,
    /// Fit-domain bounds.
    pub x_min: f64,
    pub x_max: f64,
    pub e_min: f64,
    pub e_max: f64,
    /// Monomial exponents `(i, j)` of `s^i v^j` with `s`, `v` mapped to [-1, 1].
    pub exponents: Vec<(usize, usize)>,
    /// Per-branch scale of the eigenfrequency (Hz); coefficients predict `f / scale`.
    pub scales: Vec<f64>,
    pub coefficients: Vec<Vec<f64>>,
}

/// A prediction with a flag telling whether the inputs were clamped to the fit domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogatePrediction {
    pub modal: ModalResult,
    pub out_of_domain: bool,
}

fn monomial_exponents(degree: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for total in 0..=degree {
        for i in (0..=total).rev() {
            v.push((i, total - i));
        }
    }
    v
}

/// Squared projection below which a mode is taken as unaffected by the damaged support.
const COUPLING_TOL: f64 = 1e-10;

/// Splits the spectrum into modes coupled to the damaged support and modes
/// orthogonal to it, each sorted ascending. Softening one spring is a rank-one
/// update, so orthogonal modes keep their eigenvalues and coupled ones never cross.
fn split_spectrum(model: &AssembledModel, x: f64, youngs_modulus: f64, n_candidates: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let supports = model.supports_at(x)?;
    let (values, vectors) = model.eigenpairs_with_supports(youngs_modulus, &supports, n_candidates)?;
    let g = model.damaged_support_vector();
    let gg = g.norm_squared();
    let mut coupled = Vec::new();
    let mut free = Vec::new();
    for (v, y) in values.iter().zip(&vectors) {
        let f = v.sqrt() / (2.0 * std::f64::consts::PI);
        if g.dot(y).powi(2) / gg > COUPLING_TOL {
            coupled.push(f);
        } else {
            free.push(f);
        }
    }
    Ok((coupled, free))
}

/// Branch frequencies at one point: the first `n_coupled` coupled modes, then the first `n_free` others.
fn branch_frequencies(
    model: &AssembledModel,
    x: f64,
    youngs_modulus: f64,
    n_coupled: usize,
    n_free: usize,
) -> Result<Vec<f64>> {
    let n_candidates = 2 * (n_coupled + n_free) + 2;
    let (coupled, free) = split_spectrum(model, x, youngs_modulus, n_candidates)?;
    if coupled.len() < n_coupled || free.len() < n_free {
        return Err(Error::Fit(format!("could not separate mode families at x = {x}, E = {youngs_modulus:.4e}")));
    }
    Ok(coupled[..n_coupled].iter().chain(&free[..n_free]).copied().collect())
}

impl ModalSurrogate {
    /// Fits one response surface per mode family over the given grids.
    pub fn fit(
        model: &AssembledModel,
        x_grid: &[f64],
        e_grid: &[f64],
        n_modes: usize,
        settings: &SurrogateSettings,
    ) -> Result<Self> {
        let degree = settings.degree;
        if !(1..=MAX_DEGREE).contains(&degree) {
            return Err(Error::Fit(format!("polynomial degree must lie in [1, {MAX_DEGREE}], got {degree}")));
        }
        if !(settings.ridge >= 0.0) {
            return Err(Error::Fit("ridge strength must be non-negative".into()));
        }
        let mut xs = x_grid.to_vec();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let mut es = e_grid.to_vec();
        es.sort_by(f64::total_cmp);
        es.dedup();
        if xs.len() < degree + 1 || es.len() < degree + 1 {
            return Err(Error::Fit(format!(
                "degenerate design: need at least {} distinct values per axis, got {} (x) and {} (E)",
                degree + 1,
                xs.len(),
                es.len()
            )));
        }
        if xs[0] != 0.0 || xs.iter().any(|&x| x < 0.0) {
            return Err(Error::Fit("deterioration grid must start at 0".into()));
        }
        if es[0] <= 0.0 {
            return Err(Error::Fit("Young's modulus grid must be positive".into()));
        }
        if !(3..=5).contains(&n_modes) {
            return Err(Error::Fit(format!("n_modes must lie in [3, 5], got {n_modes}")));
        }
        let n_branches = n_modes + settings.extra_branches;
        let e_ref = model.config().nominal_youngs_modulus;
        let (coupled0, _) = split_spectrum(model, 0.0, e_ref, n_branches)?;
        let n_coupled = coupled0.len().max(1);
        let n_free = n_branches - n_coupled.min(n_branches);

        let mut surrogate = Self {
            degree,
            ridge: settings.ridge,
            x_feature: settings.x_feature,
            n_modes,
            x_min: 0.0,
            x_max: *xs.last().unwrap(),
            e_min: es[0],
            e_max: *es.last().unwrap(),
            exponents: monomial_exponents(degree),
            scales: vec![0.0; n_branches],
            coefficients: Vec::new(),
        };

        // rows: (x, e) pairs; targets per branch
        let mut rows = Vec::with_capacity(xs.len() * es.len());
        let mut targets: Vec<Vec<f64>> = vec![Vec::with_capacity(xs.len() * es.len()); n_branches];
        for &e in &es {
            for &x in &xs {
                let tracked = branch_frequencies(model, x, e, n_coupled, n_free)?;
                let fe_sorted = {
                    let mut f = tracked.clone();
                    f.sort_by(f64::total_cmp);
                    f
                };
                let direct = model.modal_analysis(x, e, n_modes)?;
                for (a, b) in fe_sorted.iter().zip(&direct.eigenfrequencies) {
                    if (a - b).abs() > 1e-9 * b {
                        return Err(Error::Fit(format!(
                            "mode families miss a low mode at x = {x}, E = {e:.4e}; increase extra_branches"
                        )));
                    }
                }
                rows.push((x, e));
                for (b, &f) in tracked.iter().enumerate() {
                    targets[b].push(f);
                }
            }
        }

        let p = surrogate.exponents.len();
        let mut design = DMatrix::zeros(rows.len(), p);
        let mut feats = vec![0.0; p];
        for (r, &(x, e)) in rows.iter().enumerate() {
            surrogate.features(x, e, &mut feats);
            for (c, v) in feats.iter().enumerate() {
                design[(r, c)] = *v;
            }
        }
        // Uncoupled branches do not depend on x: fit them on the E-only monomials.
        let e_only: Vec<usize> = (0..p).filter(|&c| surrogate.exponents[c].0 == 0).collect();
        let full: Vec<usize> = (0..p).collect();
        for (b, t) in targets.iter().enumerate() {
            let columns = if b < n_coupled { &full } else { &e_only };
            let sub = design.select_columns(columns.iter());
            let mut gram = sub.transpose() * &sub;
            for i in 0..columns.len() {
                gram[(i, i)] += settings.ridge * rows.len() as f64;
            }
            let chol = Cholesky::new(gram).ok_or_else(|| Error::Fit("ill-conditioned normal equations".into()))?;
            let scale = t.iter().sum::<f64>() / t.len() as f64;
            surrogate.scales[b] = scale;
            let y = DVector::from_iterator(t.len(), t.iter().map(|v| v / scale));
            let sol = chol.solve(&(sub.transpose() * y));
            if sol.iter().any(|c| !c.is_finite()) {
                return Err(Error::Fit("non-finite regression coefficients".into()));
            }
            let mut coef = vec![0.0; p];
            for (k, &c) in columns.iter().enumerate() {
                coef[c] = sol[k];
            }
            surrogate.coefficients.push(coef);
        }
        Ok(surrogate)
    }

    /// Fits on the default grids of `settings`.
    pub fn fit_default(model: &AssembledModel, settings: &SurrogateSettings) -> Result<Self> {
        let (xs, es) = settings.grids(model.config().nominal_youngs_modulus);
        Self::fit(model, &xs, &es, model.config().n_modes, settings)
    }

    pub fn n_branches(&self) -> usize {
        self.coefficients.len()
    }

    fn scaled_coords(&self, x: f64, e: f64) -> (f64, f64) {
        let t0 = self.x_feature.apply(self.x_min);
        let t1 = self.x_feature.apply(self.x_max);
        let s = 2.0 * (self.x_feature.apply(x) - t0) / (t1 - t0) - 1.0;
        let (l0, l1) = (self.e_min.ln(), self.e_max.ln());
        let v = 2.0 * (e.ln() - l0) / (l1 - l0) - 1.0;
        (s, v)
    }

    fn features(&self, x: f64, e: f64, out: &mut [f64]) {
        let (s, v) = self.scaled_coords(x, e);
        let mut sp = [1.0; 9];
        let mut vp = [1.0; 9];
        for k in 1..=self.degree.min(8) {
            sp[k] = sp[k - 1] * s;
            vp[k] = vp[k - 1] * v;
        }
        for (o, &(i, j)) in out.iter_mut().zip(&self.exponents) {
            *o = sp[i] * vp[j];
        }
    }

    pub fn in_domain(&self, x: f64, e: f64) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.e_min..=self.e_max).contains(&e)
    }

    /// Lowest `n` eigenfrequencies (Hz), ascending; inputs clamped to the fit domain.
    fn frequencies_into(&self, x: f64, e: f64, out: &mut [f64]) -> bool {
        let xc = x.clamp(self.x_min, self.x_max);
        let ec = e.clamp(self.e_min, self.e_max);
        let clamped = xc != x || ec != e;
        let mut feats = [0.0; 45];
        let p = self.exponents.len();
        self.features(xc, ec, &mut feats[..p]);
        let mut all = [f64::INFINITY; 16];
        let nb = self.n_branches().min(16);
        for b in 0..nb {
            let c = &self.coefficients[b];
            let mut acc = 0.0;
            for k in 0..p {
                acc += c[k] * feats[k];
            }
            all[b] = acc * self.scales[b];
        }
        all[..nb].sort_unstable_by(f64::total_cmp);
        out.copy_from_slice(&all[..out.len()]);
        clamped
    }

    pub fn predict_modal(&self, x: f64, youngs_modulus: f64) -> SurrogatePrediction {
        let mut f = vec![0.0; self.n_modes];
        let out_of_domain = self.frequencies_into(x, youngs_modulus, &mut f);
        SurrogatePrediction { modal: ModalResult::from_frequencies(f), out_of_domain }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        if s.coefficients.iter().any(|c| c.len() != s.exponents.len()) || s.scales.len() != s.coefficients.len() {
            return Err(Error::Config("surrogate document has inconsistent coefficient shapes".into()));
        }
        if s.degree > MAX_DEGREE || s.exponents != monomial_exponents(s.degree) || s.coefficients.len() > 16 || s.coefficients.len() < s.n_modes {
            return Err(Error::Config("surrogate document exceeds supported size".into()));
        }
        Ok(s)
    }
}

impl ModalPredictor for ModalSurrogate {
    fn n_modes(&self) -> usize {
        self.n_modes
    }

    fn eigenvalues_into(&self, x: f64, youngs_modulus: f64, out: &mut [f64]) -> Result<()> {
        if out.len() > self.n_branches() {
            return Err(Error::Domain(format!("surrogate tracks only {} modes", self.n_branches())));
        }
        self.frequencies_into(x, youngs_modulus, out);
        let w = 2.0 * std::f64::consts::PI;
        for v in out.iter_mut() {
            *v = (w * *v).powi(2);
        }
        Ok(())
    }
}

/// Largest relative eigenfrequency error of `surrogate` against the FE model on a grid.
pub fn max_relative_error(
    surrogate: &ModalSurrogate,
    model: &AssembledModel,
    x_grid: &[f64],
    e_grid: &[f64],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &x in x_grid {
        for &e in e_grid {
            let fe = model.modal_analysis(x, e, surrogate.n_modes)?;
            let pr = surrogate.predict_modal(x, e);
            for (a, b) in pr.modal.eigenfrequencies.iter().zip(&fe.eigenfrequencies) {
                worst = worst.max((a - b).abs() / b);
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::model::BridgeModel;

    fn small_settings() -> SurrogateSettings {
        SurrogateSettings { degree: 4, n_x: 13, n_e: 6, ..Default::default() }
    }

    #[test]
    fn exponents_cover_total_degree() {
        assert_eq!(monomial_exponents(4).len(), 15);
        assert!(monomial_exponents(4).iter().all(|&(i, j)| i + j <= 4));
    }

    #[test]
    fn degenerate_grid_is_rejected() {
        let m = AssembledModel::new(BridgeModel::default()).unwrap();
        let err = ModalSurrogate::fit(&m, &[0.0, 1.0], &[2.9e10, 3.0e10], 5, &SurrogateSettings::default());
        assert!(matches!(err, Err(Error::Fit(_))));
    }

    #[test]
    fn json_round_trip_preserves_predictions() {
        let m = AssembledModel::new(BridgeModel::default()).unwrap();
        let s = ModalSurrogate::fit_default(&m, &small_settings()).unwrap();
        let back = ModalSurrogate::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn clamps_outside_domain() {
        let m = AssembledModel::new(BridgeModel::default()).unwrap();
        let s = ModalSurrogate::fit_default(&m, &small_settings()).unwrap();
        let inside = s.predict_modal(s.x_max, s.e_max);
        let outside = s.predict_modal(s.x_max * 3.0, s.e_max * 2.0);
        assert!(!inside.out_of_domain);
        assert!(outside.out_of_domain);
        assert_eq!(inside.modal, outside.modal);
    }

    #[test]
    fn held_out_error_within_half_percent() {
        let m = AssembledModel::new(BridgeModel::default()).unwrap();
        let settings = SurrogateSettings::default();
        let s = ModalSurrogate::fit_default(&m, &settings).unwrap();
        let (hx, he) = settings.held_out_grids(m.config().nominal_youngs_modulus);
        let err = max_relative_error(&s, &m, &hx, &he).unwrap();
        assert!(err <= 5e-3, "held-out error {err}");
    }

    #[test]
    fn monotone_in_deterioration_on_dense_grid() {
        let m = AssembledModel::new(BridgeModel::default()).unwrap();
        let s = ModalSurrogate::fit_default(&m, &SurrogateSettings::default()).unwrap();
        for e in [s.e_min, m.config().nominal_youngs_modulus, s.e_max] {
            let mut prev = s.predict_modal(0.0, e).modal.eigenfrequencies;
            for i in 1..=600 {
                let cur = s.predict_modal(i as f64 * 0.05, e).modal.eigenfrequencies;
                for (p, c) in prev.iter().zip(&cur) {
                    assert!(*c <= p * (1.0 + 1e-12), "E = {e:e}, x = {}: {c} > {p}", i as f64 * 0.05);
                }
                prev = cur;
            }
        }
    }

    #[test]
    fn eigenvalues_match_frequencies() {
        let m = AssembledModel::new(BridgeModel::default()).unwrap();
        let s = ModalSurrogate::fit_default(&m, &small_settings()).unwrap();
        let lam = s.eigenvalues(2.0, 3.0e10).unwrap();
        let f = s.predict_modal(2.0, 3.0e10).modal.eigenfrequencies;
        for (l, f) in lam.iter().zip(&f) {
            assert!(((2.0 * std::f64::consts::PI * f).powi(2) - l).abs() < 1e-12 * l);
        }
    }
}
