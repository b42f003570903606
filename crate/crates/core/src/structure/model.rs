//! Euler-Bernoulli finite-element model of a continuous beam on elastic supports.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nominal Young's modulus of the reinforced-concrete deck at 20 °C (Pa).
pub const NOMINAL_YOUNGS_MODULUS: f64 = 29.11e9;

/// Eigenvalues below this fraction of the largest one are treated as rigid-body modes.
const RIGID_BODY_TOL: f64 = 1e-10;

/// Geometry, material and support description of the bridge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BridgeModel {
    #[serde(rename = "spans_m")]
    pub span_lengths: Vec<f64>,
    #[serde(rename = "section_area_m2")]
    pub section_area: f64,
    #[serde(rename = "section_inertia_m4")]
    pub section_inertia: f64,
    #[serde(rename = "density_kgm3")]
    pub mass_density: f64,
    pub elements_per_span: usize,
    /// Vertical spring stiffness at each support, left to right (N/m).
    #[serde(rename = "Ky_Nm")]
    pub support_stiffness_vertical: Vec<f64>,
    /// Horizontal spring stiffness (N/m); kept for completeness, it does not enter
    /// the vertical bending problem.
    #[serde(rename = "Kx_Nm")]
    pub support_stiffness_horizontal: f64,
    #[serde(rename = "E0_Pa")]
    pub nominal_youngs_modulus: f64,
    pub n_modes: usize,
    pub sensor_nodes: Vec<usize>,
    /// Index of the support whose vertical stiffness degrades.
    pub damaged_support: usize,
}

impl Default for BridgeModel {
    fn default() -> Self {
        let elements_per_span = 20;
        Self {
            span_lengths: vec![25.0, 25.0],
            section_area: 0.4,
            section_inertia: 1.0 * 0.4f64.powi(3) / 12.0 * 4.0,
            mass_density: 2500.0,
            elements_per_span,
            support_stiffness_vertical: vec![1e7; 3],
            support_stiffness_horizontal: 1e8,
            nominal_youngs_modulus: NOMINAL_YOUNGS_MODULUS,
            n_modes: 5,
            sensor_nodes: default_sensor_nodes(elements_per_span, 2),
            damaged_support: 1,
        }
    }
}

/// Six sensors spread evenly inside each span.
pub fn default_sensor_nodes(elements_per_span: usize, n_spans: usize) -> Vec<usize> {
    let per_span = 6;
    let mut nodes = Vec::with_capacity(per_span * n_spans);
    for s in 0..n_spans {
        for i in 1..=per_span {
            let local = (i * elements_per_span + (per_span + 1) / 2) / (per_span + 1);
            nodes.push(s * elements_per_span + local.clamp(1, elements_per_span - 1));
        }
    }
    nodes
}

impl BridgeModel {
    pub fn n_nodes(&self) -> usize {
        self.elements_per_span * self.span_lengths.len() + 1
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.n_nodes()
    }

    pub fn support_nodes(&self) -> Vec<usize> {
        (0..=self.span_lengths.len()).map(|s| s * self.elements_per_span).collect()
    }

    pub fn flexural_rigidity(&self, youngs_modulus: f64) -> f64 {
        youngs_modulus * self.section_inertia
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.span_lengths.is_empty() {
            return bad("model.spans_m must list at least one span".into());
        }
        if self.span_lengths.iter().any(|&l| !(l > 0.0)) {
            return bad("model.spans_m must be strictly positive".into());
        }
        if !(self.section_area > 0.0) {
            return bad("model.section_area_m2 must be strictly positive".into());
        }
        if !(self.section_inertia > 0.0) {
            return bad("model.section_inertia_m4 must be strictly positive".into());
        }
        if !(self.mass_density > 0.0) {
            return bad("model.density_kgm3 must be strictly positive".into());
        }
        if !(self.nominal_youngs_modulus > 0.0) {
            return bad("model.E0_Pa must be strictly positive".into());
        }
        if self.elements_per_span < 4 {
            return bad("model.elements_per_span must be at least 4".into());
        }
        if self.support_stiffness_vertical.len() != self.span_lengths.len() + 1 {
            return bad(format!(
                "model.Ky_Nm needs {} entries (one per support)",
                self.span_lengths.len() + 1
            ));
        }
        if self.support_stiffness_vertical.iter().any(|&k| !(k > 0.0)) {
            return bad("model.Ky_Nm must be strictly positive".into());
        }
        if !(self.support_stiffness_horizontal > 0.0) {
            return bad("model.Kx_Nm must be strictly positive".into());
        }
        if !(3..=5).contains(&self.n_modes) {
            return bad("model.n_modes must lie in [3, 5]".into());
        }
        if self.damaged_support >= self.support_stiffness_vertical.len() {
            return bad("model.damaged_support is not a support index".into());
        }
        let supports = self.support_nodes();
        let last = self.n_nodes() - 1;
        for &n in &self.sensor_nodes {
            if n == 0 || n >= last || supports.contains(&n) {
                return bad(format!("model.sensor_nodes: node {n} is not an interior mesh node"));
            }
        }
        Ok(())
    }
}

/// Vertical stiffness of a support degraded by deterioration `x`.
pub fn damaged_support_stiffness(k_undamaged: f64, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("deterioration must be non-negative, got {x}")));
    }
    Ok(k_undamaged / (1.0 + x))
}

/// Modal eigenvalues `(2 pi f)^2` in ascending order and the matching frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalResult {
    pub eigenvalues: Vec<f64>,
    pub eigenfrequencies: Vec<f64>,
}

impl ModalResult {
    pub fn from_eigenvalues(eigenvalues: Vec<f64>) -> Self {
        let eigenfrequencies = eigenvalues
            .iter()
            .map(|l| l.max(0.0).sqrt() / (2.0 * std::f64::consts::PI))
            .collect();
        Self { eigenvalues, eigenfrequencies }
    }

    pub fn from_frequencies(eigenfrequencies: Vec<f64>) -> Self {
        let eigenvalues = eigenfrequencies
            .iter()
            .map(|f| (2.0 * std::f64::consts::PI * f).powi(2))
            .collect();
        Self { eigenvalues, eigenfrequencies }
    }
}

/// Anything that maps `(deterioration, effective Young's modulus)` to eigenvalues.
pub trait ModalPredictor: Send + Sync {
    /// Number of modes returned by [`ModalPredictor::eigenvalues`].
    fn n_modes(&self) -> usize;

    /// The lowest `n_modes` eigenvalues in ascending order, written to `out`.
    fn eigenvalues_into(&self, x: f64, youngs_modulus: f64, out: &mut [f64]) -> Result<()>;

    fn eigenvalues(&self, x: f64, youngs_modulus: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n_modes()];
        self.eigenvalues_into(x, youngs_modulus, &mut out)?;
        Ok(out)
    }
}

/// Element matrices per unit Young's modulus, assembled once.
#[derive(Debug, Clone)]
pub struct AssembledModel {
    config: BridgeModel,
    /// Global bending stiffness for E = 1.
    stiffness_unit: DMatrix<f64>,
    /// Consistent mass matrix.
    mass: DMatrix<f64>,
    /// Inverse Cholesky factor of the mass matrix.
    mass_chol_inv: DMatrix<f64>,
    /// `L^-1 K_unit L^-T`.
    reduced_stiffness_unit: DMatrix<f64>,
    /// Columns of `L^-1` at the supported vertical dofs.
    support_vectors: Vec<DVector<f64>>,
    support_dofs: Vec<usize>,
    element_lengths: Vec<f64>,
    /// Trace of the reduced beam stiffness for E = 1, an upper bound on its spectrum.
    beam_scale_unit: f64,
}

fn element_stiffness(len: f64) -> [[f64; 4]; 4] {
    let l2 = len * len;
    let c = 1.0 / (l2 * len);
    [
        [12.0 * c, 6.0 * len * c, -12.0 * c, 6.0 * len * c],
        [6.0 * len * c, 4.0 * l2 * c, -6.0 * len * c, 2.0 * l2 * c],
        [-12.0 * c, -6.0 * len * c, 12.0 * c, -6.0 * len * c],
        [6.0 * len * c, 2.0 * l2 * c, -6.0 * len * c, 4.0 * l2 * c],
    ]
}

fn element_mass(mass_per_length: f64, len: f64) -> [[f64; 4]; 4] {
    let l2 = len * len;
    let c = mass_per_length * len / 420.0;
    [
        [156.0 * c, 22.0 * len * c, 54.0 * c, -13.0 * len * c],
        [22.0 * len * c, 4.0 * l2 * c, 13.0 * len * c, -3.0 * l2 * c],
        [54.0 * c, 13.0 * len * c, 156.0 * c, -22.0 * len * c],
        [-13.0 * len * c, -3.0 * l2 * c, -22.0 * len * c, 4.0 * l2 * c],
    ]
}

/// Consistent nodal loads of a uniform line load `q` on one element.
fn element_load(q: f64, len: f64) -> [f64; 4] {
    [q * len / 2.0, q * len * len / 12.0, q * len / 2.0, -q * len * len / 12.0]
}

impl AssembledModel {
    pub fn new(config: BridgeModel) -> Result<Self> {
        config.validate()?;
        let n = config.n_dofs();
        let mut stiffness_unit = DMatrix::zeros(n, n);
        let mut mass = DMatrix::zeros(n, n);
        let mpl = config.mass_density * config.section_area;
        let mut element_lengths = Vec::new();
        for (s, &span) in config.span_lengths.iter().enumerate() {
            let len = span / config.elements_per_span as f64;
            let ke = element_stiffness(len);
            let me = element_mass(mpl, len);
            for e in 0..config.elements_per_span {
                let first = 2 * (s * config.elements_per_span + e);
                for i in 0..4 {
                    for j in 0..4 {
                        stiffness_unit[(first + i, first + j)] += config.section_inertia * ke[i][j];
                        mass[(first + i, first + j)] += me[i][j];
                    }
                }
                element_lengths.push(len);
            }
        }
        let chol = Cholesky::new(mass.clone()).ok_or_else(|| {
            Error::Config("mass matrix is not positive definite; check section area and density".into())
        })?;
        let l = chol.l();
        let mass_chol_inv = l
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .ok_or_else(|| Error::Numerical("singular mass Cholesky factor".into()))?;
        let reduced_stiffness_unit: DMatrix<f64> = &mass_chol_inv * &stiffness_unit * mass_chol_inv.transpose();
        let beam_scale_unit = reduced_stiffness_unit.trace();
        let support_dofs: Vec<usize> = config.support_nodes().iter().map(|&node| 2 * node).collect();
        let support_vectors = support_dofs.iter().map(|&d| mass_chol_inv.column(d).into_owned()).collect();
        Ok(Self {
            config,
            stiffness_unit,
            mass,
            mass_chol_inv,
            reduced_stiffness_unit,
            support_vectors,
            support_dofs,
            element_lengths,
            beam_scale_unit,
        })
    }

    pub fn config(&self) -> &BridgeModel {
        &self.config
    }

    pub fn mass_matrix(&self) -> &DMatrix<f64> {
        &self.mass
    }

    /// Global stiffness for Young's modulus `e` and the given support springs.
    pub fn stiffness_matrix(&self, youngs_modulus: f64, supports: &[f64]) -> DMatrix<f64> {
        let mut k = &self.stiffness_unit * youngs_modulus;
        for (&dof, &ks) in self.support_dofs.iter().zip(supports) {
            k[(dof, dof)] += ks;
        }
        k
    }

    /// Support stiffnesses with the damaged support reduced for deterioration `x`.
    pub fn supports_at(&self, x: f64) -> Result<Vec<f64>> {
        let mut k = self.config.support_stiffness_vertical.clone();
        let i = self.config.damaged_support;
        k[i] = damaged_support_stiffness(k[i], x)?;
        Ok(k)
    }

    fn reduced_stiffness(&self, youngs_modulus: f64, supports: &[f64]) -> DMatrix<f64> {
        let mut c = &self.reduced_stiffness_unit * youngs_modulus;
        for (g, &ks) in self.support_vectors.iter().zip(supports) {
            if ks != 0.0 {
                c.ger(ks, g, g, 1.0);
            }
        }
        c
    }

    /// Lowest `n_modes` eigenpairs for explicit support stiffnesses.
    ///
    /// The returned vectors are the mass-orthonormal mode shapes expressed in the
    /// Cholesky-reduced coordinates, so their Euclidean inner products are the
    /// mass-weighted ones.
    pub fn eigenpairs_with_supports(
        &self,
        youngs_modulus: f64,
        supports: &[f64],
        n_modes: usize,
    ) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
        if !(youngs_modulus > 0.0) {
            return Err(Error::Domain(format!("Young's modulus must be positive, got {youngs_modulus}")));
        }
        if supports.len() != self.support_dofs.len() || supports.iter().any(|&k| k < 0.0 || !k.is_finite()) {
            return Err(Error::Domain("support stiffnesses must be finite and non-negative".into()));
        }
        let c = self.reduced_stiffness(youngs_modulus, supports);
        let eig = SymmetricEigen::try_new(c, 1e-14, 10_000).ok_or_else(|| {
            Error::Numerical(format!(
                "symmetric eigensolver did not converge (E = {youngs_modulus:.4e}, supports = {supports:?})"
            ))
        })?;
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let smallest = eig.eigenvalues[order[0]];
        if smallest <= RIGID_BODY_TOL * self.beam_scale_unit * youngs_modulus {
            return Err(Error::Numerical(format!(
                "rigid-body mode detected (lowest eigenvalue {smallest:.3e}); supports = {supports:?}"
            )));
        }
        let n = n_modes.min(order.len());
        let values = order[..n].iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = order[..n].iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
        Ok((values, vectors))
    }

    pub fn eigenvalues_with_supports(&self, youngs_modulus: f64, supports: &[f64], n_modes: usize) -> Result<Vec<f64>> {
        Ok(self.eigenpairs_with_supports(youngs_modulus, supports, n_modes)?.0)
    }

    /// Column of `L^-1` at the vertical dof of the damaged support.
    pub fn damaged_support_vector(&self) -> &DVector<f64> {
        &self.support_vectors[self.config.damaged_support]
    }

    /// Mode shapes in physical coordinates (`phi = L^-T y`).
    pub fn physical_mode_shape(&self, reduced: &DVector<f64>) -> DVector<f64> {
        self.mass_chol_inv.transpose() * reduced
    }

    /// Modal analysis at deterioration `x` and effective Young's modulus `e`.
    pub fn modal_analysis(&self, x: f64, youngs_modulus: f64, n_modes: usize) -> Result<ModalResult> {
        if !(3..=5).contains(&n_modes) {
            return Err(Error::Domain(format!("n_modes must lie in [3, 5], got {n_modes}")));
        }
        let supports = self.supports_at(x)?;
        let values = self.eigenvalues_with_supports(youngs_modulus, &supports, n_modes)?;
        Ok(ModalResult::from_eigenvalues(values))
    }

    /// Static displacements under a uniform line load `q` (N/m, positive upwards).
    pub fn static_displacements(&self, x: f64, youngs_modulus: f64, q: f64) -> Result<DVector<f64>> {
        let supports = self.supports_at(x)?;
        let k = self.stiffness_matrix(youngs_modulus, &supports);
        let f = self.uniform_load_vector(q);
        let chol = Cholesky::new(k).ok_or_else(|| Error::Numerical("static stiffness matrix is singular".into()))?;
        Ok(chol.solve(&f))
    }

    fn uniform_load_vector(&self, q: f64) -> DVector<f64> {
        let mut f = DVector::zeros(self.config.n_dofs());
        for (e, &len) in self.element_lengths.iter().enumerate() {
            let fe = element_load(q, len);
            for i in 0..4 {
                f[2 * e + i] += fe[i];
            }
        }
        f
    }

    /// Bending moment (sagging positive) at abscissa `z` from the left end,
    /// under a uniform line load `q` applied at deterioration `x`.
    pub fn bending_moment_at(&self, x: f64, youngs_modulus: f64, q: f64, z: f64) -> Result<f64> {
        let u = self.static_displacements(x, youngs_modulus, q)?;
        let total: f64 = self.element_lengths.iter().sum();
        if !(0.0..=total).contains(&z) {
            return Err(Error::Domain(format!("abscissa {z} outside the beam [0, {total}]")));
        }
        let mut start = 0.0;
        for (e, &len) in self.element_lengths.iter().enumerate() {
            if z <= start + len + 1e-12 || e + 1 == self.element_lengths.len() {
                let ke = element_stiffness(len);
                let fe = element_load(q, len);
                let d = [u[2 * e], u[2 * e + 1], u[2 * e + 2], u[2 * e + 3]];
                let ei = self.flexural(youngs_modulus);
                let end = |row: usize| -> f64 { (0..4).map(|j| ei * ke[row][j] * d[j]).sum::<f64>() - fe[row] };
                let (shear_left, moment_left) = (end(0), end(1));
                let s = (z - start).clamp(0.0, len);
                return Ok(-moment_left + shear_left * s + q * s * s / 2.0);
            }
            start += len;
        }
        unreachable!("element search always returns")
    }

    fn flexural(&self, youngs_modulus: f64) -> f64 {
        self.config.flexural_rigidity(youngs_modulus)
    }

    /// Abscissa of the midpoint of the last span.
    pub fn right_midspan(&self) -> f64 {
        let spans = &self.config.span_lengths;
        let before: f64 = spans[..spans.len() - 1].iter().sum();
        before + spans[spans.len() - 1] / 2.0
    }
}

impl ModalPredictor for AssembledModel {
    fn n_modes(&self) -> usize {
        self.config.n_modes
    }

    fn eigenvalues_into(&self, x: f64, youngs_modulus: f64, out: &mut [f64]) -> Result<()> {
        let supports = self.supports_at(x)?;
        let values = self.eigenvalues_with_supports(youngs_modulus, &supports, out.len())?;
        out.copy_from_slice(&values);
        Ok(())
    }
}
