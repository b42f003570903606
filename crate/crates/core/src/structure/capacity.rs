//! Normalized load-bearing capacity as a function of deterioration.

use serde::{Deserialize, Serialize};

use super::model::AssembledModel;
use crate::error::{Error, Result};

/// Lowest capacity returned when extrapolating beyond the grid.
pub const MIN_CAPACITY: f64 = 1e-3;

/// Capacity `r(x)` tabulated on an ascending deterioration grid, `r(0) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityCurve {
    pub x_grid: Vec<f64>,
    pub r_values: Vec<f64>,
}

/// Default tabulation grid: steps of 0.25 up to x = 60.
pub fn default_capacity_grid() -> Vec<f64> {
    (0..=240).map(|i| i as f64 * 0.25).collect()
}

/// Ratio of the peak bending stress at the right midspan in the undamaged state to
/// the one at each grid point, from static analyses under a uniform load.
pub fn capacity_curve(model: &AssembledModel, x_grid: &[f64]) -> Result<CapacityCurve> {
    if x_grid.len() < 2 {
        return Err(Error::Domain("capacity grid needs at least two points".into()));
    }
    if x_grid[0] != 0.0 {
        return Err(Error::Domain("capacity grid must start at x = 0".into()));
    }
    if x_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("capacity grid must be strictly ascending".into()));
    }
    let e = model.config().nominal_youngs_modulus;
    let z = model.right_midspan();
    let stress = |x: f64| -> Result<f64> {
        let m = model.bending_moment_at(x, e, -1.0, z)?.abs();
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::Numerical(format!("degenerate midspan moment at x = {x}")));
        }
        Ok(m)
    };
    let reference = stress(0.0)?;
    let r_values = x_grid
        .iter()
        .map(|&x| stress(x).map(|s| reference / s))
        .collect::<Result<Vec<_>>>()?;
    let curve = CapacityCurve { x_grid: x_grid.to_vec(), r_values };
    curve.validate()?;
    Ok(curve)
}

impl CapacityCurve {
    pub fn validate(&self) -> Result<()> {
        if self.x_grid.len() != self.r_values.len() || self.x_grid.len() < 2 {
            return Err(Error::Config("capacity curve needs matching grids of length >= 2".into()));
        }
        if (self.r_values[0] - 1.0).abs() > 1e-12 {
            return Err(Error::Config("capacity curve must satisfy r(0) = 1".into()));
        }
        if self.r_values.windows(2).any(|w| !(w[1] < w[0])) || self.r_values.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::Config("capacity curve must be positive and strictly decreasing".into()));
        }
        Ok(())
    }

    /// Piecewise-linear interpolation, linearly extrapolated past the last knot
    /// and floored at [`MIN_CAPACITY`].
    pub fn evaluate(&self, x: f64) -> f64 {
        let xs = &self.x_grid;
        let rs = &self.r_values;
        if x <= xs[0] {
            return rs[0];
        }
        let n = xs.len();
        if x >= xs[n - 1] {
            let slope = (rs[n - 1] - rs[n - 2]) / (xs[n - 1] - xs[n - 2]);
            return (rs[n - 1] + slope * (x - xs[n - 1])).max(MIN_CAPACITY);
        }
        let i = xs.partition_point(|&g| g <= x) - 1;
        let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
        rs[i] + t * (rs[i + 1] - rs[i])
    }
}

/// Convenience: the default-grid curve for a model at its nominal modulus.
pub fn default_capacity_curve(model: &AssembledModel) -> Result<CapacityCurve> {
    capacity_curve(model, &default_capacity_grid())
}
