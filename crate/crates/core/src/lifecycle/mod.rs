//! Sequential inspection/repair decisions, discounted life-cycle costs and the
//! Monte Carlo value-of-information estimators built on them.

mod episode;
mod estimate;

use serde::{Deserialize, Serialize};

use crate::deterioration::DeteriorationParams;
use crate::env::{EnvModelParams, TemperatureModel};
use crate::error::{Error, Result};
use crate::filter::FilterSettings;
use crate::observation::ObservationSettings;
use crate::reliability::{DemandModel, HazardConvention};
use crate::structure::{CapacityCurve, ModalPredictor};

pub use episode::{simulate_episode, Action, ActionKind, CostBreakdown, EpisodeOutcome, EpisodeTraceRow};
pub use estimate::{
    expected_cost, log_grid, optimize_heuristics, paired_estimate, threshold_grid, voi_estimate, voshm_estimate, CostEstimate,
    EpisodeRecord, MeanSe,
    OptimizationResult, PairedEstimate, SurfacePoint,
};

/// `(1 + r)^(−t)`.
pub fn discount_factor(t_years: f64, r: f64) -> f64 {
    (1.0 + r).powf(-t_years)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostConstants {
    #[serde(rename = "c_F")]
    pub c_f: f64,
    #[serde(rename = "c_I")]
    pub c_i: f64,
    #[serde(rename = "c_R")]
    pub c_r: f64,
    pub r: f64,
    /// Close-down cost per day.
    pub c_clsdn: f64,
    pub delay_days: f64,
}

impl Default for CostConstants {
    fn default() -> Self {
        Self { c_f: 5e7, c_i: 2e4, c_r: 6e5, r: 0.02, c_clsdn: 1.5e5, delay_days: 7.0 }
    }
}

impl CostConstants {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("c_F", self.c_f),
            ("c_I", self.c_i),
            ("c_R", self.c_r),
            ("r", self.r),
            ("c_clsdn", self.c_clsdn),
            ("delay_days", self.delay_days),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("lifecycle.costs.{key} must be a finite value >= 0")));
            }
        }
        Ok(())
    }

    pub fn discount(&self, t: f64) -> f64 {
        discount_factor(t, self.r)
    }
}

/// Stationary heuristic policy `w = [p_th_I, Δt_I, p_th_R]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyHeuristics {
    #[serde(rename = "p_th_I")]
    pub p_th_i: f64,
    #[serde(rename = "p_th_R")]
    pub p_th_r: f64,
    /// Years between periodic inspections; infinite disables them.
    #[serde(rename = "dt_I")]
    pub dt_i: f64,
}

impl Default for PolicyHeuristics {
    fn default() -> Self {
        Self { p_th_i: 5e-4, p_th_r: 1e-3, dt_i: 5.0 }
    }
}

impl PolicyHeuristics {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_th_i > 0.0) || !(self.p_th_r > 0.0) {
            return Err(Error::Config("policy thresholds must be > 0".into()));
        }
        if !(self.dt_i >= 1.0) {
            return Err(Error::Config("dt_I must be >= 1 year or infinite".into()));
        }
        Ok(())
    }

    /// Whether the inspection threshold does not exceed the repair threshold.
    pub fn is_ordered(&self) -> bool {
        self.p_th_i <= self.p_th_r
    }

    pub fn without_periodic(self) -> Self {
        Self { dt_i: f64::INFINITY, ..self }
    }

    pub fn with_case(self, case: &CaseStudyConfig) -> Self {
        Self {
            p_th_i: case.imposed_inspection_threshold.unwrap_or(self.p_th_i),
            p_th_r: case.imposed_repair_threshold.unwrap_or(self.p_th_r),
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    InspectionOnly,
    #[serde(alias = "shm-plus-inspection")]
    Shm,
    /// Inspections are paid for but never observed; actions follow the prior hazard.
    Prior,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::InspectionOnly => "inspection-only",
            Mode::Shm => "shm",
            Mode::Prior => "prior",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inspection-only" | "inspection" => Ok(Mode::InspectionOnly),
            "shm" | "shm-plus-inspection" => Ok(Mode::Shm),
            "prior" => Ok(Mode::Prior),
            _ => Err(Error::Config(format!("unknown mode `{s}` (inspection-only, shm, prior)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShockObservability {
    Observed,
    Unobserved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaseStudyConfig {
    pub shock_observability: ShockObservability,
    pub closedown: bool,
    pub imposed_repair_threshold: Option<f64>,
    pub imposed_inspection_threshold: Option<f64>,
}

impl Default for CaseStudyConfig {
    fn default() -> Self {
        Self::preset(1).expect("case 1 exists")
    }
}

impl CaseStudyConfig {
    /// The four case studies: observed shocks, unobserved shocks, close-down, imposed thresholds.
    pub fn preset(case: u8) -> Result<Self> {
        let base = Self {
            shock_observability: ShockObservability::Observed,
            closedown: false,
            imposed_repair_threshold: None,
            imposed_inspection_threshold: None,
        };
        match case {
            1 => Ok(base),
            2 => Ok(Self { shock_observability: ShockObservability::Unobserved, ..base }),
            3 => Ok(Self { closedown: true, ..base }),
            4 => Ok(Self { imposed_repair_threshold: Some(1e-5), imposed_inspection_threshold: Some(7e-6), ..base }),
            _ => Err(Error::Config(format!("case must be 1, 2, 3 or 4, got {case}"))),
        }
    }

    pub fn shocks_observed(&self) -> bool {
        self.shock_observability == ShockObservability::Observed
    }

    pub fn validate(&self) -> Result<()> {
        if self.closedown && !self.shocks_observed() {
            return Err(Error::Config("close-down requires observed shocks".into()));
        }
        for v in [self.imposed_repair_threshold, self.imposed_inspection_threshold].into_iter().flatten() {
            if !(v > 0.0) {
                return Err(Error::Config("imposed thresholds must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Everything an episode needs besides the scenario, the policy and the case.
pub struct StudyContext<'a> {
    pub predictor: &'a dyn ModalPredictor,
    pub capacity: &'a CapacityCurve,
    pub demand: DemandModel,
    pub hazard_convention: HazardConvention,
    pub nominal_youngs_modulus: f64,
    /// Environmental model generating the synthetic monitoring data.
    pub env_truth: EnvModelParams,
    /// Monitoring-informed estimate used by the filter.
    pub env_estimate: EnvModelParams,
    pub temperature: TemperatureModel,
    pub deterioration: DeteriorationParams,
    pub observation: ObservationSettings,
    pub filter: FilterSettings,
    pub costs: CostConstants,
    /// Largest tolerated share of degenerate episodes.
    pub max_degenerate_fraction: f64,
}

impl StudyContext<'_> {
    pub fn validate(&self) -> Result<()> {
        self.demand.validate()?;
        self.env_truth.validate()?;
        self.env_estimate.validate()?;
        self.temperature.validate()?;
        self.deterioration.validate()?;
        self.observation.validate()?;
        self.filter.validate()?;
        self.costs.validate()?;
        if self.observation.modes_max > self.predictor.n_modes() {
            return Err(Error::Config("observation.modes_max exceeds the modes of the structural model".into()));
        }
        Ok(())
    }

    /// Failure probability of the interval `dt` at deterioration state `x`.
    pub fn interval_failure(&self, x: f64, dt: f64) -> f64 {
        self.demand.interval_exceedance(self.capacity.evaluate(x), dt)
    }
}
