use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use voshm_core::deterioration::DeteriorationParams;
use voshm_core::env::{EnvModelParams, EnvPrior, TemperatureModel, TmcmcSettings};
use voshm_core::filter::FilterSettings;
use voshm_core::lifecycle::{CaseStudyConfig, CostConstants, Mode, PolicyHeuristics, ShockObservability};
use voshm_core::observation::ObservationSettings;
use voshm_core::reliability::{DemandModel, HazardConvention};
use voshm_core::structure::{BridgeModel, SurrogateSettings};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelConfig,
    pub env: EnvConfig,
    pub deterioration: DeteriorationParams,
    pub observation: ObservationSettings,
    pub filter: FilterSettings,
    pub reliability: ReliabilityConfig,
    pub lifecycle: LifecycleConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            model: ModelConfig::default(),
            env: EnvConfig::default(),
            deterioration: DeteriorationParams::default(),
            observation: ObservationSettings::default(),
            filter: FilterSettings::default(),
            reliability: ReliabilityConfig::default(),
            lifecycle: LifecycleConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub bridge: BridgeModel,
    pub surrogate: SurrogateSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    /// Parameters generating the synthetic monitoring data.
    pub truth: EnvModelParams,
    pub prior: EnvPrior,
    pub temperature: TemperatureModel,
    /// Undamaged records used for learning.
    pub n_t: usize,
    pub tmcmc: TmcmcSettings,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            truth: EnvModelParams::REFERENCE,
            prior: EnvPrior::default(),
            temperature: TemperatureModel::default(),
            n_t: 50,
            tmcmc: TmcmcSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReliabilityConfig {
    pub gumbel_a: f64,
    pub gumbel_b: f64,
    pub hazard_convention: HazardConvention,
}

impl Default for ReliabilityConfig {
    fn default() -> Self {
        let d = DemandModel::default();
        Self { gumbel_a: d.scale, gumbel_b: d.location, hazard_convention: HazardConvention::Survival }
    }
}

impl ReliabilityConfig {
    pub fn demand(&self) -> DemandModel {
        DemandModel { scale: self.gumbel_a, location: self.gumbel_b }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LifecycleConfig {
    pub costs: CostConstants,
    pub policy: PolicyHeuristics,
    /// Policy of the SHM branch; the inspection policy without periodic inspections when absent.
    pub policy_shm: Option<PolicyHeuristics>,
    pub case: CaseConfig,
    pub mc: McConfig,
    pub optimize: OptimizeConfig,
}

impl Default for LifecycleConfig {
    fn default() -> Self {
        Self {
            costs: CostConstants::default(),
            policy: PolicyHeuristics::default(),
            policy_shm: None,
            case: CaseConfig::default(),
            mc: McConfig::default(),
            optimize: OptimizeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaseConfig {
    pub mode: Mode,
    pub shock_observability: ShockObservability,
    pub closedown: bool,
    pub imposed_repair_threshold: Option<f64>,
    pub imposed_inspection_threshold: Option<f64>,
}

impl Default for CaseConfig {
    fn default() -> Self {
        Self::from_study(Mode::InspectionOnly, &CaseStudyConfig::default())
    }
}

impl CaseConfig {
    pub fn from_study(mode: Mode, c: &CaseStudyConfig) -> Self {
        Self {
            mode,
            shock_observability: c.shock_observability,
            closedown: c.closedown,
            imposed_repair_threshold: c.imposed_repair_threshold,
            imposed_inspection_threshold: c.imposed_inspection_threshold,
        }
    }

    pub fn study(&self) -> CaseStudyConfig {
        CaseStudyConfig {
            shock_observability: self.shock_observability,
            closedown: self.closedown,
            imposed_repair_threshold: self.imposed_repair_threshold,
            imposed_inspection_threshold: self.imposed_inspection_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub n_mcs: usize,
    /// Particle count; overrides `filter.n_particles` when given.
    pub n_p: Option<usize>,
    /// Largest tolerated share of episodes with filter degeneracy.
    pub max_degenerate_fraction: f64,
    /// Scenario indices whose full traces are written.
    pub trace_episodes: Vec<u64>,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { n_mcs: 1000, n_p: None, max_degenerate_fraction: 0.05, trace_episodes: vec![] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeConfig {
    pub threshold_min: f64,
    pub threshold_max: f64,
    pub points_per_axis: usize,
    /// Extra `[p_th_I, p_th_R]` candidates appended to the grid.
    pub extra_candidates: Vec<[f64; 2]>,
    /// Periodic inspection interval; the policy value when absent.
    #[serde(rename = "dt_I")]
    pub dt_i: Option<f64>,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self { threshold_min: 1e-6, threshold_max: 1e-2, points_per_axis: 7, extra_candidates: vec![[5e-4, 1e-3]], dt_i: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Where fitted surrogates and learned environmental models are kept.
    pub artifacts: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), artifacts: PathBuf::from("artifacts") }
    }
}

impl RunConfig {
    /// Parses TOML, or JSON for `.json` files; an empty document yields the defaults.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let cfg = if is_json { Self::from_json(&text)? } else { Self::from_toml(&text)? };
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.resolved()
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        if text.trim().is_empty() {
            return Self::default().resolved();
        }
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.resolved()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies overrides that link sections and validates every block.
    pub fn resolved(mut self) -> Result<Self, CliError> {
        if let Some(n) = self.lifecycle.mc.n_p {
            self.filter.n_particles = n;
        }
        self.lifecycle.mc.n_p = Some(self.filter.n_particles);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let core = |r: voshm_core::error::Result<()>| r.map_err(|e| CliError::Config(e.to_string()));
        core(self.model.bridge.validate())?;
        core(self.env.truth.validate())?;
        core(self.env.prior.validate())?;
        core(self.env.temperature.validate())?;
        core(self.env.tmcmc.validate())?;
        core(self.deterioration.validate())?;
        core(self.observation.validate())?;
        core(self.filter.validate())?;
        core(self.reliability.demand().validate())?;
        core(self.lifecycle.costs.validate())?;
        core(self.lifecycle.policy.validate().map_err(prefix("lifecycle.policy")))?;
        if let Some(p) = &self.lifecycle.policy_shm {
            core(p.validate().map_err(prefix("lifecycle.policy_shm")))?;
        }
        core(self.lifecycle.case.study().validate())?;
        let mc = &self.lifecycle.mc;
        if !(0.0..=1.0).contains(&mc.max_degenerate_fraction) {
            return Err(CliError::Config("lifecycle.mc.max_degenerate_fraction must lie in [0, 1]".into()));
        }
        let o = &self.lifecycle.optimize;
        if !(o.threshold_min > 0.0 && o.threshold_max >= o.threshold_min) || o.points_per_axis == 0 {
            return Err(CliError::Config(
                "lifecycle.optimize: need 0 < threshold_min <= threshold_max and points_per_axis >= 1".into(),
            ));
        }
        if self.env.n_t < 2 {
            return Err(CliError::Config("env.n_t must be at least 2".into()));
        }
        Ok(())
    }

    pub fn shm_policy(&self) -> PolicyHeuristics {
        self.lifecycle.policy_shm.unwrap_or_else(|| self.lifecycle.policy.without_periodic())
    }
}

fn prefix(key: &'static str) -> impl Fn(voshm_core::error::Error) -> voshm_core::error::Error {
    move |e| voshm_core::error::Error::Config(format!("{key}: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c.lifecycle.costs.c_f, 5e7);
        assert_eq!(c.lifecycle.costs.c_i, 2e4);
        assert_eq!(c.lifecycle.costs.c_r, 6e5);
        assert_eq!(c.lifecycle.costs.r, 0.02);
        assert_eq!(c.lifecycle.mc.n_mcs, 1000);
        assert_eq!(c.reliability.gumbel_a, 0.0509);
        assert_eq!(c.deterioration.shock_rate, 0.04);
        assert_eq!(RunConfig::from_json("").unwrap(), c);
    }

    #[test]
    fn unknown_and_negative_keys_are_rejected() {
        let e = RunConfig::from_toml("[lifecycle.costs]\nc_X = 1.0\n").unwrap_err();
        assert!(e.to_string().contains("c_X"), "{e}");
        let e = RunConfig::from_toml("[lifecycle.costs]\nc_I = -1.0\n").unwrap_err();
        assert!(e.to_string().contains("c_I"), "{e}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn echo_round_trips() {
        let c = RunConfig::from_toml("seed = 3\n[lifecycle.mc]\nn_p = 300\n[lifecycle.policy]\np_th_I = 1e-4\np_th_R = 1e-3\ndt_I = inf\n")
            .unwrap();
        assert_eq!(c.filter.n_particles, 300);
        assert_eq!(c.lifecycle.policy.dt_i, f64::INFINITY);
        let again = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(again, c);
        let d = RunConfig::default().resolved().unwrap();
        assert_eq!(RunConfig::from_json(&serde_json::to_string(&d).unwrap()).unwrap(), d);
    }
}
