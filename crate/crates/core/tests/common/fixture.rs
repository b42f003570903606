//! Shared benchmark bridge, capacity curve and surrogate for lifecycle tests.

use std::sync::OnceLock;

use voshm_core::deterioration::{DeteriorationParams, DeteriorationScenario, Shock};
use voshm_core::env::{EnvModelParams, TemperatureModel};
use voshm_core::filter::FilterSettings;
use voshm_core::lifecycle::{CostConstants, StudyContext};
use voshm_core::observation::ObservationSettings;
use voshm_core::reliability::DemandModel;
use voshm_core::structure::{default_capacity_curve, AssembledModel, BridgeModel, CapacityCurve, ModalSurrogate, SurrogateSettings};

pub struct Bench {
    pub model: AssembledModel,
    pub capacity: CapacityCurve,
    pub surrogate: ModalSurrogate,
}

pub fn bench() -> &'static Bench {
    static BENCH: OnceLock<Bench> = OnceLock::new();
    BENCH.get_or_init(|| {
        let model = AssembledModel::new(BridgeModel::default()).unwrap();
        let capacity = default_capacity_curve(&model).unwrap();
        let surrogate = ModalSurrogate::fit_default(&model, &SurrogateSettings::default()).unwrap();
        Bench { model, capacity, surrogate }
    })
}

pub fn context(n_particles: usize) -> StudyContext<'static> {
    let b = bench();
    StudyContext {
        predictor: &b.surrogate,
        capacity: &b.capacity,
        demand: DemandModel::default(),
        hazard_convention: Default::default(),
        nominal_youngs_modulus: b.model.config().nominal_youngs_modulus,
        env_truth: EnvModelParams::REFERENCE,
        env_estimate: EnvModelParams::REFERENCE,
        temperature: TemperatureModel::default(),
        deterioration: DeteriorationParams::default(),
        observation: ObservationSettings::default(),
        filter: FilterSettings { n_particles, ..Default::default() },
        costs: CostConstants::default(),
        max_degenerate_fraction: 0.05,
    }
}

pub fn scenario(a: f64, b: f64, shocks: &[(f64, f64)]) -> DeteriorationScenario {
    DeteriorationScenario {
        a,
        b,
        shocks: shocks.iter().map(|&(time, magnitude)| Shock { time, magnitude }).collect(),
        omegas: vec![0.0; 50],
        horizon: 50.0,
    }
}
