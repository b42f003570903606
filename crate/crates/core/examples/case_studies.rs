//! VoSHM of the four case studies on the benchmark bridge.
//!
//! `cargo run --release -p voshm-core --example case_studies -- [n_mcs] [n_particles]`

use voshm_core::deterioration::DeteriorationParams;
use voshm_core::env::{EnvModelParams, TemperatureModel};
use voshm_core::filter::FilterSettings;
use voshm_core::lifecycle::*;
use voshm_core::observation::ObservationSettings;
use voshm_core::reliability::DemandModel;
use voshm_core::structure::*;

fn main() -> voshm_core::error::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<usize>().expect("integer argument"));
    let n_mcs = args.next().unwrap_or(200);
    let n_particles = args.next().unwrap_or(500);

    let model = AssembledModel::new(BridgeModel::default())?;
    let capacity = default_capacity_curve(&model)?;
    let surrogate = ModalSurrogate::fit_default(&model, &SurrogateSettings::default())?;
    let ctx = StudyContext {
        predictor: &surrogate,
        capacity: &capacity,
        demand: DemandModel::default(),
        hazard_convention: Default::default(),
        nominal_youngs_modulus: model.config().nominal_youngs_modulus,
        env_truth: EnvModelParams::REFERENCE,
        env_estimate: EnvModelParams::REFERENCE,
        temperature: TemperatureModel::default(),
        deterioration: DeteriorationParams::default(),
        observation: ObservationSettings::default(),
        filter: FilterSettings { n_particles, ..Default::default() },
        costs: CostConstants::default(),
        max_degenerate_fraction: 0.05,
    };
    let w = PolicyHeuristics::default();
    for n in 1..=4 {
        let case = CaseStudyConfig::preset(n)?;
        let e = voshm_estimate(&ctx, &w, &w.without_periodic(), &case, n_mcs, 7)?;
        println!(
            "case {n}: VoSHM {:.3e} ± {:.1e}  inspection-only {:.3e}  shm {:.3e}",
            e.value.mean, e.value.std_error, e.baseline.total.mean, e.alternative.total.mean
        );
        for (name, c) in [("inspection-only", &e.baseline), ("shm", &e.alternative)] {
            println!(
                "    {name:>15}: C_I {:.3e}  C_R {:.3e}  C_clsdn {:.3e}  R_F {:.3e}",
                c.inspection.mean, c.repair.mean, c.closedown.mean, c.risk.mean
            );
        }
    }
    Ok(())
}
