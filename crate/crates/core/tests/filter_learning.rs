use voshm_core::deterioration::{DeteriorationParams, DeteriorationScenario};
use voshm_core::filter::{FilterSettings, ParticleEnsemble, ShockKnowledge};
use voshm_core::observation::{inspection_log_likelihood, inspection_outcome};
use voshm_core::rng::{stream_rng, Stream};
use voshm_core::stats::standard_normal;

/// Posterior sd of A at years 10, 20, …, 50 for one replicate with yearly inspections.
fn sd_a_checkpoints(seed: u64, params: &DeteriorationParams) -> [f64; 5] {
    let settings = FilterSettings { n_particles: 1000, ..Default::default() };
    let mut truth_rng = stream_rng(seed, 0, Stream::Scenario);
    let sc = DeteriorationScenario {
        a: params.sample_a(&mut truth_rng),
        b: params.sample_b(&mut truth_rng),
        shocks: vec![],
        omegas: (0..50).map(|_| params.sample_omega(&mut truth_rng)).collect(),
        horizon: 50.0,
    };
    let truth = sc.path(&sc.epoch_grid(false));
    let mut rng = stream_rng(seed, 0, Stream::Filter);
    let mut noise = stream_rng(seed, 0, Stream::InspectionNoise);
    let mut pf = ParticleEnsemble::init(params, settings.n_particles, &mut rng).unwrap();
    let mut out = [0.0; 5];
    for k in 1..=50 {
        let t = k as f64;
        pf.predict(t, params, ShockKnowledge::Unobserved, &mut rng).unwrap();
        let z = inspection_outcome(truth[k - 1], standard_normal(&mut noise), 0.15, 0.01);
        pf.update(|_, x| inspection_log_likelihood(z, x, 0.15, 0.01)).unwrap();
        if pf.needs_resampling(&settings) {
            pf.gm_resample(&settings, &mut rng);
        }
        if k % 10 == 0 {
            out[k / 10 - 1] = pf.moments()[1].1;
        }
    }
    out
}

#[test]
fn parameter_uncertainty_shrinks_over_lifetime() {
    let params = DeteriorationParams { omega_sd: 0.01, shock_rate: 0.0, ..Default::default() };
    const REPLICATES: u64 = 20;
    let mut mean_sd = [0.0; 5];
    for s in 0..REPLICATES {
        for (m, v) in mean_sd.iter_mut().zip(sd_a_checkpoints(s, &params)) {
            *m += v / REPLICATES as f64;
        }
    }
    let prior_sd = params.a_prior().sd();
    assert!(mean_sd[0] < prior_sd, "{mean_sd:?} vs prior {prior_sd}");
    assert!(mean_sd.windows(2).all(|w| w[1] <= w[0]), "{mean_sd:?}");
    assert!(mean_sd[4] < 0.75 * prior_sd, "{mean_sd:?} vs prior {prior_sd}");
}
