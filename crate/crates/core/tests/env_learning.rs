mod common;

use common::fixture::bench;
use voshm_core::env::{
    env_log_likelihood, learn_env_posterior, synthesize_undamaged_dataset, EnvModelParams, EnvPrior,
    TemperatureModel, TmcmcSettings,
};
use voshm_core::rng::{stream_rng, Stream};
use voshm_core::structure::ModalPredictor;

#[test]
fn likelihood_is_sum_of_record_densities() {
    let b = bench();
    let e0 = b.model.config().nominal_youngs_modulus;
    let mut rng = stream_rng(3, 0, Stream::EnvData);
    let data = synthesize_undamaged_dataset(
        &EnvModelParams::REFERENCE,
        &b.surrogate,
        e0,
        &TemperatureModel::default(),
        30,
        0.02,
        &mut rng,
    )
    .unwrap();
    assert!(data.spans_freezing());
    let prior = EnvPrior::default();
    for i in 0..5 {
        let p = prior.sample(&mut stream_rng(3, i, Stream::EnvTruth));
        let mut brute = 0.0;
        for r in &data.records {
            let pred = b.surrogate.eigenvalues(0.0, p.theta(r.temperature) * e0).unwrap();
            for (o, l) in r.eigenvalues.iter().zip(&pred) {
                let sd = 0.02 * o;
                brute += -0.5 * ((o - l) / sd).powi(2) - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
            }
        }
        let l = env_log_likelihood(&data, &p, &b.surrogate, e0, 0.02);
        assert!((l - brute).abs() <= 1e-9 * brute.abs(), "{l} vs {brute}");
    }
}

#[test]
fn posterior_contracts_on_informative_data() {
    let b = bench();
    let e0 = b.model.config().nominal_youngs_modulus;
    let prior = EnvPrior::default();
    let settings = TmcmcSettings { n_samples: 500, ..Default::default() };
    for i in 0..3 {
        let truth = prior.sample(&mut stream_rng(5, i, Stream::EnvTruth));
        let data = synthesize_undamaged_dataset(
            &truth,
            &b.surrogate,
            e0,
            &TemperatureModel::default(),
            50,
            0.02,
            &mut stream_rng(5, i, Stream::EnvData),
        )
        .unwrap();
        let post =
            learn_env_posterior(&data, &prior, &b.surrogate, e0, 0.02, &settings, &mut stream_rng(5, i, Stream::EnvSampler))
                .unwrap();
        assert!(post.sd_ratios(&prior).iter().all(|r| *r < 1.0), "{:?}", post.sd_ratios(&prior));
        assert!((post.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(post.samples.len() >= 500);
        let t = truth.to_array();
        let m = post.mean.to_array();
        assert!((m[1] - t[1]).abs() < 4.0 * post.sd[1], "intercept {} vs {}", m[1], t[1]);
    }
}
