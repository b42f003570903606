mod common;

use common::fixture::context;
use proptest::prelude::*;
use voshm_core::deterioration::sample_scenario;
use voshm_core::lifecycle::*;
use voshm_core::rng::{stream_rng, Stream};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ledger_is_consistent(seed in 0u64..10_000, case in 1u8..=4, shm in any::<bool>(), p_i in -6.0f64..-2.0, p_r in -6.0f64..-2.0) {
        let ctx = context(150);
        let case = CaseStudyConfig::preset(case).unwrap();
        let policy = PolicyHeuristics { p_th_i: 10f64.powf(p_i), p_th_r: 10f64.powf(p_r), dt_i: 5.0 }.with_case(&case);
        let mode = if shm { Mode::Shm } else { Mode::InspectionOnly };
        let sc = sample_scenario(&ctx.deterioration, &mut stream_rng(seed, 0, Stream::Scenario)).unwrap();
        let out = simulate_episode(&ctx, &sc, seed, 0, mode, &policy, &case, true).unwrap();
        let k = &out.costs;
        let r = k.rederive(&ctx.costs);
        for (a, b) in [k.inspection, k.repair, k.closedown, k.risk].iter().zip(r) {
            prop_assert!(*a >= 0.0);
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        }
        prop_assert!(out.trace.iter().all(|t| t.filter.ess >= 1.0 && t.pr_filtered >= 0.0 && t.pr_filtered <= 1.0));
        for a in k.actions.iter().filter(|a| a.kind == ActionKind::Repair) {
            let row = out.trace.iter().find(|t| t.filter.time == a.time).unwrap();
            prop_assert_eq!(row.x_true, 0.0);
            prop_assert!(row.hazard > policy.p_th_r);
        }
    }

    #[test]
    fn discount_is_decreasing(t in 0.0f64..100.0, dt in 0.0f64..10.0, r in 0.0f64..0.2) {
        prop_assert!(discount_factor(t + dt, r) <= discount_factor(t, r));
        prop_assert!(discount_factor(t, r) <= 1.0);
    }
}
