mod common;

use common::fixture::bench;
use proptest::prelude::*;
use voshm_core::reliability::{accumulated_failure, posterior_failure_estimate, DemandModel};
use voshm_core::structure::ModalPredictor;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn damage_lowers_every_eigenvalue(x1 in 0.0f64..25.0, dx in 0.01f64..5.0, ef in 0.7f64..1.9) {
        let b = bench();
        let e = ef * b.model.config().nominal_youngs_modulus;
        let n = b.model.config().n_modes;
        let l1 = b.model.modal_analysis(x1, e, n).unwrap().eigenvalues;
        let l2 = b.model.modal_analysis(x1 + dx, e, n).unwrap().eigenvalues;
        for (a, c) in l1.iter().zip(&l2) {
            prop_assert!(*c <= a * (1.0 + 1e-9), "{l1:?} {l2:?}");
        }
        prop_assert!(l1.windows(2).all(|w| 0.0 < w[0] && w[0] <= w[1]));
        let s1 = b.surrogate.eigenvalues(x1, e).unwrap();
        let s2 = b.surrogate.eigenvalues(x1 + dx, e).unwrap();
        for (a, c) in s1.iter().zip(&s2) {
            prop_assert!(*c <= *a);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn capacity_decreases_with_damage(x1 in 0.0f64..10.0, dx in 0.001f64..10.0) {
        let c = &bench().capacity;
        prop_assert_eq!(c.evaluate(0.0), 1.0);
        prop_assert!(c.evaluate(x1 + dx) < c.evaluate(x1));
        prop_assert!(c.evaluate(x1 + dx) > 0.0);
    }

    #[test]
    fn exceedance_decreases_in_capacity(r in 0.5f64..3.0, dr in 1e-3f64..1.0) {
        let d = DemandModel::default();
        let (p1, p2) = (d.exceedance(r), d.exceedance(r + dr));
        prop_assert!(p2 < p1 && p2 > 0.0 && p1 <= 1.0);
    }

    #[test]
    fn accumulated_failure_is_monotone(p in prop::collection::vec(0.0f64..0.2, 1..60)) {
        let acc = accumulated_failure(&p).unwrap();
        prop_assert_eq!(acc.len(), p.len());
        let mut last = 0.0;
        for v in &acc {
            prop_assert!(*v >= last && *v <= 1.0);
            last = *v;
        }
        let survival: f64 = p.iter().map(|q| 1.0 - q).product();
        prop_assert!((acc[acc.len() - 1] - (1.0 - survival)).abs() < 1e-12);
    }

    #[test]
    fn posterior_estimate_is_bracketed(raw in prop::collection::vec((0.0f64..1.0, 0.0f64..1e-2), 1..200)) {
        let total: f64 = raw.iter().map(|r| r.0).sum();
        prop_assume!(total > 0.0);
        let w: Vec<f64> = raw.iter().map(|r| r.0 / total).collect();
        let v: Vec<f64> = raw.iter().map(|r| r.1).collect();
        let est = posterior_failure_estimate(&w, &v);
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(0.0, f64::max);
        prop_assert!(est >= lo - 1e-15 && est <= hi + 1e-15);
    }
}
