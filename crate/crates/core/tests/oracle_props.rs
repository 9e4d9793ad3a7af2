use proptest::prelude::*;

use dcsma::graph::ConflictGraph;
use dcsma::oracle::{
    build_chain, gentler_start_lag, proposition1_bounds, spectral_correlation, stationary_distribution, variance_vt,
};
use dcsma::scheduler::AccessParams;

fn instance() -> impl Strategy<Value = (ConflictGraph, Vec<f64>, Vec<f64>)> {
    (2usize..=6, 0.0f64..0.8, any::<u64>()).prop_flat_map(|(n, p, seed)| {
        (
            Just(ConflictGraph::random(n, p, seed)),
            proptest::collection::vec(0.05f64..0.5, n),
            proptest::collection::vec(0.2f64..5.0, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn product_form_and_psi1((g, a, lambda) in instance(), lazy in any::<bool>()) {
        let access = AccessParams::new(a).unwrap();
        let chain = build_chain(&g, &access, &lambda, lazy).unwrap();
        prop_assert!(chain.max_row_sum_error() < 1e-12);
        let st = stationary_distribution(&chain).unwrap();
        prop_assert!(st.product_form_residual < 1e-10);
        prop_assert!(chain.detailed_balance_residual().unwrap() < 1e-12);
        for v in 0..g.n_links() {
            let (spec, gap) = spectral_correlation(&chain, v, 10).unwrap();
            prop_assert!(gap < 1e-10, "gap {gap:e}");
            let b = proposition1_bounds(&g, v, &access, &lambda, 5).unwrap();
            let psi1 = if lazy { 0.5 + 0.5 * b.psi1 } else { b.psi1 };
            prop_assert!((spec.psi[1] - psi1).abs() < 1e-10);
            prop_assert!((spec.mean - b.pi_b).abs() < 1e-10);
        }
    }

    #[test]
    fn lazy_variance_never_grows_with_order((g, a, lambda) in instance(), t in 1u64..300) {
        let chain = build_chain(&g, &AccessParams::new(a).unwrap(), &lambda, true).unwrap();
        let (base, _) = spectral_correlation(&chain, 0, 300).unwrap();
        let mut prev = f64::INFINITY;
        for order in 1..=6 {
            let v = variance_vt(&base, 0.2, t, order).unwrap();
            prop_assert!(v <= prev + 1e-9);
            prev = v;
        }
    }

    #[test]
    fn gentle_lag_is_symmetric(i in 0u64..200, j in 0u64..200, order in 1u64..20, spacing in 1u64..30) {
        prop_assert_eq!(gentler_start_lag(i, j, order, spacing), gentler_start_lag(j, i, order, spacing));
        if i % order == j % order {
            prop_assert_eq!(gentler_start_lag(i, j, order, spacing) * order, i.abs_diff(j));
        }
    }
}
