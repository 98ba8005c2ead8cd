mod common;

use attnflow::scaling::{
    dominance_share, fit_power_law, ks_statistic, FitOptions, LogBase,
};
use common::*;
use proptest::prelude::*;

fn positive(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..6.0, n).prop_map(|v| v.into_iter().map(|e| 10f64.powf(e)).collect())
}

/// Traffic and noisy impact over at least 3 nodes with distinct traffic.
fn table() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3usize..=60)
        .prop_flat_map(|n| (positive(n..=n), positive(n..=n)))
        .prop_filter("traffic spread", |(a, _)| spread(a) > 0.1)
}

fn spread(a: &[f64]) -> f64 {
    let lo = a.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().copied().fold(0.0, f64::max);
    (hi / lo).ln()
}

proptest! {
    #![proptest_config(config(0x7363_616c))]

    #[test]
    fn statistics_stay_in_range((a, c) in table()) {
        let f = fit_power_law(&a, &c, &FitOptions::default()).unwrap();
        prop_assert!((0.0..=1.0).contains(&f.r2));
        prop_assert!((0.0..=1.0).contains(&f.d));
        prop_assert!((-1.0..=1.0).contains(&f.rho));
        prop_assert!(f.n_used >= 3);
    }

    #[test]
    fn slope_is_scale_invariant((a, c) in table(), sa in -3.0f64..3.0, sc in -3.0f64..3.0) {
        let (ka, kc) = (10f64.powf(sa), 10f64.powf(sc));
        let opts = FitOptions::default();
        let f = fit_power_law(&a, &c, &opts).unwrap();
        let a2: Vec<f64> = a.iter().map(|x| x * ka).collect();
        let c2: Vec<f64> = c.iter().map(|x| x * kc).collect();
        let g = fit_power_law(&a2, &c2, &opts).unwrap();
        prop_assert!((f.gamma - g.gamma).abs() <= 1e-9);
        prop_assert!((f.r2 - g.r2).abs() <= 1e-9);
        prop_assert!((f.rho - g.rho).abs() <= 1e-9);
        let shift = kc.ln() - f.gamma * ka.ln();
        prop_assert!((g.intercept - f.intercept - shift).abs() <= 1e-8);
    }

    #[test]
    fn log_base_does_not_matter((a, c) in table()) {
        let natural = fit_power_law(&a, &c, &FitOptions::default()).unwrap();
        let ten = fit_power_law(&a, &c, &FitOptions { log_base: LogBase::Ten, ..FitOptions::default() }).unwrap();
        prop_assert!((natural.gamma - ten.gamma).abs() <= 1e-12);
        prop_assert!((natural.r2 - ten.r2).abs() <= 1e-12);
        prop_assert!((natural.rho - ten.rho).abs() <= 1e-12);
        prop_assert!((natural.d - ten.d).abs() <= 1e-12);
    }

    #[test]
    fn ks_is_symmetric_and_bounded(
        a in prop::collection::vec(0u8..20, 1..40),
        b in prop::collection::vec(0u8..20, 1..40),
    ) {
        // Small integers force plenty of ties.
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let ab = ks_statistic(&a, &b).unwrap();
        prop_assert_eq!(ab, ks_statistic(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn exact_law_is_recovered(
        a in positive(3..=200).prop_filter("spread", |a| spread(a) > 1.0),
        g in 0.3f64..=1.2,
        c in 0.01f64..100.0,
    ) {
        let imp: Vec<f64> = a.iter().map(|x| c * x.powf(g)).collect();
        let f = fit_power_law(&a, &imp, &FitOptions::default()).unwrap();
        prop_assert!((f.gamma - g).abs() <= 1e-10, "gamma {} vs {}", f.gamma, g);
        prop_assert!((f.r2 - 1.0).abs() <= 1e-12);
        prop_assert!(f.d <= 1e-12);
    }

    #[test]
    fn dominance_ignores_traffic_units(a in positive(1..=50), g in 0.1f64..2.0, k in -4.0f64..4.0) {
        let scaled: Vec<f64> = a.iter().map(|x| x * 10f64.powf(k)).collect();
        let s = dominance_share(&a, g).unwrap();
        prop_assert!(close(s, dominance_share(&scaled, g).unwrap(), 1e-12));
        prop_assert!(s > 0.0 && s <= 1.0);
    }
}
