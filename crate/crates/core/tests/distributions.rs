mod common;

use proptest::prelude::*;
use resi::distributions::{
    chisq_cdf, chisq_test_power, noncentral_chisq_cdf, noncentral_chisq_quantile, solve_noncentrality,
};
use resi::ChiSqParams;

fn cdf(x: f64, df: f64, lam: f64) -> f64 {
    noncentral_chisq_cdf(x, ChiSqParams::new(df, lam).unwrap()).unwrap()
}

#[test]
fn matches_high_precision_grid() {
    for (x, df, lam, want) in common::read_ncx2_grid() {
        let got = cdf(x, df, lam);
        assert!((got - want).abs() < 1e-12, "x={x} df={df} lam={lam}: {got} vs {want}");
    }
}

#[test]
fn matches_naive_series_at_large_noncentrality() {
    for &(x, df, lam) in &[(250.0, 3.0, 220.0), (900.0, 10.0, 850.0), (80.0, 1.0, 95.0), (1.0, 40.0, 2.0)] {
        let (a, b) = (cdf(x, df, lam), common::ncx2_cdf_naive(x, df, lam));
        assert!((a - b).abs() < 1e-10, "x={x} df={df} lam={lam}: {a} vs {b}");
    }
}

#[test]
fn central_case_reference_values() {
    assert!((chisq_cdf(3.8415f64, 1.0).unwrap() - 0.950_001_227_928_777_7).abs() < 1e-13);
    let q: f64 = noncentral_chisq_quantile(0.95, ChiSqParams::central(1.0).unwrap()).unwrap();
    assert!((q - 3.841_458_820_694_124).abs() < 1e-10);
}

#[test]
fn power_reference_via_monte_carlo() {
    // 1e6 draws of χ²₁(10) above the central 0.95 quantile.
    let crit = noncentral_chisq_quantile(0.95, ChiSqParams::central(1.0).unwrap()).unwrap();
    let (below, _) = common::ncx2_cdf_mc(crit, 1.0, 10.0, 1_000_000, 7);
    let power = chisq_test_power(10.0, 1.0, 0.05).unwrap();
    assert!((power - (1.0 - below)).abs() < 0.003, "{power} vs {}", 1.0 - below);
}

#[test]
fn noncentrality_solver_brackets() {
    let l8: f64 = solve_noncentrality(0.8, 1.0, 0.05).unwrap();
    let l9: f64 = solve_noncentrality(0.9, 1.0, 0.05).unwrap();
    assert!((l8 - 7.848_860_509_326_198).abs() < 1e-7);
    assert!((l9 - 10.507_419_409_690_753).abs() < 1e-7);
    assert!(solve_noncentrality(0.05 + 1e-6, 1.0, 0.05).unwrap() < 1e-2);
    assert!(solve_noncentrality(0.05, 1.0, 0.05).is_err());
}

#[test]
fn rejects_bad_parameters() {
    assert!(ChiSqParams::new(0.0, 1.0).is_err());
    assert!(ChiSqParams::new(1.0, -1.0).is_err());
    assert!(ChiSqParams::new(f64::NAN, 1.0).is_err());
    let p = ChiSqParams::new(2.0, 1.0).unwrap();
    assert!(noncentral_chisq_cdf(-1.0, p).is_err());
    assert!(noncentral_chisq_quantile(1.0, p).is_err());
    assert!(noncentral_chisq_quantile(0.0, p).is_err());
}

#[test]
fn single_precision_tracks_double() {
    for &(x, df, lam) in &[(3.0f32, 1.0f32, 2.0f32), (10.0, 4.0, 6.0), (0.5, 2.0, 0.0)] {
        let a = noncentral_chisq_cdf(x, ChiSqParams::new(df, lam).unwrap()).unwrap();
        let b = cdf(x as f64, df as f64, lam as f64);
        assert!((a as f64 - b).abs() < 1e-5, "{a} vs {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn agrees_with_naive_series(x in 0.01f64..120.0, df in 0.3f64..20.0, lam in 0.0f64..80.0) {
        let (a, b) = (cdf(x, df, lam), common::ncx2_cdf_naive(x, df, lam));
        prop_assert!((a - b).abs() < 1e-11, "{} vs {}", a, b);
    }

    #[test]
    fn monotone_in_x_and_lambda(x in 0.0f64..60.0, dx in 0.0f64..10.0, df in 0.5f64..12.0, lam in 0.0f64..40.0, dl in 0.0f64..10.0) {
        let base = cdf(x, df, lam);
        prop_assert!(cdf(x + dx, df, lam) >= base - 1e-15);
        prop_assert!(cdf(x, df, lam + dl) <= base + 1e-15);
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn zero_noncentrality_is_central(x in 0.0f64..60.0, df in 0.2f64..30.0) {
        prop_assert!((cdf(x, df, 0.0) - chisq_cdf(x, df).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn quantile_round_trip(p in 0.001f64..0.999, df in 0.5f64..15.0, lam in 0.0f64..50.0) {
        let params = ChiSqParams::new(df, lam).unwrap();
        let q = noncentral_chisq_quantile(p, params).unwrap();
        prop_assert!((noncentral_chisq_cdf(q, params).unwrap() - p).abs() < 1e-8);
    }
}
