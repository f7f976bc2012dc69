mod common;

use proptest::prelude::*;
use resi::power::{n_grid, power_curve, power_from, solve_alpha, solve_effect_size, solve_sample_size};
use resi::{PowerSpec, Unknown};

fn mc_power(n: usize, s: f64, df: usize, seed: u64) -> f64 {
    let crit = resi::distributions::noncentral_chisq_quantile(
        0.95,
        resi::ChiSqParams::central(df as f64).unwrap(),
    )
    .unwrap();
    let (below, _) = common::ncx2_cdf_mc(crit, df as f64, n as f64 * s * s, 1_000_000, seed);
    1.0 - below
}

#[test]
fn monte_carlo_oracle() {
    let p = power_from(1000, 0.1, 1, 0.05).unwrap();
    assert!((p - mc_power(1000, 0.1, 1, 31)).abs() < 0.003);
    let (p1, p6) = (power_from(100, 0.25, 1, 0.05).unwrap(), power_from(100, 0.25, 6, 0.05).unwrap());
    assert!(p6 < p1);
    assert!((p1 - mc_power(100, 0.25, 1, 32)).abs() < 0.003);
    assert!((p6 - mc_power(100, 0.25, 6, 33)).abs() < 0.003);
}

#[test]
fn sample_size_is_minimal() {
    let n = solve_sample_size(0.8, 0.25, 1, 0.05).unwrap();
    assert_eq!(n, 126);
    for &(p, s, df) in &[(0.8, 0.1, 1), (0.9, 0.4, 3), (0.5, 0.6, 5), (0.95, 0.05, 2)] {
        let n = solve_sample_size(p, s, df, 0.05).unwrap();
        assert!(power_from(n, s, df, 0.05).unwrap() >= p);
        assert!(n == 1 || power_from(n - 1, s, df, 0.05).unwrap() < p);
    }
    assert!(solve_sample_size(0.8, 0.0, 1, 0.05).is_err());
}

#[test]
fn doubling_s_quarters_n() {
    let a = solve_sample_size(0.8, 0.1, 1, 0.05).unwrap() as f64;
    let b = solve_sample_size(0.8, 0.2, 1, 0.05).unwrap() as f64;
    assert!((a / b - 4.0).abs() < 0.05, "{a} / {b}");
}

#[test]
fn curve_table_has_no_model_column() {
    let rows = power_curve(&[0.0f64, 0.25], &[1, 4], 0.05, &n_grid(20, 200, 45).unwrap()).unwrap();
    let json = serde_json::to_value(&rows[0]).unwrap();
    let mut keys: Vec<&str> = json.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    keys.sort();
    assert_eq!(keys, ["alpha", "df", "n", "power", "s"]);
    for r in rows {
        if r.s == 0.0 {
            assert!((r.power - 0.05).abs() < 1e-10);
        }
    }
}

#[test]
fn spec_solves_each_unknown() {
    let base = PowerSpec { n: Some(126), s: Some(0.25f64), df: 1, alpha: Some(0.05), power: None };
    let p = base.solve().unwrap().power.unwrap();
    let n = PowerSpec { n: None, power: Some(p), ..base }.solve().unwrap().n.unwrap();
    assert_eq!(n, 126);
    let s = PowerSpec { s: None, power: Some(p), ..base }.solve().unwrap().s.unwrap();
    assert!((s - 0.25).abs() < 1e-6);
    let spec = PowerSpec { alpha: None, power: Some(p), ..base };
    assert_eq!(spec.unknown().unwrap(), Unknown::Alpha);
    assert!((spec.solve().unwrap().alpha.unwrap() - 0.05).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn monotone(n in 2usize..2000, s in 0.01f64..0.8, df in 1usize..8, alpha in 0.005f64..0.2) {
        let p = power_from(n, s, df, alpha).unwrap();
        prop_assert!(power_from(n + 1, s, df, alpha).unwrap() >= p);
        prop_assert!(power_from(n, s * 1.05, df, alpha).unwrap() >= p);
        prop_assert!(power_from(n, s, df, alpha * 1.1).unwrap() >= p);
        prop_assert!(power_from(n, s, df + 1, alpha).unwrap() <= p);
    }

    #[test]
    fn solvers_invert_power(n in 5usize..3000, p in 0.1f64..0.97, df in 1usize..6) {
        let s = solve_effect_size(p, n, df, 0.05).unwrap();
        prop_assert!((power_from(n, s, df, 0.05).unwrap() - p).abs() < 1e-6);
        let a = solve_alpha(p, n, s, df).unwrap();
        prop_assert!((a - 0.05).abs() < 1e-6);
    }
}
