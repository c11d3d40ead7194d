mod common;

use proptest::prelude::*;

use common::{dummy_wls, random_design};
use paneldid::engine::{demean_two_way, wls_fit};

fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!((a - b).abs() <= tol * b.abs().max(1.0), "{what}: {a} vs {b}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn demeaned_wls_matches_dummy_regression(
        seed in any::<u64>(),
        units in 3usize..=30,
        periods in 2usize..=12,
        k in 0usize..=3,
        unbalanced in any::<bool>(),
    ) {
        let d = random_design(seed, units, periods, k, unbalanced, true);
        // FWL needs a full-rank dummy design with residual degrees of freedom
        prop_assume!(d.n_rows() >= units + periods + k + 2);
        let fit = wls_fit(&d).unwrap();
        let oracle = dummy_wls(&d);
        prop_assert!(fit.dropped_collinear.is_empty());
        for (a, b) in fit.coefficients.iter().zip(&oracle.beta) {
            prop_assert!((a - b).abs() <= 1e-8, "{} vs {}", a, b);
        }
    }

    #[test]
    fn residuals_orthogonal_to_demeaned_regressors(seed in any::<u64>(), unbalanced in any::<bool>()) {
        let d = random_design(seed, 12, 6, 2, unbalanced, true);
        let fit = wls_fit(&d).unwrap();
        let dm = demean_two_way(&d).unwrap();
        for col in &dm.columns {
            let dot: f64 = (0..d.n_rows()).map(|i| d.weights[i] * col[i] * fit.residuals[i]).sum();
            let scale: f64 = col.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
            prop_assert!(dot.abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn weight_rescaling_and_outcome_shift_are_invisible(seed in any::<u64>(), c in 0.01f64..100.0, shift in -50.0f64..50.0) {
        let d = random_design(seed, 10, 5, 1, true, true);
        let base = wls_fit(&d).unwrap();
        let mut scaled = d.clone();
        scaled.weights.iter_mut().for_each(|w| *w *= c);
        let s = wls_fit(&scaled).unwrap();
        let mut shifted = d.clone();
        shifted.outcome.iter_mut().for_each(|y| *y += shift);
        let h = wls_fit(&shifted).unwrap();
        for j in 0..base.coefficients.len() {
            prop_assert!((base.coefficients[j] - s.coefficients[j]).abs() <= 1e-9);
            prop_assert!((base.coefficients[j] - h.coefficients[j]).abs() <= 1e-8);
            for l in 0..base.coefficients.len() {
                let v = base.vcov[(j, l)];
                prop_assert!((v - s.vcov[(j, l)]).abs() <= 1e-8 * v.abs().max(1e-6));
            }
        }
    }
}

#[test]
fn cr1_matches_direct_formula_on_twenty_fixtures() {
    for i in 0..20u64 {
        let nested = i % 2 == 0;
        let d = random_design(1000 + i, 20 + i as usize % 5, 4 + i as usize % 6, 2, i % 3 == 0, nested);
        let fit = wls_fit(&d).unwrap();
        let oracle = dummy_wls(&d);
        let k = fit.coefficients.len();
        for a in 0..k {
            for b in 0..k {
                assert_close(fit.vcov[(a, b)], oracle.vcov[(a, b)], 1e-10, &format!("fixture {i} vcov[{a},{b}]"));
            }
        }
    }
}

#[test]
fn vcov_is_symmetric_psd() {
    for seed in 0..10 {
        let fit = wls_fit(&random_design(seed, 15, 8, 3, true, seed % 2 == 0)).unwrap();
        let v = &fit.vcov;
        assert!((v - v.transpose()).amax() <= 1e-14);
        let eig = v.clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&e| e >= -1e-10));
    }
}

#[test]
fn singleton_clusters_give_hc1() {
    // one row per cluster: CR1 collapses to HC1 with the same K
    let mut d = random_design(5, 12, 6, 1, false, true);
    d.cluster = (0..d.n_rows()).collect();
    d.n_clusters = d.n_rows();
    let fit = wls_fit(&d).unwrap();
    let oracle = dummy_wls(&d);
    assert_close(fit.vcov[(0, 0)], oracle.vcov[(0, 0)], 1e-10, "hc1");
}

#[test]
fn duplicated_clusters_leave_coefficients_unchanged() {
    let d = random_design(9, 10, 5, 2, false, true);
    let mut twice = d.clone();
    twice.outcome.extend_from_slice(&d.outcome);
    twice.weights.extend_from_slice(&d.weights);
    twice.unit.extend_from_slice(&d.unit);
    twice.period.extend_from_slice(&d.period);
    twice.cluster.extend_from_slice(&d.cluster);
    for (c, col) in twice.columns.iter_mut().zip(&d.columns) {
        c.extend_from_slice(col);
    }
    let a = wls_fit(&d).unwrap();
    let b = wls_fit(&twice).unwrap();
    for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
        assert!((x - y).abs() <= 1e-9);
    }
}
