//! Frozen reference values from independent implementations
//! (statsmodels Logit, scipy Welch test, sklearn roc_auc_score, mpmath, statrs).

use adhere::learners::auroc;
use adhere::stats::distributions::{beta_inc, gamma_p, normal_cdf, t_cdf, t_quantile};
use adhere::stats::{fit_logistic, welch_t_test, LogisticOptions};
use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, StudentsT};

mod common;
use common::{design, LOGISTIC_SETS};

const STATSMODELS: [(&[f64], &[f64]); 3] = [
    (
        &[0.22022631779816146, 1.4108486460335623],
        &[0.4464910388178684, 0.5513214293803992],
    ),
    (
        &[-3.065704332919141, 1.0268306642476026, 0.056000667184901945],
        &[1.8717681453504602, 0.7723778808668187, 0.03495937754298328],
    ),
    (
        &[-0.08406099640570235, 1.4608138587838035, -1.3029247158274098, -1.326683116011457],
        &[0.5537839921829685, 0.704786484878034, 0.7893001061738579, 0.8556618578875911],
    ),
];

#[test]
fn logistic_matches_statsmodels() {
    for (set, (coef, se)) in LOGISTIC_SETS.iter().zip(STATSMODELS) {
        let (x, y) = design(set);
        let fit = fit_logistic(&x, &y, &LogisticOptions::default()).unwrap();
        assert!(fit.converged);
        for j in 0..coef.len() {
            assert!((fit.coefficients[j] - coef[j]).abs() < 1e-7, "coef {j}: {} vs {}", fit.coefficients[j], coef[j]);
            assert!((fit.standard_error(j) - se[j]).abs() < 1e-6, "se {j}: {} vs {}", fit.standard_error(j), se[j]);
        }
    }
}

#[test]
fn welch_matches_scipy() {
    let a = [4.77, 5.79, 4.78, 4.1, 3.43, 8.74, 3.15, 4.74, 4.35, 5.07, 8.8, 2.46];
    let b = [8.16, 3.48, 6.3, 3.31, 3.22, 4.75, 5.63, 2.82, 3.33];
    let r = welch_t_test(&a, &b).unwrap();
    assert!((r.t_statistic - 0.5536872573380693).abs() < 1e-12);
    assert!((r.dof - 18.130766342962968).abs() < 1e-10);
    assert!((r.p_value - 0.586557107871139).abs() < 1e-9);
    assert!((r.ci_low - -1.2829799456937707).abs() < 1e-8);
    assert!((r.ci_high - 2.201868834582659).abs() < 1e-8);
}

#[test]
fn auroc_matches_sklearn_with_ties() {
    let s = [
        0.6, 0.2, 0.7, 0.5, 0.5, 0.8, 0.3, 0.3, 0.8, 0.5, 0.7, 0.5, 0.7, 0.2, 0.9, 0.3, 0.2, 0.6, 0.3, 0.6,
    ];
    let l = [0u8, 0, 1, 0, 1, 0, 1, 0, 0, 1, 1, 0, 0, 0, 1, 1, 0, 0, 0, 0];
    assert_eq!(auroc(&s, &l).unwrap(), 0.5934065934065934);
}

#[test]
fn t_distribution_matches_statrs() {
    for dof in [1.0, 2.5, 7.0, 18.13, 120.0] {
        let oracle = StudentsT::new(0.0, 1.0, dof).unwrap();
        for t in [-6.0, -2.1, -0.3, 0.0, 0.7, 1.96, 4.5] {
            assert!((t_cdf(t, dof) - oracle.cdf(t)).abs() < 1e-10, "cdf({t}, {dof})");
        }
        for p in [0.025, 0.3, 0.5, 0.9, 0.975] {
            assert!((t_quantile(p, dof) - oracle.inverse_cdf(p)).abs() < 1e-7, "quantile({p}, {dof})");
        }
    }
}

#[test]
fn normal_and_incomplete_functions_match_references() {
    let reference = [
        (-8.0, 6.220960574271784e-16),
        (-3.2, 0.0006871379379158481),
        (-1.0, 0.15865525393145705),
        (0.0, 0.5),
        (0.5, 0.6914624612740131),
        (1.96, 0.9750021048517795),
        (5.0, 0.9999997133484281),
    ];
    for (z, expected) in reference {
        let got = normal_cdf(z);
        assert!((got - expected).abs() <= 1e-13 * expected, "z = {z}: {got} vs {expected}");
    }
    for (a, x) in [(0.5, 0.2), (2.0, 3.0), (10.0, 7.5), (31.0, 40.0)] {
        let oracle = statrs::function::gamma::gamma_lr(a, x);
        assert!((gamma_p(a, x) - oracle).abs() < 1e-12, "P({a}, {x})");
    }
    for (a, b, x) in [(0.5, 0.5, 0.3), (2.0, 5.0, 0.2), (9.0, 0.5, 0.95), (40.0, 60.0, 0.41)] {
        let oracle = statrs::function::beta::beta_reg(a, b, x);
        assert!((beta_inc(a, b, x) - oracle).abs() < 1e-12, "I({a}, {b}, {x})");
    }
}

#[test]
fn design_has_intercept_column() {
    let (x, _) = design(&LOGISTIC_SETS[1]);
    assert_eq!(x.ncols(), 3);
    assert_eq!(x.column(0), DMatrix::from_element(40, 1, 1.0).column(0));
}
