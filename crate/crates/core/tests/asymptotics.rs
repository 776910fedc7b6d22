use approx::assert_relative_eq;
use neckflow::asymptotics::*;
use proptest::prelude::*;
use std::f64::consts::{E, PI};

/// ln Γ via upward shift and the Stirling series; independent of the library's Lanczos sum.
fn ln_gamma_oracle(z: f64) -> f64 {
    let mut shift = 0.0;
    let mut x = z;
    while x < 40.0 {
        shift += x.ln();
        x += 1.0;
    }
    // Bernoulli numbers B_2k / (2k(2k-1))
    let coeffs = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360360.0,
        1.0 / 156.0,
        -3617.0 / 122400.0,
    ];
    let mut series = 0.0;
    let mut xp = x;
    for c in coeffs {
        series += c / xp;
        xp *= x * x;
    }
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + series - shift
}

fn hess1(c: f64) -> GapHessian {
    GapHessian::scalar(c)
}

#[test]
fn gamma_known_values() {
    assert_relative_eq!(gamma_fn(1.0).unwrap(), 1.0, max_relative = 1e-14);
    assert_relative_eq!(gamma_fn(0.5).unwrap(), PI.sqrt(), max_relative = 1e-14);
    assert_relative_eq!(gamma_fn(4.5).unwrap(), 11.6317283966, max_relative = 1e-11);
    let mut fact = 1.0;
    for n in 1..=20 {
        assert_relative_eq!(gamma_fn(n as f64).unwrap(), fact, max_relative = 1e-13);
        fact *= n as f64;
    }
}

#[test]
fn gamma_rejects_nonpositive() {
    assert!(gamma_fn(0.0).is_err());
    assert!(gamma_fn(-2.5).is_err());
    assert!(gamma_fn(f64::NAN).is_err());
}

proptest! {
    #[test]
    fn gamma_matches_stirling_oracle(z in 0.01f64..50.0) {
        let got = gamma_fn(z).unwrap();
        let want = ln_gamma_oracle(z).exp();
        prop_assert!(((got - want) / want).abs() <= 1e-12, "z={z} got={got} want={want}");
    }

    #[test]
    fn gamma_recurrence(z in 0.05f64..40.0) {
        let lhs = gamma_fn(z + 1.0).unwrap();
        let rhs = z * gamma_fn(z).unwrap();
        prop_assert!(((lhs - rhs) / rhs).abs() <= 1e-12);
    }
}

#[test]
fn theta_examples() {
    let r = Regime::new(2.0, 2).unwrap();
    assert_relative_eq!(theta(1e-4, &r).unwrap(), 1e-2, max_relative = 1e-12);
    let r = Regime::new(2.0, 3).unwrap();
    assert_eq!(r.branch, Branch::Critical);
    assert_relative_eq!(theta((-10.0f64).exp(), &r).unwrap(), 0.1, max_relative = 1e-12);
    let r = Regime::new(1.3, 2).unwrap();
    for eps in [0.5, 1e-3, 1e-12] {
        assert_eq!(theta(eps, &r).unwrap(), 1.0);
    }
    assert!(theta(1.0, &r).is_err());
    assert!(theta(0.0, &r).is_err());
}

#[test]
fn regime_classification() {
    assert_eq!(Regime::new(1.5, 2).unwrap().branch, Branch::Critical);
    assert_eq!(Regime::new(1.5000001, 2).unwrap().branch, Branch::Super);
    assert_eq!(Regime::new(1.4999999, 2).unwrap().branch, Branch::Sub);
    assert_eq!(Regime::from_rational(5, 2, 4).unwrap().branch, Branch::Critical);
    assert_eq!(Regime::from_rational(7, 3, 4).unwrap().branch, Branch::Sub);
    assert!(Regime::new(1.0, 2).is_err());
    assert!(Regime::new(2.0, 1).is_err());
    assert!(Regime::from_rational(1, 1, 2).is_err());
}

proptest! {
    #[test]
    fn rational_branch_is_exact(num in 2u64..400, den in 1u64..200, n in 2usize..6) {
        prop_assume!(num > den);
        let r = Regime::from_rational(num, den, n).unwrap();
        let expect = match (2 * num).cmp(&((n as u64 + 1) * den)) {
            std::cmp::Ordering::Greater => Branch::Super,
            std::cmp::Ordering::Equal => Branch::Critical,
            std::cmp::Ordering::Less => Branch::Sub,
        };
        prop_assert_eq!(r.branch, expect);
    }

    #[test]
    fn super_exponent_vanishes_at_critical(n in 2usize..6, t in 1e-9f64..1e-3) {
        let pc = (n as f64 + 1.0) / 2.0;
        let r = Regime::new(pc + t, n).unwrap();
        prop_assert_eq!(r.branch, Branch::Super);
        prop_assert!(r.super_exponent() > 0.0 && r.super_exponent() < 2.0 * t / (pc - 1.0));
    }

    #[test]
    fn theta_in_unit_interval(p in 1.05f64..6.0, n in 2usize..5, le in -30.0f64..-0.1) {
        let r = Regime::new(p, n).unwrap();
        let t = theta(le.exp(), &r).unwrap();
        prop_assert!(t > 0.0 && t <= 1.0);
    }

    #[test]
    fn k_scales_with_curvature(p in 1.6f64..5.0, c in 0.1f64..10.0) {
        let r = Regime::new(p, 2).unwrap();
        let k1 = k_const(&hess1(c), &r).unwrap();
        let k2 = k_const(&hess1(2.0 * c), &r).unwrap();
        prop_assert!(k1 > 0.0);
        prop_assert!((k2 / k1 - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn prediction_monotone_in_flux(p in 1.6f64..5.0, f in 0.0f64..50.0, df in 1e-3f64..10.0) {
        let r = Regime::new(p, 2).unwrap();
        let h = hess1(1.0);
        let a = predict_expansion(f, &r, 1e-3, &h).unwrap().leading_coeff;
        let b = predict_expansion(f + df, &r, 1e-3, &h).unwrap().leading_coeff;
        prop_assert!(b > a);
    }
}

#[test]
fn k_examples() {
    let k = k_const(&hess1(2.0), &Regime::new(2.0, 2).unwrap()).unwrap();
    assert_relative_eq!(k, 1.0 / PI, max_relative = 1e-12);
    let k = k_const(&GapHessian::identity_scaled(2, 2.0), &Regime::new(2.0, 3).unwrap()).unwrap();
    assert_relative_eq!(k, 1.0 / PI, max_relative = 1e-12);
    let k = k_const(&hess1(2.0), &Regime::new(3.0, 2).unwrap()).unwrap();
    assert_relative_eq!(k, 2.0 / PI, max_relative = 1e-12);
}

#[test]
fn k_errors() {
    assert!(matches!(
        k_const(&hess1(2.0), &Regime::new(1.3, 2).unwrap()),
        Err(neckflow::NeckError::UnsupportedBranch(_))
    ));
    assert!(k_const(&hess1(-1.0), &Regime::new(2.0, 2).unwrap()).is_err());
    let indefinite = GapHessian::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
    assert!(k_const(&indefinite, &Regime::new(2.0, 3).unwrap()).is_err());
}

#[test]
fn neck_integral_closed_forms() {
    let r = Regime::new(2.0, 2).unwrap();
    let v = neck_integral(&r, &hess1(2.0), 0.1, 1e-8).unwrap();
    assert_relative_eq!(v, 2.0 * 1e3f64.atan(), max_relative = 1e-6);
    assert_relative_eq!(v, 3.13959, max_relative = 1e-5);
    assert!((v - PI).abs() / PI < 7e-4);

    let r3 = Regime::new(2.0, 3).unwrap();
    let h = GapHessian::identity_scaled(2, 2.0);
    for eps in [1e-4, 1e-8] {
        let v = neck_integral(&r3, &h, 0.1, eps).unwrap();
        let want = PI * (1.0 + 0.01 / eps).ln() / eps.ln().abs();
        assert_relative_eq!(v, want, max_relative = 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn neck_integral_arctan(radius in 0.01f64..0.5, le in -18.0f64..-2.0) {
        let eps = le.exp();
        let v = neck_integral(&Regime::new(2.0, 2).unwrap(), &hess1(2.0), radius, eps).unwrap();
        let want = 2.0 * (radius / eps.sqrt()).atan();
        prop_assert!(((v - want) / want).abs() <= 1e-6);
    }
}

#[test]
fn neck_integral_limit_matches_k() {
    for (n, p) in [(2, 2.0), (2, 3.0), (3, 2.0), (4, 2.5), (2, 1.5), (3, 3.0)] {
        let r = Regime::new(p, n).unwrap();
        let h = GapHessian::identity_scaled(n - 1, 1.0);
        let lim = neck_integral_limit(&r, &h).unwrap().value;
        let inv_k = 1.0 / k_const(&h, &r).unwrap();
        assert!((lim - inv_k).abs() / inv_k < 0.01, "n={n} p={p}: {lim} vs {inv_k}");
    }
    assert!(neck_integral(&Regime::new(1.3, 2).unwrap(), &hess1(1.0), 0.1, 1e-4).is_err());
}

#[test]
fn prediction_examples() {
    let r = Regime::new(2.0, 2).unwrap();
    let pred = predict_expansion(1.0, &r, 1e-4, &hess1(2.0)).unwrap();
    assert_relative_eq!(pred.predicted_dn(1e-4).unwrap(), 1e2 / PI, max_relative = 1e-12);

    let zero = predict_expansion(0.0, &r, 1e-4, &hess1(2.0)).unwrap();
    assert_eq!(zero.leading_coeff, 0.0);
    assert!(zero.flagged_zero);

    let sub = predict_expansion(0.3, &Regime::new(1.3, 2).unwrap(), 1e-3, &hess1(1.0)).unwrap();
    assert_relative_eq!(sub.predicted_dn(0.01).unwrap(), 30.0, max_relative = 1e-12);
    assert!(sub.predicted_dn(0.0).is_err());
}

#[test]
fn ugap_limit_exact_model() {
    let r = Regime::new(3.0, 2).unwrap();
    let h = hess1(1.0);
    let c = 0.7;
    let rows: Vec<(f64, f64)> = [1e-2, 1e-3, 1e-4, 1e-5]
        .iter()
        .map(|&e| (e, c * theta(e, &r).unwrap()))
        .collect();
    let fit = fit_ugap_limit(&rows, &r, &h).unwrap();
    assert_relative_eq!(fit.limit, c, max_relative = 1e-10);
    let k = k_const(&h, &r).unwrap();
    assert_relative_eq!(fit.flux_implied.unwrap(), c.powf(2.0) / k, max_relative = 1e-9);
}

#[test]
fn ugap_limit_with_correction() {
    let r = Regime::new(2.0, 2).unwrap();
    let h = hess1(1.0);
    let c = 1.3;
    let rows: Vec<(f64, f64)> = [1e-2, 1e-3, 1e-4, 1e-5]
        .iter()
        .map(|&e| (e, c * theta(e, &r).unwrap() * (1.0 + e.powf(0.2))))
        .collect();
    let fit = fit_ugap_limit(&rows, &r, &h).unwrap();
    assert!((fit.limit - c).abs() / c < 0.01, "{fit:?}");
}

#[test]
fn ugap_limit_rejects_bad_rows() {
    let r = Regime::new(2.0, 2).unwrap();
    let h = hess1(1.0);
    assert!(fit_ugap_limit(&[(1e-2, 1.0), (1e-3, 0.5)], &r, &h).is_err());
    assert!(fit_ugap_limit(&[(1e-3, 1.0), (1e-2, 0.5), (1e-4, 0.1)], &r, &h).is_err());
}

#[test]
fn flux_extrapolation_exponential() {
    let rows: Vec<(f64, f64)> = [0.5f64, 0.3, 0.2, 0.1].iter().map(|&r| (r, 2.0 + (-5.0 / r).exp())).collect();
    let fit = extrapolate_flux(&rows, FluxModel::Exponential).unwrap();
    assert!(!fit.fallback);
    assert!((fit.f_inf - 2.0).abs() < 1e-3, "{fit:?}");
}

#[test]
fn flux_extrapolation_power_law() {
    let rows: Vec<(f64, f64)> = [0.5, 0.3, 0.2, 0.1].iter().map(|&r| (r, -0.4 + 3.0 * r * r)).collect();
    let fit = extrapolate_flux(&rows, FluxModel::PowerLaw { exponent: 2.0 }).unwrap();
    assert_relative_eq!(fit.f_inf, -0.4, epsilon = 1e-12);
    assert_relative_eq!(fit.amplitude, 3.0, epsilon = 1e-12);
}

#[test]
fn eps_richardson_removes_power_tail() {
    let rows: Vec<(f64, f64)> = [1e-2f64, 1e-3].iter().map(|&e| (e, 5.0 + 2.0 * e.powf(0.5))).collect();
    assert_relative_eq!(extrapolate_in_eps(&rows, 0.5).unwrap(), 5.0, epsilon = 1e-12);
    assert!(extrapolate_in_eps(&rows[..1], 0.5).is_err());
}

#[test]
fn loglog_slope() {
    let pts: Vec<(f64, f64)> = [1e-2f64, 1e-3, 1e-4].iter().map(|&e| (e, 3.0 * e.powf(-0.25))).collect();
    let fit = fit_loglog_slope(&pts).unwrap();
    assert_relative_eq!(fit.slope, -0.25, epsilon = 1e-12);
    assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    let err = fit_loglog_slope(&pts[..1]).unwrap_err();
    assert!(err.to_string().contains("insufficient points"));
}

#[test]
fn lower_bound_windows() {
    let params = LowerBoundParams::default();
    let sup = Regime::new(2.0, 2).unwrap();
    assert_relative_eq!(
        lower_bound_region(&sup, (-10.0f64).exp(), &params).unwrap(),
        0.1,
        max_relative = 1e-12
    );
    let crit = Regime::new(1.5, 2).unwrap();
    assert_relative_eq!(
        lower_bound_region_ln(&crit, -E.powi(10), &params).unwrap(),
        0.01,
        max_relative = 1e-12
    );
    assert!(lower_bound_region(&crit, 0.5, &params).is_err());
    let sub = Regime::new(1.3, 2).unwrap();
    for eps in [0.5, 1e-3, 1e-10] {
        assert_eq!(lower_bound_region(&sub, eps, &params).unwrap(), 0.1);
    }
}
