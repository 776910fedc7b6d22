use approx::assert_relative_eq;
use neckflow::geometry::{BoundaryData, GeometryConfig, Profile, ShapeKind};
use neckflow::{Geometry, NeckPoint};
use proptest::prelude::*;

/// `2 - sqrt(4 - x^2)` evaluated in the naive form.
fn circle_h(x: f64) -> f64 {
    2.0 - (4.0 - x * x).sqrt()
}

#[test]
fn disc_delta_matches_circle_heights() {
    let g = Geometry::symmetric_discs(1.0, 1e-2).unwrap();
    let d = g.delta(NeckPoint::new(0.5, 0.0)).unwrap();
    assert_relative_eq!(d, 1e-2 + 2.0 * circle_h(0.5), max_relative = 1e-12);
    assert!((d - 0.13693).abs() / 0.13693 < 1e-3);
}

#[test]
fn delta_at_origin_is_eps() {
    let g = Geometry::symmetric_discs(1.0, 0.0).unwrap();
    assert_eq!(g.delta(NeckPoint::new(0.0, 0.0)).unwrap(), 0.0);
    let g = Geometry::symmetric_discs(1.0, 0.01).unwrap();
    let (lo, hi) = g.neck_bounds(0.0).unwrap();
    assert_relative_eq!(hi - lo, 0.01, epsilon = 1e-15);
}

#[test]
fn parabolic_delta() {
    let g = Geometry::parabolic(1.0, 1.0, 1e-3, BoundaryData::LinearXn).unwrap();
    assert_relative_eq!(g.delta(NeckPoint::new(0.1, 0.0)).unwrap(), 0.011, max_relative = 1e-12);
    assert_relative_eq!(g.delta_lower(NeckPoint::new(0.1, 0.0)).unwrap(), 0.011, max_relative = 1e-12);
}

#[test]
fn delta_outside_chart_is_an_error() {
    let g = Geometry::symmetric_discs(1.0, 1e-2).unwrap();
    assert!(g.delta(NeckPoint::new(1.5, 0.0)).is_err());
    assert!(g.delta_lower(NeckPoint::new(-1.0, 0.0)).is_err());
}

#[test]
fn disc_gap_curvature_is_one() {
    let g = Geometry::symmetric_discs(1.0, 0.0).unwrap();
    let gap = g.gap.as_ref().unwrap();
    assert_relative_eq!(gap.hessian().get(0, 0), 1.0, max_relative = 1e-12);
    let h = 1e-3;
    let fd = (gap.gap(h) - 2.0 * gap.gap(0.0) + gap.gap(-h)) / (h * h);
    assert_relative_eq!(fd, 1.0, max_relative = 1e-5);
    assert!(gap.h1(0.0).abs() < 1e-15 && gap.h2(0.0).abs() < 1e-15);
}

#[test]
fn disc_geometry_is_mirror_symmetric() {
    let g = Geometry::symmetric_discs(1.0, 0.02).unwrap();
    assert!(g.mirror_symmetric);
    for x in [-0.7, -0.2, 0.0, 0.3, 0.9] {
        let (lo, hi) = g.neck_bounds(x).unwrap();
        assert_relative_eq!(lo, -hi, epsilon = 1e-15);
    }
    let (a, b) = g.phi_range();
    assert_relative_eq!(a, -5.0, max_relative = 1e-6);
    assert_relative_eq!(b, 5.0, max_relative = 1e-6);
}

#[test]
fn disc_example_rejects_bad_input() {
    assert!(Geometry::symmetric_discs(0.0, 0.1).is_err());
    assert!(Geometry::symmetric_discs(1.0, -0.1).is_err());
}

#[test]
fn config_round_trip() {
    let cfg = GeometryConfig::from_toml_str("shape = \"parabola\"\neps = 0.005\ncurvature = [1.0, 2.0]\n").unwrap();
    assert_eq!(cfg.shape, ShapeKind::Parabola);
    let g = cfg.build().unwrap();
    assert_eq!(g.eps, 0.005);
    assert_relative_eq!(g.gap.as_ref().unwrap().hessian().get(0, 0), 3.0, max_relative = 1e-12);
    assert!(GeometryConfig::from_toml_str("bogus = 1").is_err());
}

#[test]
fn circle_profile_is_stable_near_zero() {
    let p = Profile::Circle { radius: 2.0 };
    assert_relative_eq!(p.value(1e-9), 1e-18 / 4.0, max_relative = 1e-10);
    assert_relative_eq!(p.value(0.5), circle_h(0.5), max_relative = 1e-12);
}

proptest! {
    #[test]
    fn delta_sandwich(x in -0.99f64..0.99, le in -10.0f64..-1.0) {
        let eps = le.exp();
        let g = Geometry::symmetric_discs(1.0, eps).unwrap();
        let gap = g.gap.as_ref().unwrap();
        let pt = NeckPoint::new(x, 0.0);
        let d = g.delta(pt).unwrap();
        let dl = g.delta_lower(pt).unwrap();
        prop_assert!(gap.c1.min(1.0) * dl <= d * (1.0 + 1e-12));
        prop_assert!(d <= gap.c2.max(1.0) * dl * (1.0 + 1e-12));
    }

    #[test]
    fn relative_convexity(x in -0.99f64..0.99) {
        prop_assume!(x.abs() > 1e-6);
        let g = Geometry::symmetric_discs(1.0, 0.0).unwrap();
        let gap = g.gap.as_ref().unwrap();
        prop_assert!(gap.c1 * x * x <= gap.gap(x) * (1.0 + 1e-12));
    }

    #[test]
    fn neck_points_lie_in_neck(x in -0.9f64..0.9, s in 0.01f64..0.99, le in -9.0f64..-2.0) {
        let g = Geometry::symmetric_discs(1.0, le.exp()).unwrap();
        let (lo, hi) = g.neck_bounds(x).unwrap();
        let p = NeckPoint::new(x, lo + s * (hi - lo));
        prop_assert!(g.in_neck(p.as_vec()));
        prop_assert!(g.contains(p.as_vec()));
        prop_assert!(!g.contains(NeckPoint::new(x, hi + 1e-3).as_vec()));
        prop_assert!(!g.contains(NeckPoint::new(x, lo - 1e-3).as_vec()));
    }
}
