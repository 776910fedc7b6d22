use approx::assert_relative_eq;
use neckflow::analysis::*;
use neckflow::geometry::{BoundaryData, Geometry, Vec2};
use neckflow::mesh::{self, TriMesh};
use neckflow::{solve, NeckPoint, Solution, SolveConfig};
use proptest::prelude::*;
use std::sync::OnceLock;

struct Fixture {
    g: Geometry,
    m: TriMesh,
    sols: Vec<Solution>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let g = Geometry::symmetric_discs(1.0, 0.02).unwrap();
        let m = mesh::generate(&g, 0.25, 4).unwrap();
        let sols = [1.3, 2.0, 3.0]
            .iter()
            .map(|&p| solve(&m, &g, &SolveConfig::new(p)).unwrap())
            .collect();
        Fixture { g, m, sols }
    })
}

#[test]
fn synthetic_decay_recovers_rate() {
    let eps: f64 = 1e-3;
    let samples: Vec<(f64, f64)> = (2..=8)
        .map(|k| {
            let x = k as f64 / 10.0;
            (x, 3.0 * (-2.0 / (eps.sqrt() + x)).exp())
        })
        .collect();
    let fit = fit_exp_decay(&samples, eps).unwrap();
    assert_relative_eq!(fit.c2_hat, 2.0, epsilon = 1e-6);
    assert_relative_eq!(fit.intercept, 3f64.ln(), epsilon = 1e-6);
    assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
}

#[test]
fn decay_fit_needs_spread() {
    let same = [(0.4, 1.0), (0.4, 2.0), (-0.4, 1.5)];
    assert!(fit_exp_decay(&same, 1e-3).is_err());
    assert!(fit_exp_decay(&[(0.3, 1.0)], 1e-3).is_err());
}

fn line_samples(lo: f64, hi: f64, n: usize, field: impl Fn(f64) -> [f64; 2]) -> Vec<(Vec2, [f64; 2])> {
    (0..=n)
        .map(|k| {
            let x = lo + (hi - lo) * k as f64 / n as f64;
            (Vec2::new(x, 0.0), field(x))
        })
        .collect()
}

#[test]
fn holder_quotient_of_constant_field_is_zero() {
    let s = line_samples(-0.5, 0.5, 2000, |_| [0.3, -1.2]);
    assert_eq!(holder_quotient_at(&s, NeckPoint::new(0.0, 0.0), 1e-2, 0.5), 0.0);
}

#[test]
fn holder_quotient_of_gap_field_is_scale_stable() {
    let qs: Vec<f64> = [1e-3, 1e-2, 1e-1]
        .iter()
        .map(|&eps| {
            let s = line_samples(-0.5, 0.5, 8000, |x| [0.0, 1.0 / (eps + x * x)]);
            holder_quotient_at(&s, NeckPoint::new(0.0, 0.0), eps, 0.5)
        })
        .collect();
    assert!(qs.iter().all(|q| q.is_finite() && *q > 0.0), "{qs:?}");
    let mean = qs.iter().sum::<f64>() / 3.0;
    for q in &qs {
        assert!((q - mean).abs() <= 0.2 * mean, "{qs:?}");
    }
}

#[test]
fn holder_scan_rejects_bad_beta() {
    let f = fixture();
    assert!(holder_quotient_scan(&f.sols[1], &f.m, &f.g, 1.0, &[NeckPoint::new(0.1, 0.0)]).is_err());
}

#[test]
fn kkt_and_cutoff_fluxes_agree() {
    let f = fixture();
    for sol in &f.sols {
        let tol = SolveConfig::new(sol.p).newton_tol;
        for i in 0..2 {
            let a = kkt_flux(sol, &f.m, i).unwrap().value;
            let b = cutoff_volume_flux(sol, &f.m, i, 2).unwrap().value;
            assert!((a - b).abs() * sol.flux_scale() <= 10.0 * tol, "p={} inc {i}: {a:e} {b:e}", sol.p);
        }
    }
}

#[test]
fn boundary_currents_balance() {
    let f = fixture();
    for sol in &f.sols {
        let c = boundary_conservation(sol, &f.m).unwrap();
        assert!(c.total.abs() <= 1e-10 * c.scale, "{c:?}");
        assert!(c.outer.abs() <= 1e-10 * c.scale);
    }
}

#[test]
fn neck_current_is_positive_above_critical() {
    let f = fixture();
    for sol in f.sols.iter().filter(|s| s.p >= 1.5) {
        for r in [0.5, 0.2, 0.1] {
            let fl = cross_section_flux(sol, &f.m, &f.g, r).unwrap();
            assert!(fl.value > 0.0, "p={} r={r}: {fl:?}", sol.p);
        }
    }
    assert!(cross_section_flux(&f.sols[1], &f.m, &f.g, 1.5).is_err());
    assert!(cross_section_flux(&f.sols[1], &f.m, &f.g, 0.0).is_err());
}

#[test]
fn cross_section_current_grows_with_radius() {
    let f = fixture();
    let sol = &f.sols[1];
    let vals: Vec<f64> = [0.1, 0.2, 0.3, 0.5]
        .iter()
        .map(|&r| cross_section_flux(sol, &f.m, &f.g, r).unwrap().value)
        .collect();
    assert!(vals.windows(2).all(|w| w[1] > w[0]), "{vals:?}");
}

#[test]
fn max_gradient_of_constant_solution_is_zero() {
    let f = fixture();
    let g = f.g.clone().with_phi(BoundaryData::Constant { value: 2.0 });
    let sol = solve(&f.m, &g, &SolveConfig::new(2.0)).unwrap();
    assert!(max_gradient(&sol, &f.m, 0.5).value < 1e-12);
}

#[test]
fn max_gradient_sits_in_the_neck() {
    let f = fixture();
    for sol in &f.sols {
        let mg = max_gradient(sol, &f.m, 0.5);
        assert!(mg.value > 0.0);
        assert!(mg.location.x.abs() <= 0.5);
        assert!(f.g.in_neck(mg.location), "{mg:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn probes_report_their_element(x in -0.9f64..0.9, s in 0.05f64..0.95) {
        let f = fixture();
        let sol = &f.sols[2];
        let (lo, hi) = f.g.neck_bounds(x).unwrap();
        let pt = NeckPoint::new(x, lo + s * (hi - lo));
        let loc = Locator::new(&f.m);
        let pr = probe_gradient(sol, &loc, &f.g, pt).unwrap();
        let l = loc.barycentric(pr.triangle, pt.as_vec());
        prop_assert!(l.iter().all(|v| *v >= -1e-9));
        prop_assert_eq!(pr.grad, sol.element_gradients[pr.triangle]);
        prop_assert_eq!(pr.delta_at_point, f.g.delta(pt).unwrap());
        let (umin, umax) = (sol.u2.unwrap(), sol.u1.unwrap());
        prop_assert!(pr.value >= umin - 1e-12 && pr.value <= umax + 1e-12);
    }
}

#[test]
fn probe_outside_mesh_is_an_error() {
    let f = fixture();
    let loc = Locator::new(&f.m);
    assert!(probe_gradient(&f.sols[0], &loc, &f.g, NeckPoint::new(0.0, 2.0)).is_err());
    assert!(loc.locate(Vec2::new(9.0, 9.0)).is_none());
}

#[test]
fn probe_csv_header() {
    let row = ProbeRow {
        eps: 1e-3,
        p: 2.0,
        xprime: 0.0,
        xn: 0.0,
        delta: 1e-3,
        grad_x: 0.0,
        grad_n: 10.0,
        predicted_grad_n: 10.5,
    };
    let mut buf = Vec::new();
    write_probe_csv(&[row], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), PROBE_COLUMNS.join(","));
    assert_eq!(text.lines().count(), 2);
}
