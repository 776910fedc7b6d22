use approx::assert_relative_eq;
use neckflow::geometry::{BoundaryData, Geometry, Vec2};
use neckflow::harness::manufactured::{annulus_exact, energy_convergence, run_manufactured};
use neckflow::mesh::{self, BoundaryTag, GradingReport, TriMesh};
use neckflow::solver::{assemble_energy, boundary_fluxes, solve_with_initial, uniqueness_probe};
use neckflow::{solve, SolveConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

fn disc_fixture() -> &'static (Geometry, TriMesh) {
    static F: OnceLock<(Geometry, TriMesh)> = OnceLock::new();
    F.get_or_init(|| {
        let g = Geometry::symmetric_discs(1.0, 0.05).unwrap();
        let m = mesh::generate(&g, 0.3, 4).unwrap();
        (g, m)
    })
}

fn random_field(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn single_triangle() -> TriMesh {
    TriMesh {
        vertices: vec![Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(0.0, 1.5)],
        triangles: vec![[0, 1, 2]],
        boundary_edges: vec![],
        curves: vec![],
        grading: GradingReport::default(),
    }
}

#[test]
fn single_triangle_energy() {
    let m = single_triangle();
    // v = x has unit gradient
    let v: Vec<f64> = m.vertices.iter().map(|p| p.x).collect();
    let a = assemble_energy(&m, &v, 2.0, 0.0).unwrap();
    assert_relative_eq!(a.energy, 1.5, max_relative = 1e-14);
    let a = assemble_energy(&m, &v, 3.0, 0.5).unwrap();
    assert_relative_eq!(a.energy, 1.5 * 1.25f64.powf(1.5), max_relative = 1e-14);
}

#[test]
fn constant_field_energy() {
    let (_, m) = disc_fixture();
    let v = vec![3.0; m.num_vertices()];
    for (p, eta) in [(1.5, 0.1), (2.0, 0.0), (3.0, 0.2)] {
        let a = assemble_energy(m, &v, p, eta).unwrap();
        assert_relative_eq!(a.energy, eta.powf(p) * m.total_area(), max_relative = 1e-12);
        assert!(a.gradient.iter().all(|g| g.abs() < 1e-14));
    }
    assert!(assemble_energy(m, &v[1..], 2.0, 0.0).is_err());
}

fn fd_check(m: &TriMesh, v: &[f64], p: f64, eta: f64) -> f64 {
    let a = assemble_energy(m, v, p, eta).unwrap();
    let scale = a.gradient.iter().fold(0.0f64, |s, g| s.max(g.abs()));
    let h = 1e-6;
    let mut worst = 0.0f64;
    for j in 0..v.len() {
        let mut w = v.to_vec();
        w[j] += h;
        let ep = assemble_energy(m, &w, p, eta).unwrap().energy;
        w[j] -= 2.0 * h;
        let em = assemble_energy(m, &w, p, eta).unwrap().energy;
        worst = worst.max(((ep - em) / (2.0 * h) - a.gradient[j]).abs() / scale);
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn gradient_matches_finite_differences(seed in 0u64..1000, pi in 0usize..3) {
        let p = [1.3, 2.0, 3.0][pi];
        let m = mesh::random_mesh(50, seed).unwrap();
        let v = random_field(50, seed + 1);
        let err = fd_check(&m, &v, p, 1e-2);
        prop_assert!(err < 1e-6, "p={p}: {err:e}");
    }

    #[test]
    fn hessian_is_symmetric_psd(seed in 0u64..1000, p in 1.1f64..4.0, eta in 0.0f64..0.5) {
        prop_assume!(p >= 2.0 || eta > 1e-3);
        let m = mesh::random_mesh(40, seed).unwrap();
        let v = random_field(40, seed + 7);
        let a = assemble_energy(&m, &v, p, eta).unwrap();
        let mut dense = vec![0.0; 40 * 40];
        for &(i, j, x) in &a.hessian {
            dense[i * 40 + j] += x;
        }
        let scale = dense.iter().fold(0.0f64, |s, x| s.max(x.abs()));
        for i in 0..40 {
            for j in 0..i {
                prop_assert!((dense[i * 40 + j] - dense[j * 40 + i]).abs() <= 1e-12 * scale);
            }
        }
        for k in 0..8 {
            let z = random_field(40, seed * 31 + k);
            let q: f64 = (0..40).map(|i| z[i] * (0..40).map(|j| dense[i * 40 + j] * z[j]).sum::<f64>()).sum();
            prop_assert!(q >= -1e-12 * scale, "quadratic form {q:e}");
        }
    }

    #[test]
    fn hessian_matches_gradient_differences(seed in 0u64..1000, pi in 0usize..3) {
        let p = [1.3, 2.0, 3.0][pi];
        let m = mesh::random_mesh(30, seed).unwrap();
        let v = random_field(30, seed + 3);
        let a = assemble_energy(&m, &v, p, 0.05).unwrap();
        let dir = random_field(30, seed + 4);
        let h = 1e-6;
        let plus: Vec<f64> = v.iter().zip(&dir).map(|(a, d)| a + h * d).collect();
        let minus: Vec<f64> = v.iter().zip(&dir).map(|(a, d)| a - h * d).collect();
        let gp = assemble_energy(&m, &plus, p, 0.05).unwrap().gradient;
        let gm = assemble_energy(&m, &minus, p, 0.05).unwrap().gradient;
        let mut hv = vec![0.0; 30];
        for &(i, j, x) in &a.hessian {
            hv[i] += x * dir[j];
        }
        let scale = hv.iter().fold(0.0f64, |s, x| s.max(x.abs()));
        for i in 0..30 {
            prop_assert!(((gp[i] - gm[i]) / (2.0 * h) - hv[i]).abs() < 1e-5 * scale);
        }
    }
}

#[test]
fn constant_data_gives_constant_solution() {
    let (g, m) = disc_fixture();
    let g = g.clone().with_phi(BoundaryData::Constant { value: 7.0 });
    for p in [1.5, 2.0, 3.0] {
        let cfg = SolveConfig::new(p);
        let sol = solve(m, &g, &cfg).unwrap();
        assert!(sol.nodal_values.iter().all(|&v| v == 7.0));
        assert_eq!(sol.u1, Some(7.0));
        assert_eq!(sol.u2, Some(7.0));
        assert_relative_eq!(
            sol.energy,
            cfg.eta_final().powf(p) * m.total_area(),
            max_relative = 1e-12,
            epsilon = 1e-20
        );
    }
}

#[test]
fn zero_data_probe_returns_zero() {
    let (g, m) = disc_fixture();
    let g = g.clone().with_phi(BoundaryData::Constant { value: 0.0 });
    let d = uniqueness_probe(m, &g, &SolveConfig::new(2.0), 3, 1).unwrap();
    assert_eq!(d, 0.0);
    let sol = solve(m, &g, &SolveConfig::new(2.0)).unwrap();
    assert!(sol.nodal_values.iter().all(|&v| v == 0.0));
}

#[test]
fn symmetric_potentials_are_opposite() {
    let (g, m) = disc_fixture();
    for p in [1.3, 1.5, 2.0, 3.0] {
        let sol = solve(m, g, &SolveConfig::new(p)).unwrap();
        let (u1, u2) = (sol.u1.unwrap(), sol.u2.unwrap());
        assert!((u1 + u2).abs() <= 1e-6 * sol.osc, "p={p}: {u1} {u2}");
        assert!(u1 > 0.0);
    }
}

#[test]
fn solution_invariants() {
    let (g, m) = disc_fixture();
    let tags = m.vertex_tags();
    for p in [1.3, 2.0, 3.0] {
        let cfg = SolveConfig::new(p);
        let sol = solve(m, g, &cfg).unwrap();
        assert!(sol.kkt_residual <= cfg.newton_tol, "p={p}: {:e}", sol.kkt_residual);
        for (v, t) in tags.iter().enumerate() {
            match t {
                Some(BoundaryTag::Inc1) => assert_eq!(sol.nodal_values[v], sol.u1.unwrap()),
                Some(BoundaryTag::Inc2) => assert_eq!(sol.nodal_values[v], sol.u2.unwrap()),
                Some(BoundaryTag::Outer) => assert_eq!(sol.nodal_values[v], m.vertices[v].y),
                None => {}
            }
        }
        let (lo, hi) = g.phi_range();
        let tol = 1e-8 * sol.osc;
        assert!(sol.nodal_values.iter().all(|&u| u >= lo - tol && u <= hi + tol));
        for i in 0..2 {
            assert!(sol.scaled_flux(i).unwrap().abs() <= 1e-8);
        }
        let f = boundary_fluxes(m, &sol.nodal_values, p, sol.eta_final);
        let total = f.iter().sum::<f64>() * sol.flux_scale();
        assert!(total.abs() < 1e-10, "p={p}: {total:e}");
        for stage in &sol.energy_history {
            for w in stage.windows(2) {
                assert!(w[1] <= w[0] + 1e-14 * w[0].abs(), "energy rose: {w:?}");
            }
        }
    }
}

#[test]
fn linear_case_takes_one_newton_step() {
    let (g, m) = disc_fixture();
    let mut cfg = SolveConfig::new(2.0);
    cfg.warm_start = false;
    let init = random_field(m.num_vertices(), 5);
    let sol = solve_with_initial(m, g, &cfg, &init).unwrap();
    assert_eq!(sol.newton_iterations, 1);
    assert!(sol.kkt_residual < 1e-12);
}

#[test]
fn random_starts_agree() {
    let (g, m) = disc_fixture();
    for p in [1.3, 2.0, 3.0] {
        let cfg = SolveConfig::new(p);
        let d = uniqueness_probe(m, g, &cfg, 3, 11).unwrap();
        let bound = if p < 2.0 { 100.0 } else { 10.0 } * cfg.newton_tol;
        assert!(d <= bound, "p={p}: {d:e}");
    }
    assert!(uniqueness_probe(m, g, &SolveConfig::new(2.0), 1, 0).is_err());
}

#[test]
fn config_validation() {
    let mut c = SolveConfig::new(2.0);
    assert!(c.validate().is_ok());
    c.p = 1.0;
    assert!(c.validate().is_err());
    let mut c = SolveConfig::new(1.5);
    c.eta_schedule = vec![1e-2, 1e-1];
    assert!(c.validate().is_err());
    c.eta_schedule = vec![1e-1, -1.0];
    assert!(c.validate().is_err());
    let mut c = SolveConfig::new(3.0);
    c.newton_tol = 0.0;
    assert!(c.validate().is_err());
    let (g, m) = disc_fixture();
    assert!(solve(m, g, &c).is_err());
}

#[test]
fn annulus_nodal_error_is_second_order() {
    let coarse = run_manufactured(3.0, 0.2).unwrap();
    let fine = run_manufactured(3.0, 0.1).unwrap();
    assert!(coarse.max_nodal_error / fine.max_nodal_error >= 3.0, "{coarse:?} {fine:?}");
    assert_relative_eq!(coarse.exact_flux, 9.155, max_relative = 1e-3);
    assert_relative_eq!(annulus_exact(3.0, 2.0), 1.0, max_relative = 1e-14);
    assert_relative_eq!(annulus_exact(3.0, 1.0), 0.0, epsilon = 1e-14);
    assert_relative_eq!(
        annulus_exact(3.0, 1.5),
        (1.5f64.sqrt() - 1.0) / (2f64.sqrt() - 1.0),
        max_relative = 1e-13
    );
}

#[test]
fn annulus_energy_converges() {
    for p in [2.0, 3.0] {
        let levels = energy_convergence(p, 0.25, 2).unwrap();
        for w in levels.windows(2) {
            let ratio = w[0].1.abs() / w[1].1.abs();
            assert!(ratio >= 3.0, "p={p}: {levels:?}");
        }
    }
}
