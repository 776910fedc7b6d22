//! The twelve acceptance criteria, shared by the `accept` verb and the
//! acceptance test target.

use super::manufactured::run_manufactured;
use super::{cached_mesh, run_sweep, SweepReport, SweepSpec, DIM};
use crate::analysis::{self, decay_fit, holder_quotient_scan};
use crate::asymptotics::{k_const, neck_integral_limit, Branch, GapHessian, Regime};
use crate::error::{NeckError, Result};
use crate::geometry::{BoundaryData, Geometry, PolyTerm};
use crate::mesh::{random_mesh, MeshOptions, TriMesh};
use crate::solver::{assemble_energy, solve, uniqueness_probe, Solution, SolveConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::OnceLock;
use std::time::Instant;

pub const CRITERIA: usize = 12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub runtime_s: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} [{}] {}: {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

pub const NAMES: [&str; CRITERIA] = [
    "manufactured annulus solution",
    "zero flux on floating inclusions",
    "inclusion potential bounds",
    "odd symmetry and positive flux",
    "gradient blow-up slopes",
    "U-gap limit and flux cross-check (p=2)",
    "subcritical U-gap limit and vanishing flux",
    "neck-integral oracle vs 1/K",
    "exponential decay in the auxiliary channel",
    "pointwise expansion at the neck centre",
    "Hölder quotient boundedness",
    "property suite",
];

/// A solved fixture used by the state-wide checks.
pub struct Fixture {
    pub label: String,
    pub geometry: Geometry,
    pub mesh: TriMesh,
    pub solution: Solution,
}

type Shared<T> = OnceLock<std::result::Result<T, String>>;

/// Lazily computed inputs shared by several criteria.
pub struct Acceptance {
    pub spec: SweepSpec,
    sweep: Shared<(SweepReport, f64)>,
    fixtures: Shared<Vec<Fixture>>,
}

impl Default for Acceptance {
    fn default() -> Self {
        Self::new(SweepSpec::canonical())
    }
}

/// Upper bound on the canonical sweep wall time.
pub const SWEEP_BUDGET_S: f64 = 1800.0;
pub const CASE_BUDGET_S: f64 = 30.0;
pub const ORACLE_BUDGET_S: f64 = 60.0;

fn pass_fail(ok: &mut bool, cond: bool) -> &'static str {
    *ok &= cond;
    if cond {
        "ok"
    } else {
        "FAIL"
    }
}

impl Acceptance {
    pub fn new(spec: SweepSpec) -> Self {
        Acceptance {
            spec,
            sweep: OnceLock::new(),
            fixtures: OnceLock::new(),
        }
    }

    /// The canonical sweep and its wall time in seconds.
    pub fn sweep(&self) -> Result<&(SweepReport, f64)> {
        self.sweep
            .get_or_init(|| {
                let t = Instant::now();
                run_sweep(&self.spec).map(|r| (r, t.elapsed().as_secs_f64())).map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| NeckError::Accuracy(format!("canonical sweep failed: {e}")))
    }

    pub fn fixtures(&self) -> Result<&Vec<Fixture>> {
        self.fixtures
            .get_or_init(|| build_fixtures(&self.spec).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| NeckError::Accuracy(format!("fixtures failed: {e}")))
    }

    pub fn run(&self, id: usize) -> CriterionResult {
        let t = Instant::now();
        let out = match id {
            1 => self.c1(),
            2 => self.c2(),
            3 => self.c3(),
            4 => self.c4(),
            5 => self.c5(),
            6 => self.c6(),
            7 => self.c7(),
            8 => self.c8(),
            9 => self.c9(),
            10 => self.c10(),
            11 => self.c11(),
            12 => self.c12(),
            _ => Err(NeckError::Config(format!("no criterion {id}"))),
        };
        let (passed, detail) = match out {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        CriterionResult {
            id,
            name: NAMES.get(id.wrapping_sub(1)).copied().unwrap_or("?").to_string(),
            passed,
            detail,
            runtime_s: t.elapsed().as_secs_f64(),
        }
    }

    pub fn run_all(&self) -> Vec<CriterionResult> {
        (1..=CRITERIA).map(|i| self.run(i)).collect()
    }

    fn c1(&self) -> Result<(bool, String)> {
        let mut ok = true;
        let mut parts = Vec::new();
        for p in [1.5, 2.0, 3.0] {
            let c = run_manufactured(p, 0.02)?;
            let mean = c.circle_fluxes.iter().map(|f| f.1).sum::<f64>() / c.circle_fluxes.len() as f64;
            let s = format!(
                "p={p}: err {:.2e} {} / flux spread {:.3}% {} (mean {:.4}, exact {:.4}) / {:.1}s {}",
                c.max_nodal_error,
                pass_fail(&mut ok, c.max_nodal_error <= 5e-4),
                100.0 * c.flux_spread,
                pass_fail(&mut ok, c.flux_spread <= 0.01),
                mean,
                c.exact_flux,
                c.runtime_s,
                pass_fail(&mut ok, c.runtime_s < CASE_BUDGET_S)
            );
            parts.push(s);
        }
        Ok((ok, parts.join("; ")))
    }

    fn c2(&self) -> Result<(bool, String)> {
        let (rep, _) = self.sweep()?;
        let mut worst = 0.0f64;
        let mut n = 0;
        for r in rep.rows.iter().filter(|r| r.ok()) {
            worst = worst.max(r.flux1_scaled.abs()).max(r.flux2_scaled.abs());
            n += 1;
        }
        for f in self.fixtures()? {
            for i in 0..2 {
                if let Some(v) = f.solution.scaled_flux(i) {
                    worst = worst.max(v.abs());
                }
            }
            n += 1;
        }
        let failed = rep.rows.iter().filter(|r| !r.ok()).count();
        Ok((
            worst <= 1e-8 && failed == 0,
            format!("max energy-scaled |flux| {worst:.2e} over {n} solves (limit 1e-8), {failed} failed solves"),
        ))
    }

    fn c3(&self) -> Result<(bool, String)> {
        let (rep, _) = self.sweep()?;
        let base = self.spec.base_geometry()?;
        let (lo, hi) = base.phi_range();
        let mut worst = f64::NEG_INFINITY;
        let mut check = |u: f64, lo: f64, hi: f64| {
            worst = worst.max(lo - u).max(u - hi);
        };
        for r in rep.rows.iter().filter(|r| r.ok()) {
            check(r.u1, lo, hi);
            check(r.u2, lo, hi);
        }
        for f in self.fixtures()? {
            let (lo, hi) = f.geometry.phi_range();
            for u in [f.solution.u1, f.solution.u2].into_iter().flatten() {
                check(u, lo, hi);
            }
        }
        Ok((
            worst <= 1e-8,
            format!("largest excursion of U1, U2 outside [inf phi, sup phi]: {worst:.3e} (limit 1e-8)"),
        ))
    }

    fn c4(&self) -> Result<(bool, String)> {
        let (rep, _) = self.sweep()?;
        let osc = {
            let (lo, hi) = self.spec.base_geometry()?.phi_range();
            hi - lo
        };
        let mut ok = true;
        let mut worst = 0.0f64;
        for r in rep.rows.iter().filter(|r| r.ok()) {
            worst = worst.max((r.u1 + r.u2).abs() / osc);
        }
        for f in self.fixtures()?.iter().filter(|f| f.label.starts_with("discs")) {
            worst = worst.max((f.solution.u1.unwrap_or(0.0) + f.solution.u2.unwrap_or(0.0)).abs() / osc);
        }
        let mut parts = vec![format!(
            "max |U1+U2|/osc {worst:.2e} {}",
            pass_fail(&mut ok, worst <= 1e-6)
        )];
        for s in rep.regimes.iter().filter(|s| s.p >= 1.5) {
            let f = s.flux_estimate().unwrap_or(f64::NAN);
            parts.push(format!("F(p={}) = {f:.4} {}", s.p, pass_fail(&mut ok, f > 0.0)));
        }
        for f in self.fixtures()?.iter().filter(|f| f.label.starts_with("discs") && f.solution.p >= 1.5) {
            let v = analysis::cross_section_flux(&f.solution, &f.mesh, &f.geometry, 0.1)?.value;
            parts.push(format!(
                "neck flux r=0.1 ({}) = {v:.4} {}",
                f.label,
                pass_fail(&mut ok, v > 0.0)
            ));
        }
        Ok((ok, parts.join("; ")))
    }

    fn c5(&self) -> Result<(bool, String)> {
        let (rep, secs) = self.sweep()?;
        let mut ok = true;
        let mut parts = Vec::new();
        for s in &rep.regimes {
            let tol = if s.branch == Branch::Sub { 0.1 } else { 0.07 };
            match &s.slope {
                Some(f) if f.points == self.spec.eps.len() => parts.push(format!(
                    "p={}: slope {:.4} vs {:.4}±{tol} {}",
                    s.p,
                    f.slope,
                    s.expected_slope,
                    pass_fail(&mut ok, (f.slope - s.expected_slope).abs() <= tol)
                )),
                _ => {
                    ok = false;
                    parts.push(format!("p={}: slope unavailable {:?}", s.p, s.slope_note));
                }
            }
        }
        parts.push(format!(
            "sweep {:.1}s {}",
            secs,
            pass_fail(&mut ok, *secs < SWEEP_BUDGET_S)
        ));
        Ok((ok, parts.join("; ")))
    }

    fn c6(&self) -> Result<(bool, String)> {
        let (rep, _) = self.sweep()?;
        let rows = rep.rows_for(2.0);
        let s = rep.regime(2.0).ok_or_else(|| NeckError::Config("sweep lacks p=2".into()))?;
        if rows.len() < 2 {
            return Err(NeckError::Fit("need two eps rows at p=2".into()));
        }
        let (a, b) = (rows[rows.len() - 2], rows[rows.len() - 1]);
        let var = ((a.ugap_over_theta - b.ugap_over_theta) / b.ugap_over_theta).abs();
        let fhat = s.ugap_limit.as_ref().and_then(|u| u.flux_implied).unwrap_or(f64::NAN);
        let finf = s.flux_extrapolation.as_ref().map(|f| f.f_inf).unwrap_or(f64::NAN);
        let rel = ((fhat - finf) / finf).abs();
        let mut ok = true;
        let detail = format!(
            "(U1-U2)/sqrt(eps) {:.5} -> {:.5}, variation {:.2}% {}; implied flux {fhat:.4} vs extrapolated {finf:.4}, {:.2}% {}",
            a.ugap_over_theta,
            b.ugap_over_theta,
            100.0 * var,
            pass_fail(&mut ok, var < 0.1),
            100.0 * rel,
            pass_fail(&mut ok, rel <= 0.15)
        );
        Ok((ok, detail))
    }

    fn c7(&self) -> Result<(bool, String)> {
        let (rep, _) = self.sweep()?;
        let p_sub = self
            .spec
            .p
            .iter()
            .copied()
            .find(|&p| Regime::new(p, DIM).map(|r| r.branch == Branch::Sub).unwrap_or(false))
            .ok_or_else(|| NeckError::Config("sweep has no subcritical exponent".into()))?;
        let rows = rep.rows_for(p_sub);
        if rows.len() < 2 {
            return Err(NeckError::Fit("need two eps rows".into()));
        }
        let (a, b) = (rows[rows.len() - 2], rows[rows.len() - 1]);
        let var = ((a.ugap - b.ugap) / b.ugap).abs();
        let s = rep.regime(p_sub).unwrap();
        let limit = s.ugap_limit.as_ref().map(|u| u.limit).unwrap_or(f64::NAN);
        let f_sub = s.flux_extrapolation.as_ref().map(|f| f.f_inf).unwrap_or(f64::NAN);
        let f2 = rep.regime(2.0).and_then(|s| s.flux_estimate()).unwrap_or(f64::NAN);
        let ratio = (f_sub / f2).abs();
        let mut ok = true;
        let detail = format!(
            "p={p_sub}: U-gap {:.5} -> {:.5}, variation {:.2}% {}; extrapolated limit {limit:.4} {}; F_inf {f_sub:.4} = {:.2}% of |F(p=2)| = {f2:.4} {}",
            a.ugap,
            b.ugap,
            100.0 * var,
            pass_fail(&mut ok, var < 0.05),
            pass_fail(&mut ok, limit.abs() > 1e-3 && b.ugap.abs() > 1e-3),
            100.0 * ratio,
            pass_fail(&mut ok, ratio <= 0.05)
        );
        Ok((ok, detail))
    }

    fn c8(&self) -> Result<(bool, String)> {
        let t = Instant::now();
        let mut ok = true;
        let mut parts = Vec::new();
        for (n, p) in [(2usize, 2.0), (2, 3.0), (3, 2.0), (4, 2.5)] {
            let r = Regime::new(p, n)?;
            let h = GapHessian::identity_scaled(n - 1, 2.0);
            let lim = neck_integral_limit(&r, &h)?;
            let inv_k = 1.0 / k_const(&h, &r)?;
            let rel = ((lim.value - inv_k) / inv_k).abs();
            let mut s = format!(
                "(n={n},p={p}) {:.6} vs 1/K {:.6} ({:.3}%) {}",
                lim.value,
                inv_k,
                100.0 * rel,
                pass_fail(&mut ok, rel <= 0.01)
            );
            if n == 2 && p == 2.0 {
                let d = (lim.value - std::f64::consts::PI).abs();
                s.push_str(&format!(", |value - pi| {d:.2e} {}", pass_fail(&mut ok, d <= 1e-6)));
            }
            parts.push(s);
        }
        let secs = t.elapsed().as_secs_f64();
        parts.push(format!("{secs:.2}s {}", pass_fail(&mut ok, secs < ORACLE_BUDGET_S)));
        Ok((ok, parts.join("; ")))
    }

    fn c9(&self) -> Result<(bool, String)> {
        let fit = decay_channel_fit(2.0, 1e-3)?;
        let ok = fit.r_squared >= 0.98 && fit.c2_hat > 0.0;
        Ok((
            ok,
            format!(
                "p=2, eps=1e-3: C2_hat {:.4}, r^2 {:.5} over {} samples",
                fit.c2_hat,
                fit.r_squared,
                fit.samples.len()
            ),
        ))
    }

    fn c10(&self) -> Result<(bool, String)> {
        let (rep, _) = self.sweep()?;
        let eps = *self.spec.eps.last().unwrap();
        let mut ok = true;
        let mut parts = Vec::new();
        for &p in &self.spec.p {
            let branch = Regime::new(p, DIM)?.branch;
            if branch == Branch::Critical {
                continue;
            }
            let Some(c) = rep.comparisons.iter().find(|c| c.p == p && c.eps == eps && c.xprime == 0.0) else {
                ok = false;
                parts.push(format!("p={p}: no probe at x'=0"));
                continue;
            };
            parts.push(format!(
                "p={p}: D_n {:.4} vs {:.4} ({:.2}%) {}, transverse {:.1e} {}",
                c.measured,
                c.predicted,
                100.0 * c.error,
                pass_fail(&mut ok, c.relative && c.error <= 0.1 && !c.excluded),
                c.transverse_ratio,
                pass_fail(&mut ok, c.transverse_ratio <= 0.1)
            ));
        }
        Ok((ok, parts.join("; ")))
    }

    fn c11(&self) -> Result<(bool, String)> {
        let eps = *self.spec.eps.last().unwrap();
        let g = self.spec.base_geometry()?.with_eps(eps)?;
        let m = cached_mesh(&g, &self.spec.mesh_options(), self.spec.refinements)?;
        let sol = solve(&m, &g, &self.spec.solve_config(2.0))?;
        let points = holder_points(&g, eps)?;
        let scan = holder_quotient_scan(&sol, &m, &g, 0.5, &points)?;
        let lo = scan.points.first().map(|p| p.delta_lower).unwrap_or(f64::NAN);
        let hi = scan.points.last().map(|p| p.delta_lower).unwrap_or(f64::NAN);
        let spread = scan.spread();
        let centre = holder_quotient_scan(&sol, &m, &g, 0.5, &[analysis::midline(&g, 0.0)?])?;
        Ok((
            spread <= 3.0 && scan.skipped.is_empty() && (hi / lo) >= 99.0,
            format!(
                "p=2, eps={eps:e}: quotients {:?} over delta_lower {lo:.1e}..{hi:.1e}, spread {spread:.3} (limit 3); x'=0 quotient {:.4} reported separately",
                scan.points.iter().map(|p| (p.quotient * 1e4).round() / 1e4).collect::<Vec<_>>(),
                centre.max_quotient
            ),
        ))
    }

    fn c12(&self) -> Result<(bool, String)> {
        let mut ok = true;
        let mut parts = Vec::new();
        let fd = fd_gradient_check(50, 7)?;
        parts.push(format!("FD gradient rel. error {fd:.2e} {}", pass_fail(&mut ok, fd <= 1e-6)));
        let fixtures = self.fixtures()?;
        let mut worst_rise = 0.0f64;
        let mut worst_dmp = 0.0f64;
        for f in fixtures {
            worst_rise = worst_rise.max(energy_rise(&f.solution));
            worst_dmp = worst_dmp.max(max_principle_excursion(&f.geometry, &f.solution));
        }
        parts.push(format!(
            "max relative energy rise per Newton step {worst_rise:.1e} {}",
            pass_fail(&mut ok, worst_rise <= 1e-12)
        ));
        parts.push(format!(
            "max principle excursion {worst_dmp:.1e} osc {}",
            pass_fail(&mut ok, worst_dmp <= 1e-8)
        ));
        let g = self.spec.base_geometry()?.with_eps(1e-2)?;
        let m = cached_mesh(&g, &MeshOptions::new(0.2, 6), 0)?;
        for p in [1.3, 2.0, 3.0] {
            let cfg = self.spec.solve_config(p);
            let d = uniqueness_probe(&m, &g, &cfg, 3, self.spec.seed)?;
            let limit = if p < 1.5 { 100.0 } else { 10.0 } * cfg.newton_tol;
            parts.push(format!("uniqueness p={p} {d:.1e} (limit {limit:.0e}) {}", pass_fail(&mut ok, d <= limit)));
        }
        Ok((ok, parts.join("; ")))
    }
}

/// Holder scan stations: `δ̲` from `2 eps` to `200 eps`, offset from the centre.
pub fn holder_points(g: &Geometry, eps: f64) -> Result<Vec<crate::geometry::NeckPoint>> {
    [2.0, 10.0, 40.0, 200.0]
        .iter()
        .map(|k| analysis::midline(g, ((k - 1.0) * eps).sqrt()))
        .collect()
}

/// Solves the zero-data channel problem and fits the decay model on the midline.
pub fn decay_channel_fit(p: f64, eps: f64) -> Result<analysis::DecayFit> {
    let discs = Geometry::symmetric_discs(1.0, eps)?;
    let ch = Geometry::channel(discs.gap.clone().unwrap(), eps, 1.0)?;
    let m = cached_mesh(&ch, &MeshOptions::new(0.05, 6), 0)?;
    let sol = solve(&m, &ch, &SolveConfig::new(p))?;
    let xs: Vec<f64> = (0..13).map(|k| 0.2 + 0.05 * k as f64).collect();
    decay_fit(&sol, &m, &ch, &xs)
}

/// Largest relative gap between the assembled gradient and central differences
/// of the assembled energy on a random mesh, over p in {1.3, 2, 3}.
pub fn fd_gradient_check(n: usize, seed: u64) -> Result<f64> {
    let m = random_mesh(n, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for p in [1.3, 2.0, 3.0] {
        let eta = SolveConfig::new(p).eta_final();
        let v: Vec<f64> = (0..m.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = assemble_energy(&m, &v, p, eta)?;
        let gmax = a.gradient.iter().fold(0.0f64, |x, y| x.max(y.abs()));
        for i in 0..v.len() {
            let h = 1e-5;
            let mut w = v.clone();
            w[i] = v[i] + h;
            let ep = assemble_energy(&m, &w, p, eta)?.energy;
            w[i] = v[i] - h;
            let em = assemble_energy(&m, &w, p, eta)?.energy;
            let fd = (ep - em) / (2.0 * h);
            worst = worst.max((fd - a.gradient[i]).abs() / gmax);
        }
    }
    Ok(worst)
}

/// Largest relative energy increase between consecutive Newton iterates.
pub fn energy_rise(sol: &Solution) -> f64 {
    sol.energy_history
        .iter()
        .flat_map(|h| h.windows(2).map(|w| (w[1] - w[0]) / w[0].abs().max(f64::MIN_POSITIVE)))
        .fold(0.0, f64::max)
}

/// Largest nodal excursion outside `[min φ, max φ]`, in units of `osc φ`.
pub fn max_principle_excursion(g: &Geometry, sol: &Solution) -> f64 {
    let (lo, hi) = g.phi_range();
    let osc = (hi - lo).max(f64::MIN_POSITIVE);
    sol.nodal_values
        .iter()
        .map(|u| (lo - u).max(u - hi).max(0.0) / osc)
        .fold(0.0, f64::max)
}

fn build_fixtures(spec: &SweepSpec) -> Result<Vec<Fixture>> {
    let eps = 1e-3;
    let mut out = Vec::new();
    let discs = spec.base_geometry()?.with_eps(eps)?;
    let parab = Geometry::parabolic(
        1.0,
        2.0,
        eps,
        BoundaryData::Poly {
            terms: vec![
                PolyTerm { coef: 1.0, px: 0, py: 1 },
                PolyTerm { coef: 0.5, px: 1, py: 0 },
            ],
        },
    )?;
    for (label, g, ps) in [("discs", discs, vec![1.3, 1.5, 2.0, 3.0]), ("parabolic", parab, vec![1.3, 2.0, 3.0])] {
        let m = cached_mesh(&g, &spec.mesh_options(), 0)?;
        for p in ps {
            let solution = solve(&m, &g, &spec.solve_config(p))?;
            out.push(Fixture {
                label: format!("{label} p={p}"),
                geometry: g.clone(),
                mesh: m.clone(),
                solution,
            });
        }
    }
    Ok(out)
}
