//! Discrete minimization of the regularized p-Dirichlet energy over piecewise
//! linear potentials that are constant on each inclusion.

mod assemble;
mod dofs;
mod newton;

pub use assemble::{assemble_energy, element_gradient, elements, vertex_residual, Assembly, Element};
pub use dofs::{DofMap, VertexDof};
pub use newton::LineSearch;

use crate::error::{NeckError, Result};
use crate::geometry::{Geometry, InclusionCondition};
use crate::mesh::{BoundaryTag, TriMesh};
use newton::Problem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveConfig {
    pub p: f64,
    /// Strictly decreasing; the last entry is the η of the returned solution.
    pub eta_schedule: Vec<f64>,
    pub newton_tol: f64,
    /// Tolerance of the intermediate η stages.
    pub stage_tol: f64,
    pub max_newton_iters: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
    /// Start from the p=2 solution.
    pub warm_start: bool,
}

impl SolveConfig {
    pub fn new(p: f64) -> Self {
        SolveConfig {
            p,
            eta_schedule: Self::default_schedule(p),
            newton_tol: 1e-10,
            stage_tol: 1e-6,
            max_newton_iters: 200,
            armijo_c: 1e-4,
            backtrack: 0.5,
            warm_start: true,
        }
    }

    pub fn default_schedule(p: f64) -> Vec<f64> {
        if p < 2.0 {
            vec![1e-1, 1e-2, 1e-3, 1e-4]
        } else {
            vec![0.0]
        }
    }

    pub fn eta_final(&self) -> f64 {
        *self.eta_schedule.last().unwrap_or(&0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(NeckError::Config(format!("p must exceed 1, got {}", self.p)));
        }
        if self.eta_schedule.is_empty() {
            return Err(NeckError::Config("empty eta schedule".into()));
        }
        if self.eta_schedule.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(NeckError::Config("eta schedule must be strictly decreasing".into()));
        }
        if !(self.eta_final() >= 0.0) {
            return Err(NeckError::Config("final eta must be nonnegative".into()));
        }
        if !(self.newton_tol > 0.0) || !(self.stage_tol > 0.0) {
            return Err(NeckError::Config("tolerances must be positive".into()));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) || !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(NeckError::Config("line-search parameters must lie in (0,1)".into()));
        }
        Ok(())
    }

    fn line_search(&self) -> LineSearch {
        LineSearch {
            c: self.armijo_c,
            backtrack: self.backtrack,
            ..LineSearch::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageReport {
    pub eta: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub p: f64,
    pub eta_final: f64,
    pub nodal_values: Vec<f64>,
    pub u1: Option<f64>,
    pub u2: Option<f64>,
    pub element_gradients: Vec<[f64; 2]>,
    /// Regularized energy at the final η.
    pub energy: f64,
    pub energy_unregularized: f64,
    /// Energy-scaled KKT residual of the final stage.
    pub kkt_residual: f64,
    /// Net current out of each inclusion, in physical units.
    pub flux1: Option<f64>,
    pub flux2: Option<f64>,
    /// Oscillation of the boundary data.
    pub osc: f64,
    pub newton_iterations: usize,
    /// Energy after every accepted Newton iterate, per stage.
    pub energy_history: Vec<Vec<f64>>,
    pub stages: Vec<StageReport>,
}

impl Solution {
    /// Multiplier turning a flux into energy-scaled units `F·osc/E`.
    pub fn flux_scale(&self) -> f64 {
        if self.energy > 0.0 {
            self.osc / self.energy
        } else {
            0.0
        }
    }

    pub fn scaled_flux(&self, i: usize) -> Option<f64> {
        let f = if i == 0 { self.flux1 } else { self.flux2 };
        f.map(|f| f * self.flux_scale())
    }

    pub fn ugap(&self) -> Option<f64> {
        Some(self.u1? - self.u2?)
    }
}

fn inclusion_value(g: &Geometry, dofs: &DofMap, x: &[f64], i: usize) -> Option<f64> {
    match g.inclusions.get(i)?.condition {
        InclusionCondition::Floating => dofs.inclusion_dof[i].map(|d| x[d]),
        InclusionCondition::Fixed { value } => Some(value),
    }
}

/// Net current `∫ a·ν` out of each tagged boundary, from the nodal residual.
pub fn boundary_fluxes(m: &TriMesh, nodal: &[f64], p: f64, eta: f64) -> [f64; 3] {
    let r = vertex_residual(m, nodal, p, eta);
    let tags = m.vertex_tags();
    let mut out = [0.0; 3];
    for (v, t) in tags.iter().enumerate() {
        let k = match t {
            Some(BoundaryTag::Outer) => 0,
            Some(BoundaryTag::Inc1) => 1,
            Some(BoundaryTag::Inc2) => 2,
            None => continue,
        };
        out[k] -= r[v] / p;
    }
    out
}

fn finish(
    prob: &Problem,
    g: &Geometry,
    cfg: &SolveConfig,
    x: &[f64],
    residual: f64,
    iterations: usize,
    history: Vec<Vec<f64>>,
    stages: Vec<StageReport>,
) -> Solution {
    let m = prob.mesh;
    let nodal = prob.dofs.expand(x);
    let eta = cfg.eta_final();
    let element_gradients: Vec<[f64; 2]> = prob
        .els
        .iter()
        .zip(&m.triangles)
        .map(|(e, t)| element_gradient(e, t.map(|i| nodal[i])))
        .collect();
    let energy = newton::energy_at(m, &prob.els, &nodal, cfg.p, eta);
    let energy_unregularized = if eta == 0.0 {
        energy
    } else {
        newton::energy_at(m, &prob.els, &nodal, cfg.p, 0.0)
    };
    let fl = boundary_fluxes(m, &nodal, cfg.p, eta);
    let n_inc = g.inclusions.len();
    Solution {
        p: cfg.p,
        eta_final: eta,
        u1: inclusion_value(g, &prob.dofs, x, 0),
        u2: inclusion_value(g, &prob.dofs, x, 1),
        flux1: (n_inc > 0).then_some(fl[1]),
        flux2: (n_inc > 1).then_some(fl[2]),
        nodal_values: nodal,
        element_gradients,
        energy,
        energy_unregularized,
        kkt_residual: residual,
        osc: prob.osc,
        newton_iterations: iterations,
        energy_history: history,
        stages,
    }
}

fn run_stages(prob: &Problem, cfg: &SolveConfig, x0: Vec<f64>) -> Result<(Vec<f64>, f64, usize, Vec<Vec<f64>>, Vec<StageReport>)> {
    let mut x = x0;
    let mut total = 0;
    let mut history = Vec::new();
    let mut stages = Vec::new();
    let mut residual = f64::INFINITY;
    let last = cfg.eta_schedule.len() - 1;
    for (k, &eta) in cfg.eta_schedule.iter().enumerate() {
        let tol = if k == last { cfg.newton_tol } else { cfg.stage_tol };
        let out = prob.newton(x, cfg.p, eta, tol, cfg.max_newton_iters, cfg.line_search())?;
        log::debug!(
            "p={} eta={eta:e}: {} Newton steps, residual {:.3e}",
            cfg.p,
            out.iterations,
            out.residual
        );
        total += out.iterations;
        residual = out.residual;
        history.push(out.energies);
        stages.push(StageReport {
            eta,
            iterations: out.iterations,
            residual,
        });
        x = out.x;
    }
    Ok((x, residual, total, history, stages))
}

fn setup<'a>(m: &'a TriMesh, g: &Geometry, cfg: &SolveConfig) -> Result<Problem<'a>> {
    cfg.validate()?;
    if m.triangles.is_empty() {
        return Err(NeckError::domain("empty mesh"));
    }
    let dofs = DofMap::new(m, g)?;
    let (lo, hi) = g.phi_range();
    Problem::new(m, dofs, hi - lo)
}

fn initial_guess(prob: &Problem, g: &Geometry, cfg: &SolveConfig) -> Result<Vec<f64>> {
    let (lo, hi) = g.phi_range();
    let mid = 0.5 * (lo + hi);
    let x0 = vec![mid; prob.dofs.n_free];
    if !cfg.warm_start {
        return Ok(x0);
    }
    let lin = prob.newton(x0, 2.0, 0.0, cfg.newton_tol.min(1e-8), 5, cfg.line_search())?;
    Ok(lin.x)
}

fn solve_from(prob: &Problem, g: &Geometry, cfg: &SolveConfig, x0: Vec<f64>) -> Result<Solution> {
    if prob.osc == 0.0 || prob.dofs.n_free == 0 {
        // constant data (or nothing to solve): the interpolant is the minimizer
        let x = if prob.osc == 0.0 {
            vec![g.phi_range().0; prob.dofs.n_free]
        } else {
            x0
        };
        let stages = vec![StageReport {
            eta: cfg.eta_final(),
            iterations: 0,
            residual: 0.0,
        }];
        return Ok(finish(prob, g, cfg, &x, 0.0, 0, vec![], stages));
    }
    let (x, residual, iters, history, stages) = run_stages(prob, cfg, x0)?;
    Ok(finish(prob, g, cfg, &x, residual, iters, history, stages))
}

/// Minimizes `∫(η²+|∇v|²)^(p/2)` over P1 fields equal to φ on the outer
/// boundary and constant on each inclusion.
pub fn solve(m: &TriMesh, g: &Geometry, cfg: &SolveConfig) -> Result<Solution> {
    let prob = setup(m, g, cfg)?;
    let x0 = if prob.osc == 0.0 {
        vec![]
    } else {
        initial_guess(&prob, g, cfg)?
    };
    solve_from(&prob, g, cfg, x0)
}

/// Solves from the given nodal field (restricted to the unknowns).
pub fn solve_with_initial(m: &TriMesh, g: &Geometry, cfg: &SolveConfig, initial: &[f64]) -> Result<Solution> {
    if initial.len() != m.vertices.len() {
        return Err(NeckError::domain("initial guess length does not match the mesh"));
    }
    let prob = setup(m, g, cfg)?;
    let x0 = prob.dofs.restrict(initial);
    solve_from(&prob, g, cfg, x0)
}

/// Solves from `n_starts` random initial fields and returns the largest
/// relative L² distance between any two solutions.
pub fn uniqueness_probe(m: &TriMesh, g: &Geometry, cfg: &SolveConfig, n_starts: usize, seed: u64) -> Result<f64> {
    if n_starts < 2 {
        return Err(NeckError::Config("uniqueness probe needs at least two starts".into()));
    }
    let (lo, hi) = g.phi_range();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cold = cfg.clone();
    cold.warm_start = false;
    let mut sols = Vec::with_capacity(n_starts);
    for _ in 0..n_starts {
        let init: Vec<f64> = (0..m.vertices.len())
            .map(|_| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
            .collect();
        sols.push(solve_with_initial(m, g, &cold, &init)?.nodal_values);
    }
    let mut worst = 0.0f64;
    for i in 0..n_starts {
        for j in i + 1..n_starts {
            let num: f64 = sols[i].iter().zip(&sols[j]).map(|(a, b)| (a - b).powi(2)).sum();
            let den: f64 = sols[i].iter().map(|a| a * a).sum::<f64>().max(sols[j].iter().map(|b| b * b).sum());
            let d = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
            worst = worst.max(d);
        }
    }
    Ok(worst)
}
