//! Sweep orchestration, report persistence and the acceptance matrix.

pub mod acceptance;
mod cache;
pub mod manufactured;
mod output;

pub use cache::{cached_mesh, CACHE_ENV};
pub use output::{write_report, write_solution, ROW_COLUMNS};

use crate::analysis::{self, Locator, ProbeRow};
use crate::asymptotics::{
    extrapolate_flux, extrapolate_in_eps, fit_loglog_slope, fit_ugap_limit, lower_bound_region,
    predict_expansion, theta, Branch, FluxExtrapolation, FluxModel, GapHessian, LowerBoundParams,
    Regime, SlopeFit, UgapLimit,
};
use crate::error::{NeckError, Result};
use crate::geometry::GeometryConfig;
use crate::geometry::Geometry;
use crate::mesh::{MeshOptions, TriMesh};
use crate::solver::{solve, Solution, SolveConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Spatial dimension of every PDE solve.
pub const DIM: usize = 2;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Geometry config file; the symmetric disc example when absent.
    #[serde(default)]
    pub geometry: Option<PathBuf>,
    pub p: Vec<f64>,
    pub eps: Vec<f64>,
    #[serde(default = "default_h")]
    pub target_h: f64,
    #[serde(default)]
    pub refinements: usize,
    #[serde(default = "default_layers")]
    pub neck_layers: usize,
    /// `x'` stations of the gradient probes.
    #[serde(default = "default_probes")]
    pub probes: Vec<f64>,
    #[serde(default = "default_radii")]
    pub flux_radii: Vec<f64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub newton_tol: f64,
    /// Re-solve p < 2 cases at ten times the final η and record the U-gap change.
    #[serde(default = "default_true")]
    pub eta_sensitivity: bool,
}

fn default_h() -> f64 {
    0.1
}
fn default_layers() -> usize {
    6
}
fn default_probes() -> Vec<f64> {
    vec![0.0, 0.02, 0.05]
}
fn default_radii() -> Vec<f64> {
    vec![0.5, 0.3, 0.2, 0.1]
}
fn default_tol() -> f64 {
    1e-10
}
fn default_true() -> bool {
    true
}

pub const CANONICAL_P: [f64; 3] = [1.3, 2.0, 3.0];
pub const CANONICAL_EPS: [f64; 5] = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4];

/// Relative U-gap change above which a case is flagged as η-sensitive.
pub const ETA_SENSITIVITY_LIMIT: f64 = 0.01;

impl SweepSpec {
    pub fn canonical() -> Self {
        SweepSpec {
            geometry: None,
            p: CANONICAL_P.to_vec(),
            eps: CANONICAL_EPS.to_vec(),
            target_h: default_h(),
            refinements: 0,
            neck_layers: default_layers(),
            probes: default_probes(),
            flux_radii: default_radii(),
            out: None,
            workers: None,
            seed: 0,
            newton_tol: default_tol(),
            eta_sensitivity: true,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: SweepSpec = toml::from_str(text).map_err(|e| NeckError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Reads a spec; relative paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut s = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for p in [&mut s.geometry, &mut s.out].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p.is_empty() || self.eps.is_empty() {
            return Err(NeckError::Config("p and eps lists must be non-empty".into()));
        }
        if let Some(p) = self.p.iter().find(|p| !(**p > 1.0)) {
            return Err(NeckError::Config(format!("p must exceed 1, got {p}")));
        }
        if self.eps.windows(2).any(|w| !(w[1] < w[0])) || !(self.eps[self.eps.len() - 1] > 0.0) {
            return Err(NeckError::Config("eps must be positive and strictly decreasing".into()));
        }
        if !(self.target_h > 0.0) || self.neck_layers == 0 || !(self.newton_tol > 0.0) {
            return Err(NeckError::Config("target_h, neck_layers and newton_tol must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(NeckError::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn base_geometry(&self) -> Result<Geometry> {
        let cfg = match &self.geometry {
            Some(p) => GeometryConfig::load(p)?,
            None => GeometryConfig::default(),
        };
        cfg.build()
    }

    pub fn mesh_options(&self) -> MeshOptions {
        MeshOptions::new(self.target_h, self.neck_layers)
    }

    pub fn solve_config(&self, p: f64) -> SolveConfig {
        let mut c = SolveConfig::new(p);
        c.newton_tol = self.newton_tol;
        c
    }
}

/// One solved `(p, eps)` case.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseRow {
    pub p: f64,
    pub eps: f64,
    pub u1: f64,
    pub u2: f64,
    pub ugap: f64,
    pub ugap_over_theta: f64,
    pub maxgrad: f64,
    pub maxgrad_at: [f64; 2],
    /// `(r, upward current through the lower neck surface within |x'| < r)`.
    pub flux_r: Vec<(f64, f64)>,
    pub kkt_residual: f64,
    pub flux1_scaled: f64,
    pub flux2_scaled: f64,
    /// Sum of all boundary currents, energy-scaled.
    pub conservation_scaled: f64,
    pub energy: f64,
    pub newton_iterations: usize,
    pub eta_final: f64,
    /// Relative U-gap change when the final η is multiplied by 10.
    pub eta_sensitivity: Option<f64>,
    pub vertices: usize,
    pub triangles: usize,
    pub neck_layers: Option<usize>,
    pub runtime_s: f64,
    pub status: String,
}

impl CaseRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }

    fn failed(p: f64, eps: f64, msg: String) -> Self {
        CaseRow {
            p,
            eps,
            u1: f64::NAN,
            u2: f64::NAN,
            ugap: f64::NAN,
            ugap_over_theta: f64::NAN,
            maxgrad: f64::NAN,
            maxgrad_at: [f64::NAN; 2],
            flux_r: Vec::new(),
            kkt_residual: f64::NAN,
            flux1_scaled: f64::NAN,
            flux2_scaled: f64::NAN,
            conservation_scaled: f64::NAN,
            energy: f64::NAN,
            newton_iterations: 0,
            eta_final: f64::NAN,
            eta_sensitivity: None,
            vertices: 0,
            triangles: 0,
            neck_layers: None,
            runtime_s: 0.0,
            status: format!("failed: {msg}"),
        }
    }
}

/// Per-exponent reduction over the ε rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeSummary {
    pub p: f64,
    pub branch: Branch,
    pub slope: Option<SlopeFit>,
    pub slope_note: Option<String>,
    pub expected_slope: f64,
    pub ugap_limit: Option<UgapLimit>,
    /// `(r, flux extrapolated in eps)`.
    pub flux_eps_limit: Vec<(f64, f64)>,
    pub flux_extrapolation: Option<FluxExtrapolation>,
    pub notes: Vec<String>,
}

impl RegimeSummary {
    /// Best available flux: the r-extrapolation, else the U-gap implied flux.
    pub fn flux_estimate(&self) -> Option<f64> {
        self.flux_extrapolation
            .as_ref()
            .map(|f| f.f_inf)
            .or_else(|| self.ugap_limit.as_ref().and_then(|u| u.flux_implied))
    }
}

/// Measured vs predicted `D_n u` at one probe.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub p: f64,
    pub eps: f64,
    pub xprime: f64,
    pub measured: f64,
    pub predicted: f64,
    /// Relative error, or absolute error when the prediction is zero.
    pub error: f64,
    pub relative: bool,
    /// `δ(x)^(1/2)`, the reference error scale.
    pub delta_sqrt: f64,
    pub transverse_ratio: f64,
    pub excluded: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub geometry: String,
    pub chart_radius: f64,
    pub seed: u64,
    pub rows: Vec<CaseRow>,
    pub regimes: Vec<RegimeSummary>,
    pub probes: Vec<ProbeRow>,
    pub comparisons: Vec<ComparisonRow>,
    pub warnings: Vec<String>,
}

impl SweepReport {
    pub fn row(&self, p: f64, eps: f64) -> Option<&CaseRow> {
        self.rows.iter().find(|r| r.p == p && r.eps == eps)
    }

    pub fn regime(&self, p: f64) -> Option<&RegimeSummary> {
        self.regimes.iter().find(|r| r.p == p)
    }

    pub fn rows_for(&self, p: f64) -> Vec<&CaseRow> {
        let mut v: Vec<&CaseRow> = self.rows.iter().filter(|r| r.p == p).collect();
        v.sort_by(|a, b| b.eps.total_cmp(&a.eps));
        v
    }
}

/// Probe stations kept for the predictions: `(x', grad, delta)` per case.
#[derive(Debug, Clone)]
struct CaseProbes {
    p: f64,
    eps: f64,
    points: Vec<(f64, f64, [f64; 2], f64)>,
}

/// A solved case together with its measurements.
pub struct CaseOutcome {
    pub row: CaseRow,
    pub solution: Option<Solution>,
}

/// Solves one case on a given mesh and measures it.
pub fn run_case(g: &Geometry, m: &TriMesh, spec: &SweepSpec, p: f64) -> CaseOutcome {
    let t = Instant::now();
    match measure_case(g, m, spec, p) {
        Ok((mut row, sol)) => {
            row.runtime_s = t.elapsed().as_secs_f64();
            CaseOutcome {
                row,
                solution: Some(sol),
            }
        }
        Err(e) => {
            log::warn!("case p={p} eps={:e} failed: {e}", g.eps);
            CaseOutcome {
                row: CaseRow::failed(p, g.eps, e.to_string()),
                solution: None,
            }
        }
    }
}

fn measure_case(g: &Geometry, m: &TriMesh, spec: &SweepSpec, p: f64) -> Result<(CaseRow, Solution)> {
    let cfg = spec.solve_config(p);
    let sol = solve(m, g, &cfg)?;
    let regime = Regime::new(p, DIM)?;
    let ugap = sol.ugap().unwrap_or(f64::NAN);
    let mg = analysis::max_gradient(&sol, m, 0.5);
    let flux_r = if g.inclusions.len() == 2 {
        spec.flux_radii
            .iter()
            .filter(|r| **r < g.chart_radius)
            .map(|&r| Ok((r, analysis::cross_section_flux(&sol, m, g, r)?.value)))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let cons = analysis::boundary_conservation(&sol, m)?;
    let eta_sensitivity = if spec.eta_sensitivity && sol.eta_final > 0.0 {
        let mut coarse = cfg.clone();
        let target = 10.0 * sol.eta_final;
        coarse.eta_schedule.retain(|e| *e > target);
        coarse.eta_schedule.push(target);
        let other = solve(m, g, &coarse)?;
        other.ugap().map(|o| ((o - ugap) / ugap).abs())
    } else {
        None
    };
    let row = CaseRow {
        p,
        eps: g.eps,
        u1: sol.u1.unwrap_or(f64::NAN),
        u2: sol.u2.unwrap_or(f64::NAN),
        ugap,
        ugap_over_theta: ugap / theta(g.eps, &regime)?,
        maxgrad: mg.value,
        maxgrad_at: [mg.location.x, mg.location.y],
        flux_r,
        kkt_residual: sol.kkt_residual,
        flux1_scaled: sol.scaled_flux(0).unwrap_or(f64::NAN),
        flux2_scaled: sol.scaled_flux(1).unwrap_or(f64::NAN),
        conservation_scaled: cons.total * sol.flux_scale(),
        energy: sol.energy,
        newton_iterations: sol.newton_iterations,
        eta_final: sol.eta_final,
        eta_sensitivity,
        vertices: m.num_vertices(),
        triangles: m.num_triangles(),
        neck_layers: m.grading.neck_layers,
        runtime_s: 0.0,
        status: "ok".into(),
    };
    Ok((row, sol))
}

fn probe_case(g: &Geometry, m: &TriMesh, sol: &Solution, stations: &[f64]) -> Vec<(f64, f64, [f64; 2], f64)> {
    let loc = Locator::new(m);
    stations
        .iter()
        .filter_map(|&x| {
            let pt = analysis::midline(g, x).ok()?;
            let pr = analysis::probe_gradient(sol, &loc, g, pt).ok()?;
            Some((x, pt.xn, pr.grad, pr.delta_at_point))
        })
        .collect()
}

/// Exponent of the leading ε-correction of neck quantities.
pub fn eps_correction_exponent(regime: &Regime) -> Option<f64> {
    match regime.branch {
        Branch::Super | Branch::Sub => Some(regime.tail_exponent().abs()),
        Branch::Critical => None,
    }
}

/// r-model of the cross-section flux for a regime.
pub fn flux_model(regime: &Regime) -> FluxModel {
    match regime.branch {
        Branch::Sub => FluxModel::PowerLaw {
            exponent: regime.n as f64 + 1.0 - 2.0 * regime.p,
        },
        _ => FluxModel::Exponential,
    }
}

/// Blow-up exponent of `max|Du|` expected from the branch.
pub fn expected_slope(regime: &Regime) -> f64 {
    match regime.branch {
        Branch::Super => -(regime.n as f64 - 1.0) / (2.0 * (regime.p - 1.0)),
        Branch::Critical | Branch::Sub => -1.0,
    }
}

fn summarize(p: f64, rows: &[&CaseRow], hessian: &GapHessian) -> Result<RegimeSummary> {
    let regime = Regime::new(p, DIM)?;
    let ok: Vec<&CaseRow> = rows.iter().copied().filter(|r| r.ok()).collect();
    let mut notes = Vec::new();
    let (slope, slope_note) = match fit_loglog_slope(&ok.iter().map(|r| (r.eps, r.maxgrad)).collect::<Vec<_>>()) {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let gaps: Vec<(f64, f64)> = ok.iter().map(|r| (r.eps, r.ugap)).collect();
    let ugap_limit = match fit_ugap_limit(&gaps, &regime, hessian) {
        Ok(l) => {
            if let Some(w) = &l.warning {
                notes.push(format!("U-gap limit: {w}"));
            }
            Some(l)
        }
        Err(e) => {
            notes.push(format!("U-gap limit: {e}"));
            None
        }
    };
    let radii: Vec<f64> = ok.first().map(|r| r.flux_r.iter().map(|f| f.0).collect()).unwrap_or_default();
    let mut flux_eps_limit = Vec::new();
    for (k, &r) in radii.iter().enumerate() {
        let series: Vec<(f64, f64)> = ok.iter().filter_map(|row| row.flux_r.get(k).map(|f| (row.eps, f.1))).collect();
        let v = match (eps_correction_exponent(&regime), series.len()) {
            (Some(ex), n) if n >= 2 => extrapolate_in_eps(&series, ex)?,
            (_, n) if n >= 1 => series[n - 1].1,
            _ => continue,
        };
        flux_eps_limit.push((r, v));
    }
    if eps_correction_exponent(&regime).is_none() {
        notes.push("critical branch: cross-section fluxes taken at the smallest eps".into());
    }
    let flux_extrapolation = match extrapolate_flux(&flux_eps_limit, flux_model(&regime)) {
        Ok(f) => {
            if f.fallback {
                notes.push("flux extrapolation fell back to the smallest radius".into());
            }
            Some(f)
        }
        Err(e) => {
            notes.push(format!("flux extrapolation: {e}"));
            None
        }
    };
    Ok(RegimeSummary {
        p,
        branch: regime.branch,
        slope,
        slope_note,
        expected_slope: expected_slope(&regime),
        ugap_limit,
        flux_eps_limit,
        flux_extrapolation,
        notes,
    })
}

/// Relative error of a measured `D_n u` against a prediction (absolute when
/// the prediction vanishes).
pub fn compare_prediction(measured: f64, predicted: f64) -> (f64, bool) {
    if predicted == 0.0 {
        ((measured - predicted).abs(), false)
    } else {
        (((measured - predicted) / predicted).abs(), true)
    }
}

fn predictions(
    probes: &[CaseProbes],
    rows: &[CaseRow],
    regimes: &[RegimeSummary],
    hessian: &GapHessian,
) -> Result<(Vec<ProbeRow>, Vec<ComparisonRow>)> {
    let mut out_rows = Vec::new();
    let mut cmp = Vec::new();
    for cp in probes {
        let regime = Regime::new(cp.p, DIM)?;
        let Some(row) = rows.iter().find(|r| r.p == cp.p && r.eps == cp.eps) else {
            continue;
        };
        let input = match regime.branch {
            Branch::Sub => Some(row.ugap),
            _ => regimes.iter().find(|s| s.p == cp.p).and_then(|s| s.flux_estimate()),
        };
        let pred = match input {
            Some(v) => Some(predict_expansion(v, &regime, cp.eps, hessian)?),
            None => None,
        };
        let window = lower_bound_region(&regime, cp.eps, &LowerBoundParams::default()).unwrap_or(0.0);
        for &(x, xn, grad, delta) in &cp.points {
            let predicted = match &pred {
                Some(pr) => pr.predicted_dn(delta)?,
                None => f64::NAN,
            };
            out_rows.push(ProbeRow {
                eps: cp.eps,
                p: cp.p,
                xprime: x,
                xn,
                delta,
                grad_x: grad[0],
                grad_n: grad[1],
                predicted_grad_n: predicted,
            });
            let (error, relative) = compare_prediction(grad[1], predicted);
            cmp.push(ComparisonRow {
                p: cp.p,
                eps: cp.eps,
                xprime: x,
                measured: grad[1],
                predicted,
                error,
                relative,
                delta_sqrt: delta.sqrt(),
                transverse_ratio: if grad[1] != 0.0 { (grad[0] / grad[1]).abs() } else { f64::INFINITY },
                excluded: x.abs() > window,
            });
        }
    }
    Ok((out_rows, cmp))
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        b = b.num_threads(w);
    }
    b.build().map_err(|e| NeckError::Config(format!("worker pool: {e}")))
}

/// Runs every `(p, eps)` case of the spec; writes outputs when `spec.out` is set.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepReport> {
    spec.validate()?;
    let base = spec.base_geometry()?;
    let hessian = base
        .gap
        .as_ref()
        .map(|g| g.hessian())
        .ok_or_else(|| NeckError::Config("sweep geometry has no neck".into()))?;
    let opts = spec.mesh_options();
    let pool = pool(spec.workers)?;
    let (outcomes, warnings) = pool.install(|| -> Result<(Vec<(CaseOutcome, Option<CaseProbes>)>, Vec<String>)> {
        let geoms: Vec<Geometry> = spec.eps.iter().map(|&e| base.with_eps(e)).collect::<Result<_>>()?;
        let meshes: Vec<std::result::Result<TriMesh, String>> = geoms
            .par_iter()
            .map(|g| cached_mesh(g, &opts, spec.refinements).map_err(|e| e.to_string()))
            .collect();
        let mut warnings = Vec::new();
        let cases: Vec<(usize, f64)> = (0..geoms.len()).flat_map(|k| spec.p.iter().map(move |&p| (k, p))).collect();
        let outcomes: Vec<(CaseOutcome, Option<CaseProbes>)> = cases
            .par_iter()
            .map(|&(k, p)| match &meshes[k] {
                Ok(m) => {
                    let out = run_case(&geoms[k], m, spec, p);
                    let probes = out.solution.as_ref().map(|s| CaseProbes {
                        p,
                        eps: geoms[k].eps,
                        points: probe_case(&geoms[k], m, s, &spec.probes),
                    });
                    if let (Some(dir), Some(s)) = (&spec.out, &out.solution) {
                        if let Err(e) = write_solution(dir, s, &out.row) {
                            log::warn!("could not persist solution p={p} eps={:e}: {e}", geoms[k].eps);
                        }
                    }
                    (
                        CaseOutcome {
                            row: out.row,
                            solution: None,
                        },
                        probes,
                    )
                }
                Err(e) => (
                    CaseOutcome {
                        row: CaseRow::failed(p, geoms[k].eps, format!("mesh: {e}")),
                        solution: None,
                    },
                    None,
                ),
            })
            .collect();
        for (o, _) in &outcomes {
            if let Some(s) = o.row.eta_sensitivity {
                if s > ETA_SENSITIVITY_LIMIT {
                    warnings.push(format!(
                        "p={} eps={:e}: U-gap changes by {:.2}% when the final eta is multiplied by 10",
                        o.row.p,
                        o.row.eps,
                        100.0 * s
                    ));
                }
            }
            if !o.row.ok() {
                warnings.push(format!("p={} eps={:e}: {}", o.row.p, o.row.eps, o.row.status));
            }
        }
        Ok((outcomes, warnings))
    })?;
    let mut rows = Vec::new();
    let mut probes = Vec::new();
    for (o, p) in outcomes {
        rows.push(o.row);
        if let Some(p) = p {
            probes.push(p);
        }
    }
    let mut regimes = Vec::new();
    for &p in &spec.p {
        let mut pr: Vec<&CaseRow> = rows.iter().filter(|r| r.p == p).collect();
        pr.sort_by(|a, b| b.eps.total_cmp(&a.eps));
        regimes.push(summarize(p, &pr, &hessian)?);
    }
    let (probe_rows, comparisons) = predictions(&probes, &rows, &regimes, &hessian)?;
    let report = SweepReport {
        geometry: base.label.clone(),
        chart_radius: base.chart_radius,
        seed: spec.seed,
        rows,
        regimes,
        probes: probe_rows,
        comparisons,
        warnings,
    };
    if let Some(dir) = &spec.out {
        write_report(dir, &report)?;
    }
    Ok(report)
}
