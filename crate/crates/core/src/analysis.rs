//! Post-processing of solved states: fluxes, gradient probes, neck maxima,
//! decay fits and Hölder quotients.

use crate::asymptotics::lsq_two;
use crate::error::{NeckError, Result};
use crate::geometry::{Geometry, NeckPoint, Vec2};
use crate::mesh::{BoundaryTag, TriMesh};
use crate::solver::{vertex_residual, Solution};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FluxMethod {
    KktCondensed,
    CutoffVolume,
    CrossSection { r: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FluxEstimate {
    pub value: f64,
    pub method: FluxMethod,
    pub surface: String,
}

fn residual(sol: &Solution, m: &TriMesh) -> Result<Vec<f64>> {
    if sol.nodal_values.len() != m.vertices.len() {
        return Err(NeckError::domain("solution does not belong to this mesh"));
    }
    Ok(vertex_residual(m, &sol.nodal_values, sol.p, sol.eta_final))
}

/// Net current out of inclusion `i`, read off the condensed stationarity residual.
pub fn kkt_flux(sol: &Solution, m: &TriMesh, i: usize) -> Result<FluxEstimate> {
    let tag = BoundaryTag::inclusion(i);
    let r = residual(sol, m)?;
    let value = -m
        .vertex_tags()
        .iter()
        .zip(&r)
        .filter(|(t, _)| **t == Some(tag))
        .map(|(_, r)| r)
        .sum::<f64>()
        / sol.p;
    Ok(FluxEstimate {
        value,
        method: FluxMethod::KktCondensed,
        surface: tag.name().to_string(),
    })
}

fn vertex_neighbors(m: &TriMesh) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); m.vertices.len()];
    for t in &m.triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

/// `-(1/p) ∫ a·∇χ` with χ = 1 on inclusion `i`, decaying linearly to 0 over
/// `layers` rings of mesh neighbours.
pub fn cutoff_volume_flux(sol: &Solution, m: &TriMesh, i: usize, layers: usize) -> Result<FluxEstimate> {
    if layers == 0 {
        return Err(NeckError::domain("cutoff needs at least one layer"));
    }
    let tag = BoundaryTag::inclusion(i);
    let tags = m.vertex_tags();
    let adj = vertex_neighbors(m);
    let mut dist = vec![usize::MAX; m.vertices.len()];
    let mut queue = VecDeque::new();
    for (v, t) in tags.iter().enumerate() {
        if *t == Some(tag) {
            dist[v] = 0;
            queue.push_back(v);
        }
    }
    if queue.is_empty() {
        return Err(NeckError::domain(format!("no vertices tagged {}", tag.name())));
    }
    while let Some(v) = queue.pop_front() {
        if dist[v] >= layers {
            continue;
        }
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    let r = residual(sol, m)?;
    let mut acc = 0.0;
    for v in 0..m.vertices.len() {
        if dist[v] == usize::MAX || (tags[v].is_some() && tags[v] != Some(tag)) {
            continue;
        }
        let chi = 1.0 - dist[v] as f64 / layers as f64;
        acc += chi * r[v];
    }
    Ok(FluxEstimate {
        value: -acc / sol.p,
        method: FluxMethod::CutoffVolume,
        surface: tag.name().to_string(),
    })
}

/// Upward current through the lower neck surface restricted to `|x'| < r`.
pub fn cross_section_flux(sol: &Solution, m: &TriMesh, g: &Geometry, r: f64) -> Result<FluxEstimate> {
    if g.gap.is_none() || g.inclusions.len() < 2 {
        return Err(NeckError::domain("cross-section flux needs two inclusions"));
    }
    if !(r > 0.0 && r < g.chart_radius) {
        return Err(NeckError::domain(format!(
            "r = {r} must lie in (0, {})",
            g.chart_radius
        )));
    }
    let res = residual(sol, m)?;
    let tags = m.vertex_tags();
    let mut acc = 0.0;
    for (v, t) in tags.iter().enumerate() {
        let p = m.vertices[v];
        if *t != Some(BoundaryTag::Inc2) || p.x.abs() >= r {
            continue;
        }
        let lo = g.neck_bounds(p.x).map_or(f64::NAN, |b| b.0);
        if (p.y - lo).abs() <= 1e-8 * (1.0 + lo.abs()) {
            acc += res[v];
        }
    }
    Ok(FluxEstimate {
        value: -acc / sol.p,
        method: FluxMethod::CrossSection { r },
        surface: format!("lower neck |x'|<{r}"),
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Conservation {
    pub outer: f64,
    pub inc1: f64,
    pub inc2: f64,
    /// Sum over all boundary components.
    pub total: f64,
    /// Current carried through the outer boundary, `½ Σ |r_v|` over its vertices.
    pub scale: f64,
}

pub fn boundary_conservation(sol: &Solution, m: &TriMesh) -> Result<Conservation> {
    let r = residual(sol, m)?;
    let f = crate::solver::boundary_fluxes(m, &sol.nodal_values, sol.p, sol.eta_final);
    let through: Vec<f64> = m
        .vertex_tags()
        .iter()
        .zip(&r)
        .filter(|(t, _)| **t == Some(BoundaryTag::Outer))
        .map(|(_, r)| r.abs())
        .collect();
    Ok(Conservation {
        outer: f[0],
        inc1: f[1],
        inc2: f[2],
        total: f[0] + f[1] + f[2],
        scale: 0.5 * through.iter().sum::<f64>() / sol.p,
    })
}

/// Uniform bucket grid over triangle bounding boxes.
pub struct Locator<'a> {
    mesh: &'a TriMesh,
    lo: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'a> Locator<'a> {
    pub fn new(mesh: &'a TriMesh) -> Self {
        let (mut lo, mut hi) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for v in &mesh.vertices {
            lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        let n = (mesh.triangles.len().max(1) as f64).sqrt().ceil();
        let cell = ((hi.x - lo.x).max(hi.y - lo.y) / n).max(1e-300);
        let nx = ((hi.x - lo.x) / cell) as usize + 1;
        let ny = ((hi.y - lo.y) / cell) as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for (k, t) in mesh.triangles.iter().enumerate() {
            let ps = t.map(|i| mesh.vertices[i]);
            let x0 = ((ps.iter().map(|p| p.x).fold(f64::INFINITY, f64::min) - lo.x) / cell) as usize;
            let x1 = ((ps.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max) - lo.x) / cell) as usize;
            let y0 = ((ps.iter().map(|p| p.y).fold(f64::INFINITY, f64::min) - lo.y) / cell) as usize;
            let y1 = ((ps.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max) - lo.y) / cell) as usize;
            for i in x0..=x1.min(nx - 1) {
                for j in y0..=y1.min(ny - 1) {
                    buckets[j * nx + i].push(k);
                }
            }
        }
        Locator {
            mesh,
            lo,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    /// Barycentric coordinates of `p` in triangle `t`.
    pub fn barycentric(&self, t: usize, p: Vec2) -> [f64; 3] {
        let [a, b, c] = self.mesh.triangles[t].map(|i| self.mesh.vertices[i]);
        let d = (b - a).cross(c - a);
        let l1 = (b - p).cross(c - p) / d;
        let l2 = (c - p).cross(a - p) / d;
        [l1, l2, 1.0 - l1 - l2]
    }

    /// Triangle containing `p`, with a relative tolerance for points on edges.
    pub fn locate(&self, p: Vec2) -> Option<usize> {
        let i = ((p.x - self.lo.x) / self.cell).floor();
        let j = ((p.y - self.lo.y) / self.cell).floor();
        if i < 0.0 || j < 0.0 || i as usize >= self.nx || j as usize >= self.ny {
            return None;
        }
        let cands = &self.buckets[j as usize * self.nx + i as usize];
        let mut best: Option<(usize, f64)> = None;
        for &t in cands {
            let l = self.barycentric(t, p);
            let worst = l.iter().fold(f64::INFINITY, |a, v| a.min(*v));
            if worst >= 0.0 {
                return Some(t);
            }
            if best.is_none_or(|(_, w)| worst > w) {
                best = Some((t, worst));
            }
        }
        best.filter(|(_, w)| *w > -1e-9).map(|(t, _)| t)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradientProbe {
    pub point: NeckPoint,
    pub grad: [f64; 2],
    pub value: f64,
    pub delta_at_point: f64,
    pub triangle: usize,
}

fn interpolate(loc: &Locator, sol: &Solution, t: usize, p: Vec2) -> f64 {
    let l = loc.barycentric(t, p);
    let tri = loc.mesh.triangles[t];
    (0..3).map(|k| l[k] * sol.nodal_values[tri[k]]).sum()
}

/// Element gradient of the triangle containing `x`.
pub fn probe_gradient(sol: &Solution, loc: &Locator, g: &Geometry, x: NeckPoint) -> Result<GradientProbe> {
    let p = x.as_vec();
    let t = loc
        .locate(p)
        .ok_or_else(|| NeckError::domain(format!("point ({}, {}) lies outside the mesh", p.x, p.y)))?;
    Ok(GradientProbe {
        point: x,
        grad: sol.element_gradients[t],
        value: interpolate(loc, sol, t, p),
        delta_at_point: g.delta(x)?,
        triangle: t,
    })
}

/// Neck midline point at `x'`.
pub fn midline(g: &Geometry, xprime: f64) -> Result<NeckPoint> {
    let (lo, hi) = g
        .neck_bounds(xprime)
        .ok_or_else(|| NeckError::domain("geometry has no neck"))?;
    Ok(NeckPoint::new(xprime, 0.5 * (lo + hi)))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MaxGradient {
    pub value: f64,
    pub location: Vec2,
    pub triangle: Option<usize>,
}

/// Largest element gradient among triangles whose centroid has `|x'| <= window`.
pub fn max_gradient(sol: &Solution, m: &TriMesh, window: f64) -> MaxGradient {
    let mut best = MaxGradient {
        value: 0.0,
        location: Vec2::new(0.0, 0.0),
        triangle: None,
    };
    for (t, gr) in sol.element_gradients.iter().enumerate() {
        let c = m.centroid(t);
        if c.x.abs() > window {
            continue;
        }
        let v = gr[0].hypot(gr[1]);
        if v > best.value || best.triangle.is_none() {
            best = MaxGradient {
                value: v,
                location: c,
                triangle: Some(t),
            };
        }
    }
    best
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayFit {
    /// Slope of `ln(|v|+|Dv|)` against `-1/(sqrt(eps)+|x'|)`.
    pub c2_hat: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub samples: Vec<(f64, f64)>,
}

/// Fits `ln y = ln C1 - C2/(sqrt(eps)+|x'|)` to `(x', y)` samples.
pub fn fit_exp_decay(samples: &[(f64, f64)], eps: f64) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = samples.iter().copied().filter(|s| s.1 > 0.0 && s.1.is_finite()).collect();
    if pts.len() < 2 {
        return Err(NeckError::Fit("decay fit needs at least two positive samples".into()));
    }
    let x: Vec<f64> = pts.iter().map(|s| -1.0 / (eps.sqrt() + s.0.abs())).collect();
    let y: Vec<f64> = pts.iter().map(|s| s.1.ln()).collect();
    let spread = x.iter().fold(f64::NEG_INFINITY, |a, v| a.max(*v)) - x.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    if !(spread > 1e-12 * x.iter().fold(0.0f64, |a, v| a.max(v.abs()))) {
        return Err(NeckError::Fit("decay samples have no spread in |x'|".into()));
    }
    let (intercept, slope, res) = lsq_two(&x, &y).ok_or_else(|| NeckError::Fit("degenerate decay samples".into()))?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    Ok(DecayFit {
        c2_hat: slope,
        intercept,
        r_squared: if tot > 0.0 { 1.0 - res / tot } else { 1.0 },
        samples: pts,
    })
}

/// Samples `|v|+|Dv|` on the neck midline at each `x'` and fits the decay model.
pub fn decay_fit(sol: &Solution, m: &TriMesh, g: &Geometry, samples: &[f64]) -> Result<DecayFit> {
    let loc = Locator::new(m);
    let mut pts = Vec::with_capacity(samples.len());
    for &xp in samples {
        let probe = probe_gradient(sol, &loc, g, midline(g, xp)?)?;
        pts.push((xp, probe.value.abs() + probe.grad[0].hypot(probe.grad[1])));
    }
    fit_exp_decay(&pts, g.eps)
}

/// Area-weighted average of the element gradients around each vertex.
pub fn recovered_gradients(sol: &Solution, m: &TriMesh) -> Vec<[f64; 2]> {
    let mut acc = vec![[0.0; 2]; m.vertices.len()];
    let mut w = vec![0.0; m.vertices.len()];
    for (t, tri) in m.triangles.iter().enumerate() {
        let a = m.signed_area(t).abs();
        let gr = sol.element_gradients[t];
        for &v in tri {
            acc[v][0] += a * gr[0];
            acc[v][1] += a * gr[1];
            w[v] += a;
        }
    }
    acc.iter()
        .zip(&w)
        .map(|(g, w)| if *w > 0.0 { [g[0] / w, g[1] / w] } else { [0.0; 2] })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolderPoint {
    pub point: NeckPoint,
    pub delta_lower: f64,
    pub quotient: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolderScan {
    pub beta: f64,
    pub points: Vec<HolderPoint>,
    pub max_quotient: f64,
    pub skipped: Vec<NeckPoint>,
}

impl HolderScan {
    /// Ratio of largest to smallest quotient over the scanned points.
    pub fn spread(&self) -> f64 {
        let lo = self.points.iter().map(|p| p.quotient).fold(f64::INFINITY, f64::min);
        let hi = self.points.iter().map(|p| p.quotient).fold(0.0, f64::max);
        if lo > 0.0 {
            hi / lo
        } else {
            f64::INFINITY
        }
    }
}

/// Normalized Hölder quotient at `x` from gradient samples `(position, Du)`
/// lying in the neck: the seminorm over `|y'-x'| < sqrt(δ̲)/4` divided by
/// `δ̲^(-β/2)` times the sup of `|Du|` over `|y'-x'| < sqrt(δ̲)/2`.
pub fn holder_quotient_at(samples: &[(Vec2, [f64; 2])], x: NeckPoint, delta_lower: f64, beta: f64) -> f64 {
    let r_in = 0.25 * delta_lower.sqrt();
    let r_out = 0.5 * delta_lower.sqrt();
    let inner: Vec<&(Vec2, [f64; 2])> = samples.iter().filter(|s| (s.0.x - x.xprime).abs() < r_in).collect();
    let sup = samples
        .iter()
        .filter(|s| (s.0.x - x.xprime).abs() < r_out)
        .map(|s| s.1[0].hypot(s.1[1]))
        .fold(0.0, f64::max);
    if sup == 0.0 {
        return 0.0;
    }
    let mut semi = 0.0f64;
    for (i, a) in inner.iter().enumerate() {
        for b in &inner[i + 1..] {
            let d = (a.0 - b.0).norm();
            if d > 0.0 {
                let dg = (a.1[0] - b.1[0]).hypot(a.1[1] - b.1[1]);
                semi = semi.max(dg / d.powf(beta));
            }
        }
    }
    semi / (delta_lower.powf(-0.5 * beta) * sup)
}

/// Hölder scan over neck points using recovered vertex gradients.
pub fn holder_quotient_scan(
    sol: &Solution,
    m: &TriMesh,
    g: &Geometry,
    beta: f64,
    points: &[NeckPoint],
) -> Result<HolderScan> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(NeckError::domain(format!("beta must lie in (0,1), got {beta}")));
    }
    let rec = recovered_gradients(sol, m);
    let samples: Vec<(Vec2, [f64; 2])> = m
        .vertices
        .iter()
        .zip(&rec)
        .filter(|(v, _)| g.in_neck(**v) && v.x.abs() < 0.5)
        .map(|(v, r)| (*v, *r))
        .collect();
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    for &x in points {
        let dl = g.delta_lower(x)?;
        if x.xprime.abs() + 0.5 * dl.sqrt() >= 0.5 {
            log::warn!("Hölder ball at x' = {} leaves the neck window; skipped", x.xprime);
            skipped.push(x);
            continue;
        }
        out.push(HolderPoint {
            point: x,
            delta_lower: dl,
            quotient: holder_quotient_at(&samples, x, dl, beta),
        });
    }
    let max_quotient = out.iter().map(|p| p.quotient).fold(0.0, f64::max);
    Ok(HolderScan {
        beta,
        points: out,
        max_quotient,
        skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub eps: f64,
    pub p: f64,
    pub xprime: f64,
    pub xn: f64,
    pub delta: f64,
    pub grad_x: f64,
    pub grad_n: f64,
    pub predicted_grad_n: f64,
}

pub const PROBE_COLUMNS: [&str; 8] = ["eps", "p", "xprime", "xn", "delta", "grad_x", "grad_n", "predicted_grad_n"];

pub fn write_probe_csv<W: Write>(rows: &[ProbeRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| NeckError::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

/// Outward current through the circle `|x - center| = rho`, averaged over the
/// band `rho < |x - center| < rho + width` with a 16-point rule per triangle.
pub fn circle_flux(sol: &Solution, m: &TriMesh, center: Vec2, rho: f64, width: f64) -> Result<f64> {
    if !(rho > 0.0 && width > 0.0) {
        return Err(NeckError::domain("circle flux needs rho > 0 and width > 0"));
    }
    const N: usize = 4;
    let eta2 = sol.eta_final * sol.eta_final;
    let mut acc = 0.0;
    for (t, tri) in m.triangles.iter().enumerate() {
        let [a, b, c] = tri.map(|i| m.vertices[i]);
        let gr = sol.element_gradients[t];
        let w = (eta2 + gr[0] * gr[0] + gr[1] * gr[1]).powf(0.5 * sol.p - 1.0);
        let weight = m.signed_area(t).abs() / (N * N) as f64;
        // centroids of the N^2 congruent sub-triangles
        let at = |i: f64, j: f64| a + (b - a) * (i / N as f64) + (c - a) * (j / N as f64);
        for i in 0..N {
            for j in 0..N - i {
                let (fi, fj) = (i as f64, j as f64);
                let mut qs = vec![at(fi + 1.0 / 3.0, fj + 1.0 / 3.0)];
                if i + j + 1 < N {
                    qs.push(at(fi + 2.0 / 3.0, fj + 2.0 / 3.0));
                }
                for q in qs {
                    let d = q - center;
                    let r = d.norm();
                    if r > rho && r < rho + width {
                        acc += weight * w * (gr[0] * d.x + gr[1] * d.y) / r;
                    }
                }
            }
        }
    }
    Ok(acc / width)
}
