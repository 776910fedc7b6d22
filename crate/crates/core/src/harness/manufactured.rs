use crate::analysis::circle_flux;
use crate::error::Result;
use crate::geometry::{Geometry, Vec2};
use crate::mesh::{self, refine_uniform, TriMesh};
use crate::solver::{solve, Solution, SolveConfig};
use serde::{Deserialize, Serialize};
use std::time::Instant;

pub const ANNULUS_INNER: f64 = 1.0;
pub const ANNULUS_OUTER: f64 = 2.0;

/// Radial p-harmonic function on the annulus with u = 0 at r = 1 and u = 1 at r = 2.
pub fn annulus_exact(p: f64, r: f64) -> f64 {
    let a = (p - 2.0) / (p - 1.0);
    if a == 0.0 {
        r.ln() / ANNULUS_OUTER.ln()
    } else {
        (r.powf(a) - 1.0) / (ANNULUS_OUTER.powf(a) - 1.0)
    }
}

/// The constant `C` in `u'(r) = C r^(-1/(p-1))`.
pub fn annulus_c(p: f64) -> f64 {
    let a = (p - 2.0) / (p - 1.0);
    if a == 0.0 {
        1.0 / ANNULUS_OUTER.ln()
    } else {
        a / (ANNULUS_OUTER.powf(a) - 1.0)
    }
}

/// Outward current `2π C^(p-1)` through every circle; also the exact energy.
pub fn annulus_flux(p: f64) -> f64 {
    2.0 * std::f64::consts::PI * annulus_c(p).powf(p - 1.0)
}

pub fn annulus_geometry() -> Result<Geometry> {
    Geometry::annulus(ANNULUS_INNER, ANNULUS_OUTER, 0.0, 1.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManufacturedCase {
    pub p: f64,
    pub target_h: f64,
    pub vertices: usize,
    pub max_nodal_error: f64,
    pub exact_flux: f64,
    /// `(rho, band-averaged flux)` on interior circles.
    pub circle_fluxes: Vec<(f64, f64)>,
    /// Largest relative deviation of the circle fluxes from their mean.
    pub flux_spread: f64,
    pub energy: f64,
    pub runtime_s: f64,
}

pub fn max_nodal_error(m: &TriMesh, sol: &Solution, p: f64) -> f64 {
    m.vertices
        .iter()
        .zip(&sol.nodal_values)
        .map(|(v, u)| (u - annulus_exact(p, v.norm())).abs())
        .fold(0.0, f64::max)
}

pub fn run_manufactured(p: f64, target_h: f64) -> Result<ManufacturedCase> {
    let t = Instant::now();
    let g = annulus_geometry()?;
    let m = mesh::generate(&g, target_h, 6)?;
    let sol = solve(&m, &g, &SolveConfig::new(p))?;
    let width = 0.1;
    let circle_fluxes = [1.2, 1.4, 1.6, 1.8]
        .iter()
        .map(|&rho| Ok((rho, circle_flux(&sol, &m, Vec2::new(0.0, 0.0), rho, width)?)))
        .collect::<Result<Vec<_>>>()?;
    let mean = circle_fluxes.iter().map(|c| c.1).sum::<f64>() / circle_fluxes.len() as f64;
    let flux_spread = circle_fluxes
        .iter()
        .map(|c| ((c.1 - mean) / mean).abs())
        .fold(0.0, f64::max);
    Ok(ManufacturedCase {
        p,
        target_h,
        vertices: m.num_vertices(),
        max_nodal_error: max_nodal_error(&m, &sol, p),
        exact_flux: annulus_flux(p),
        circle_fluxes,
        flux_spread,
        energy: sol.energy_unregularized,
        runtime_s: t.elapsed().as_secs_f64(),
    })
}

/// Energy errors `E_h - E` over successive uniform refinements.
pub fn energy_convergence(p: f64, target_h: f64, levels: usize) -> Result<Vec<(usize, f64)>> {
    let g = annulus_geometry()?;
    let mut m = mesh::generate(&g, target_h, 6)?;
    let exact = annulus_flux(p);
    let cfg = SolveConfig::new(p);
    let mut out = Vec::new();
    for level in 0..=levels {
        if level > 0 {
            m = refine_uniform(&m);
        }
        let sol = solve(&m, &g, &cfg)?;
        out.push((m.num_vertices(), sol.energy_unregularized - exact));
    }
    Ok(out)
}
