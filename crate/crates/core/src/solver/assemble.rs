use crate::error::{NeckError, Result};
use crate::mesh::TriMesh;
use rayon::prelude::*;

/// Area and barycentric gradients of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct Element {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

pub fn elements(m: &TriMesh) -> Vec<Element> {
    m.triangles
        .iter()
        .map(|&[a, b, c]| {
            let (pa, pb, pc) = (m.vertices[a], m.vertices[b], m.vertices[c]);
            let d = (pb - pa).cross(pc - pa);
            let inv = 1.0 / d;
            // grad λ_i = rot90(opposite edge) / (2 area)
            let g = |p: crate::geometry::Vec2, q: crate::geometry::Vec2| {
                [(p.y - q.y) * inv, (q.x - p.x) * inv]
            };
            Element {
                area: 0.5 * d,
                grads: [g(pb, pc), g(pc, pa), g(pa, pb)],
            }
        })
        .collect()
}

pub fn element_gradient(e: &Element, u: [f64; 3]) -> [f64; 2] {
    let mut g = [0.0; 2];
    for k in 0..3 {
        g[0] += u[k] * e.grads[k][0];
        g[1] += u[k] * e.grads[k][1];
    }
    g
}

/// Local energy, gradient and (optionally) Hessian of `area (η² + |∇v|²)^(p/2)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Local {
    pub energy: f64,
    pub grad: [f64; 3],
    pub hess: [f64; 9],
}

pub fn local(e: &Element, u: [f64; 3], p: f64, eta: f64, with_hessian: bool) -> Local {
    let g = element_gradient(e, u);
    let s = eta * eta + g[0] * g[0] + g[1] * g[1];
    let mut out = Local {
        energy: e.area * s.powf(0.5 * p),
        ..Default::default()
    };
    let w1 = if s > 0.0 {
        s.powf(0.5 * p - 1.0)
    } else if p == 2.0 {
        1.0
    } else {
        0.0
    };
    let gd: [f64; 3] = std::array::from_fn(|k| g[0] * e.grads[k][0] + g[1] * e.grads[k][1]);
    for k in 0..3 {
        out.grad[k] = e.area * p * w1 * gd[k];
    }
    if with_hessian {
        let w2 = if s > 0.0 { (p - 2.0) * w1 / s } else { 0.0 };
        for i in 0..3 {
            for j in 0..3 {
                let gg = e.grads[i][0] * e.grads[j][0] + e.grads[i][1] * e.grads[j][1];
                out.hess[3 * i + j] = e.area * p * (w1 * gg + w2 * gd[i] * gd[j]);
            }
        }
    }
    out
}

/// Result of a full (unconstrained, per-vertex) assembly.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub energy: f64,
    /// Derivative of the energy with respect to each nodal value.
    pub gradient: Vec<f64>,
    /// Lower and upper entries of the per-vertex Hessian as `(row, col, value)`, duplicates summed.
    pub hessian: Vec<(usize, usize, f64)>,
}

/// Energy `∫(η²+|∇v|²)^(p/2)` of the piecewise-linear field `v`, with its exact
/// gradient and Hessian in nodal coordinates.
pub fn assemble_energy(m: &TriMesh, v: &[f64], p: f64, eta: f64) -> Result<Assembly> {
    if v.len() != m.vertices.len() {
        return Err(NeckError::domain("nodal vector length does not match the mesh"));
    }
    let els = elements(m);
    let locals: Vec<Local> = els
        .par_iter()
        .zip(m.triangles.par_iter())
        .map(|(e, t)| local(e, t.map(|i| v[i]), p, eta, true))
        .collect();
    let mut energy = 0.0;
    let mut gradient = vec![0.0; v.len()];
    let mut entries = std::collections::BTreeMap::new();
    for (l, t) in locals.iter().zip(&m.triangles) {
        energy += l.energy;
        for i in 0..3 {
            gradient[t[i]] += l.grad[i];
            for j in 0..3 {
                *entries.entry((t[i], t[j])).or_insert(0.0) += l.hess[3 * i + j];
            }
        }
    }
    let hessian: Vec<(usize, usize, f64)> = entries.into_iter().map(|((i, j), x)| (i, j, x)).collect();
    if !energy.is_finite()
        || gradient.iter().any(|x| !x.is_finite())
        || hessian.iter().any(|x| !x.2.is_finite())
    {
        return Err(NeckError::Numeric("non-finite energy, gradient or Hessian".into()));
    }
    Ok(Assembly {
        energy,
        gradient,
        hessian,
    })
}

/// Per-vertex derivative `∂E/∂v_j = p ∫ (η²+|∇v|²)^((p-2)/2) ∇v·∇φ_j`.
pub fn vertex_residual(m: &TriMesh, v: &[f64], p: f64, eta: f64) -> Vec<f64> {
    let els = elements(m);
    let locals: Vec<[f64; 3]> = els
        .par_iter()
        .zip(m.triangles.par_iter())
        .map(|(e, t)| local(e, t.map(|i| v[i]), p, eta, false).grad)
        .collect();
    let mut r = vec![0.0; v.len()];
    for (l, t) in locals.iter().zip(&m.triangles) {
        for i in 0..3 {
            r[t[i]] += l[i];
        }
    }
    r
}
