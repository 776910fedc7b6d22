use super::assemble::{element_gradient, elements, local, Element, Local};
use super::dofs::DofMap;
use crate::error::{NeckError, Result};
use crate::mesh::TriMesh;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::{Mat, Side};
use rayon::prelude::*;

const NONE: usize = usize::MAX;

/// Lower-triangular CSC pattern of the condensed Hessian, plus for each
/// triangle the storage slot of every local pair.
pub struct Pattern {
    pub n: usize,
    symbolic: SymbolicSparseColMat<usize>,
    llt: SymbolicLlt<usize>,
    slots: Vec<[usize; 9]>,
    diag: Vec<usize>,
    nnz: usize,
}

impl Pattern {
    pub fn new(m: &TriMesh, dofs: &DofMap) -> Result<Self> {
        let n = dofs.n_free;
        let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(m.triangles.len() * 6 + n);
        for i in 0..n {
            pairs.push((i, i));
        }
        for t in &m.triangles {
            for a in 0..3 {
                for b in 0..3 {
                    if let (Some(i), Some(j)) = (dofs.free(t[a]), dofs.free(t[b])) {
                        if i >= j {
                            pairs.push((j, i));
                        }
                    }
                }
            }
        }
        pairs.par_sort_unstable();
        pairs.dedup();
        let mut col_ptr = vec![0usize; n + 1];
        for &(c, _) in &pairs {
            col_ptr[c + 1] += 1;
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        let row_idx: Vec<usize> = pairs.iter().map(|&(_, r)| r).collect();
        let find = |r: usize, c: usize| -> usize {
            let col = &row_idx[col_ptr[c]..col_ptr[c + 1]];
            col_ptr[c] + col.binary_search(&r).expect("pair in pattern")
        };
        let slots: Vec<[usize; 9]> = m
            .triangles
            .par_iter()
            .map(|t| {
                let mut s = [NONE; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        if let (Some(i), Some(j)) = (dofs.free(t[a]), dofs.free(t[b])) {
                            if i >= j {
                                s[3 * a + b] = find(i, j);
                            }
                        }
                    }
                }
                s
            })
            .collect();
        let diag: Vec<usize> = (0..n).map(|i| find(i, i)).collect();
        let nnz = row_idx.len();
        let symbolic = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
        let llt = SymbolicLlt::try_new(symbolic.as_ref(), Side::Lower)
            .map_err(|e| NeckError::Numeric(format!("symbolic factorization failed: {e:?}")))?;
        Ok(Pattern {
            n,
            symbolic,
            llt,
            slots,
            diag,
            nnz,
        })
    }

    /// Solves `H d = rhs` with the lower-triangular values `vals`, shifting the
    /// diagonal if the factorization breaks down.
    fn solve(&self, vals: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
        let max_diag = self.diag.iter().map(|&k| vals[k].abs()).fold(0.0, f64::max);
        let mut shifted = vals.to_vec();
        let mut shift = 0.0;
        for attempt in 0..6 {
            if attempt > 0 {
                let next = max_diag.max(f64::MIN_POSITIVE) * 1e-12 * 100f64.powi(attempt - 1);
                for &k in &self.diag {
                    shifted[k] += next - shift;
                }
                shift = next;
            }
            let mat = SparseColMatRef::new(self.symbolic.as_ref(), &shifted);
            if let Ok(llt) = Llt::try_new_with_symbolic(self.llt.clone(), mat, Side::Lower) {
                let mut x = Mat::from_fn(self.n, 1, |i, _| rhs[i]);
                llt.solve_in_place(x.as_mut());
                let out: Vec<f64> = (0..self.n).map(|i| x[(i, 0)]).collect();
                if out.iter().all(|v| v.is_finite()) {
                    if shift > 0.0 {
                        log::debug!("Hessian factorized with diagonal shift {shift:e}");
                    }
                    return Ok(out);
                }
            }
        }
        Err(NeckError::Numeric("Hessian factorization failed after diagonal shifts".into()))
    }
}

/// Per-iteration state of the condensed problem.
pub struct Condensed {
    pub energy: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

pub fn assemble_condensed(
    m: &TriMesh,
    els: &[Element],
    dofs: &DofMap,
    pat: &Pattern,
    nodal: &[f64],
    p: f64,
    eta: f64,
) -> Result<Condensed> {
    let locals: Vec<Local> = els
        .par_iter()
        .zip(m.triangles.par_iter())
        .map(|(e, t)| local(e, t.map(|i| nodal[i]), p, eta, true))
        .collect();
    let mut energy = 0.0;
    let mut grad = vec![0.0; pat.n];
    let mut hess = vec![0.0; pat.nnz];
    for ((l, t), s) in locals.iter().zip(&m.triangles).zip(&pat.slots) {
        energy += l.energy;
        for a in 0..3 {
            if let Some(i) = dofs.free(t[a]) {
                grad[i] += l.grad[a];
            }
            for b in 0..3 {
                let k = s[3 * a + b];
                if k != NONE {
                    hess[k] += l.hess[3 * a + b];
                }
            }
        }
    }
    if !energy.is_finite() || grad.iter().chain(hess.iter()).any(|v| !v.is_finite()) {
        return Err(NeckError::Numeric(format!(
            "non-finite assembly at p={p}, eta={eta:e}"
        )));
    }
    Ok(Condensed { energy, grad, hess })
}

pub fn energy_at(m: &TriMesh, els: &[Element], nodal: &[f64], p: f64, eta: f64) -> f64 {
    let parts: Vec<f64> = els
        .par_iter()
        .zip(m.triangles.par_iter())
        .map(|(e, t)| {
            let g = element_gradient(e, t.map(|i| nodal[i]));
            e.area * (eta * eta + g[0] * g[0] + g[1] * g[1]).powf(0.5 * p)
        })
        .collect();
    parts.iter().sum()
}

#[derive(Debug, Clone, Copy)]
pub struct LineSearch {
    pub c: f64,
    pub backtrack: f64,
    pub min_step: f64,
}

impl Default for LineSearch {
    fn default() -> Self {
        LineSearch {
            c: 1e-4,
            backtrack: 0.5,
            min_step: 1e-12,
        }
    }
}

pub struct StageOutcome {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub energies: Vec<f64>,
}

pub struct Problem<'a> {
    pub mesh: &'a TriMesh,
    pub els: Vec<Element>,
    pub dofs: DofMap,
    pub pattern: Pattern,
    pub osc: f64,
}

impl<'a> Problem<'a> {
    pub fn new(mesh: &'a TriMesh, dofs: DofMap, osc: f64) -> Result<Self> {
        let pattern = Pattern::new(mesh, &dofs)?;
        Ok(Problem {
            mesh,
            els: elements(mesh),
            dofs,
            pattern,
            osc,
        })
    }

    pub fn scaled_residual(&self, grad: &[f64], energy: f64, p: f64) -> f64 {
        let gmax = grad.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if gmax == 0.0 {
            return 0.0;
        }
        gmax / p * self.osc / energy.max(f64::MIN_POSITIVE)
    }

    /// Damped Newton on one η stage.
    pub fn newton(
        &self,
        x0: Vec<f64>,
        p: f64,
        eta: f64,
        tol: f64,
        max_iters: usize,
        ls: LineSearch,
    ) -> Result<StageOutcome> {
        let mut x = x0;
        let mut energies = Vec::new();
        let mut residual = f64::INFINITY;
        for iter in 0..=max_iters {
            let nodal = self.dofs.expand(&x);
            let c = assemble_condensed(self.mesh, &self.els, &self.dofs, &self.pattern, &nodal, p, eta)?;
            residual = self.scaled_residual(&c.grad, c.energy, p);
            energies.push(c.energy);
            if residual <= tol {
                return Ok(StageOutcome {
                    x,
                    residual,
                    iterations: iter,
                    energies,
                });
            }
            if iter == max_iters {
                break;
            }
            let rhs: Vec<f64> = c.grad.iter().map(|g| -g).collect();
            let d = self.pattern.solve(&c.hess, &rhs)?;
            let slope: f64 = c.grad.iter().zip(&d).map(|(g, d)| g * d).sum();
            if slope >= 0.0 {
                return Err(NeckError::Stagnation {
                    residual,
                    eta,
                    iterations: iter,
                });
            }
            let slack = 2e-15 * c.energy.abs();
            let mut alpha = 1.0;
            let mut trial = x.clone();
            loop {
                for ((t, xi), di) in trial.iter_mut().zip(&x).zip(&d) {
                    *t = xi + alpha * di;
                }
                let e = energy_at(self.mesh, &self.els, &self.dofs.expand(&trial), p, eta);
                if e.is_finite() && e <= c.energy + ls.c * alpha * slope + slack {
                    break;
                }
                alpha *= ls.backtrack;
                if alpha < ls.min_step {
                    if -slope > 1e-10 * c.energy.abs() {
                        return Err(NeckError::Stagnation {
                            residual,
                            eta,
                            iterations: iter,
                        });
                    }
                    // energy differences are below round-off: take the full
                    // step if it reduces the residual
                    for ((t, xi), di) in trial.iter_mut().zip(&x).zip(&d) {
                        *t = xi + di;
                    }
                    let full = self.dofs.expand(&trial);
                    let cf = assemble_condensed(self.mesh, &self.els, &self.dofs, &self.pattern, &full, p, eta)?;
                    if self.scaled_residual(&cf.grad, cf.energy, p) < residual {
                        break;
                    }
                    return Ok(StageOutcome {
                        x,
                        residual,
                        iterations: iter,
                        energies,
                    });
                }
            }
            x = trial;
        }
        Err(NeckError::Stagnation {
            residual,
            eta,
            iterations: max_iters,
        })
    }
}
