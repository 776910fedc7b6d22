//! Closed-form layer: blow-up factor, the constant K, Gamma, the neck-integral
//! oracle, predictions and limit extrapolation.

mod extrapolate;
mod gamma;
mod predict;
mod quadrature;

pub use extrapolate::{
    extrapolate_flux, extrapolate_in_eps, fit_loglog_slope, fit_ugap_limit, FluxExtrapolation,
    FluxModel, SlopeFit, UgapLimit,
};
pub(crate) use extrapolate::lsq_two;
pub use gamma::gamma_fn;
pub use predict::{predict_expansion, AsymptoticPrediction};
pub use quadrature::{
    gauss_kronrod, neck_integral_limit, neck_integral, NeckIntegralLimit, QuadResult, NECK_INTEGRAL_EPS,
    NECK_INTEGRAL_RADII,
};

use crate::error::{NeckError, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Branch {
    Super,
    Critical,
    Sub,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub p: f64,
    pub n: usize,
    pub branch: Branch,
}

impl Regime {
    /// Classifies `p` against `(n+1)/2`. The comparison `2p` vs `n+1` is exact
    /// for every `p` whose double is representable, which covers all dyadic inputs.
    pub fn new(p: f64, n: usize) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(NeckError::domain(format!("p must exceed 1, got {p}")));
        }
        if n < 2 {
            return Err(NeckError::domain(format!("dimension must be at least 2, got {n}")));
        }
        let lhs = 2.0 * p;
        let rhs = (n + 1) as f64;
        let branch = if lhs > rhs {
            Branch::Super
        } else if lhs < rhs {
            Branch::Sub
        } else {
            Branch::Critical
        };
        Ok(Regime { p, n, branch })
    }

    /// Exact classification for rational `p = num/den`.
    pub fn from_rational(num: u64, den: u64, n: usize) -> Result<Self> {
        if den == 0 || num <= den {
            return Err(NeckError::domain(format!("p = {num}/{den} must exceed 1")));
        }
        let mut r = Regime::new(num as f64 / den as f64, n)?;
        let lhs = 2 * num as u128;
        let rhs = (n as u128 + 1) * den as u128;
        r.branch = match lhs.cmp(&rhs) {
            std::cmp::Ordering::Greater => Branch::Super,
            std::cmp::Ordering::Equal => Branch::Critical,
            std::cmp::Ordering::Less => Branch::Sub,
        };
        Ok(r)
    }

    /// `(2p-n-1)/(2(p-1))`, the power of eps in the supercritical blow-up factor.
    pub fn super_exponent(&self) -> f64 {
        (2.0 * self.p - self.n as f64 - 1.0) / (2.0 * (self.p - 1.0))
    }

    /// Power of eps in the leading correction of the neck integral, `(2p-n-1)/2`.
    pub fn tail_exponent(&self) -> f64 {
        (2.0 * self.p - self.n as f64 - 1.0) / 2.0
    }
}

/// Blow-up factor of the neck gradient.
pub fn theta(eps: f64, regime: &Regime) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(NeckError::domain(format!("theta needs 0 < eps < 1, got {eps}")));
    }
    Ok(match regime.branch {
        Branch::Super => eps.powf(regime.super_exponent()),
        Branch::Critical => eps.ln().abs().powf(-1.0 / (regime.p - 1.0)),
        Branch::Sub => 1.0,
    })
}

/// Symmetric `(n-1)x(n-1)` Hessian of `h1 - h2` at the touching point, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapHessian {
    dim: usize,
    data: Vec<f64>,
}

impl GapHessian {
    pub fn scalar(c: f64) -> Self {
        GapHessian { dim: 1, data: vec![c] }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let dim = d.len();
        let mut data = vec![0.0; dim * dim];
        for (i, v) in d.iter().enumerate() {
            data[i * dim + i] = *v;
        }
        GapHessian { dim, data }
    }

    pub fn identity_scaled(dim: usize, c: f64) -> Self {
        Self::diagonal(&vec![c; dim])
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(NeckError::domain("Hessian must be a non-empty square matrix"));
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        for i in 0..dim {
            for j in 0..i {
                let (a, b) = (data[i * dim + j], data[j * dim + i]);
                if (a - b).abs() > 1e-12 * (a.abs() + b.abs() + 1.0) {
                    return Err(NeckError::domain("Hessian is not symmetric"));
                }
            }
        }
        Ok(GapHessian { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn scaled(&self, c: f64) -> Self {
        GapHessian {
            dim: self.dim,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// `y^T H y`.
    pub fn quad_form(&self, y: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += y[i] * self.get(i, j) * y[j];
            }
        }
        s
    }

    /// Determinant through a Cholesky factorization; fails unless positive definite.
    pub fn determinant(&self) -> Result<f64> {
        let n = self.dim;
        let mut l = vec![0.0; n * n];
        let mut det = 1.0;
        for j in 0..n {
            let mut d = self.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) {
                return Err(NeckError::domain("gap Hessian is not positive definite"));
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            det *= d;
            for i in j + 1..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(det)
    }
}

fn check_dim(h: &GapHessian, regime: &Regime) -> Result<()> {
    if h.dim() + 1 != regime.n {
        return Err(NeckError::domain(format!(
            "Hessian of size {} does not match dimension n = {}",
            h.dim(),
            regime.n
        )));
    }
    Ok(())
}

/// The constant K of the leading-order expansion.
pub fn k_const(hessian: &GapHessian, regime: &Regime) -> Result<f64> {
    check_dim(hessian, regime)?;
    let det_sqrt = hessian.determinant()?.sqrt();
    let n = regime.n as f64;
    let p = regime.p;
    let two_pi_pow = (2.0 * PI).powf((n - 1.0) / 2.0);
    match regime.branch {
        Branch::Super => {
            Ok(det_sqrt * gamma_fn(p - 1.0)? / (two_pi_pow * gamma_fn(p - (n + 1.0) / 2.0)?))
        }
        Branch::Critical => Ok(det_sqrt * gamma_fn((n - 1.0) / 2.0)? / two_pi_pow),
        Branch::Sub => Err(NeckError::UnsupportedBranch(
            "K is only defined for p >= (n+1)/2".into(),
        )),
    }
}

/// `sgn` with `sgn(0) = 0`.
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundParams {
    pub gamma: f64,
    pub kappa1: f64,
    pub kappa2: f64,
}

impl Default for LowerBoundParams {
    fn default() -> Self {
        LowerBoundParams {
            gamma: 1.0,
            kappa1: 0.1,
            kappa2: 0.1,
        }
    }
}

/// Radius of the transverse window where the lower gradient bound is claimed.
pub fn lower_bound_region(regime: &Regime, eps: f64, params: &LowerBoundParams) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(NeckError::domain(format!("eps must lie in (0, 1), got {eps}")));
    }
    lower_bound_region_ln(regime, eps.ln(), params)
}

/// Same as [`lower_bound_region`] but takes `ln eps`, so eps below the smallest
/// positive double (e.g. `exp(-e^10)`) can still be queried.
pub fn lower_bound_region_ln(regime: &Regime, ln_eps: f64, params: &LowerBoundParams) -> Result<f64> {
    if !(ln_eps < 0.0) {
        return Err(NeckError::domain(format!("ln eps must be negative, got {ln_eps}")));
    }
    match regime.branch {
        Branch::Super => Ok(ln_eps.abs().powf(-params.gamma)),
        Branch::Critical => {
            let loglog = ln_eps.abs().ln();
            if !(loglog > 1.0) {
                return Err(NeckError::domain(format!(
                    "critical window needs eps < exp(-e), got ln eps = {ln_eps}"
                )));
            }
            Ok(params.kappa1 / loglog)
        }
        Branch::Sub => Ok(params.kappa2),
    }
}
