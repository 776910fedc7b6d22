use super::{theta, Branch, GapHessian, Regime};
use crate::error::{NeckError, Result};
use serde::{Deserialize, Serialize};
use std::collections::BinaryHeap;
use std::f64::consts::PI;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: FnMut(f64) -> Result<f64>>(f: &mut F, a: f64, b: f64) -> Result<Piece> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x)? + f(c + x)?;
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kronrod * h;
    let error = ((kronrod - gauss) * h).abs();
    if !value.is_finite() {
        return Err(NeckError::Numeric(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    Ok(Piece { a, b, value, error })
}

/// Globally adaptive 7/15-point Gauss-Kronrod quadrature of `f` over `[a, b]`.
pub fn gauss_kronrod<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    let first = gk15(&mut f, a, b)?;
    let mut total = first.value;
    let mut err = first.error;
    heap.push(first);
    while err > abs_tol.max(rel_tol * total.abs()) {
        if heap.len() >= MAX_INTERVALS {
            return Err(NeckError::Accuracy(format!(
                "quadrature on [{a}, {b}] stopped at error {err:e} after {MAX_INTERVALS} intervals"
            )));
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        let left = gk15(&mut f, worst.a, mid)?;
        let right = gk15(&mut f, mid, worst.b)?;
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if err < 0.0 {
            err = heap.iter().map(|p| p.error).sum();
        }
    }
    let value: f64 = heap.iter().map(|p| p.value).sum();
    Ok(QuadResult {
        value,
        error: err,
        intervals: heap.len(),
    })
}

const RADIAL_TOL: f64 = 1e-11;
const ANGULAR_TOL: f64 = 1e-10;

/// `∫_0^R (eps + q rho^2)^(1-p) rho^(d-1) d rho`, split at multiples of the
/// peak width `sqrt(eps/q)`.
fn radial(eps: f64, q: f64, p: f64, d: usize, radius: f64) -> Result<f64> {
    let width = (eps / q).sqrt();
    let mut breaks = vec![0.0];
    let mut b = width;
    while b < radius {
        breaks.push(b);
        b *= 4.0;
    }
    breaks.push(radius);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let r = gauss_kronrod(
            |rho| Ok((eps + q * rho * rho).powf(1.0 - p) * rho.powi(d as i32 - 1)),
            w[0],
            w[1],
            RADIAL_TOL,
            0.0,
        )?;
        total += r.value;
    }
    Ok(total)
}

/// Integrates `g(omega)` over the unit sphere in `R^d` with hyperspherical angles.
fn sphere<G: FnMut(&[f64]) -> Result<f64>>(d: usize, g: &mut G) -> Result<f64> {
    if d == 1 {
        return Ok(g(&[1.0])? + g(&[-1.0])?);
    }
    let mut omega = vec![0.0; d];
    sphere_level(d, 0, 1.0, &mut omega, g)
}

fn sphere_level<G: FnMut(&[f64]) -> Result<f64>>(
    d: usize,
    k: usize,
    sin_prod: f64,
    omega: &mut Vec<f64>,
    g: &mut G,
) -> Result<f64> {
    if k == d - 2 {
        let r = gauss_kronrod(
            |phi| {
                omega[k] = sin_prod * phi.cos();
                omega[k + 1] = sin_prod * phi.sin();
                g(omega)
            },
            0.0,
            2.0 * PI,
            ANGULAR_TOL,
            0.0,
        )?;
        return Ok(r.value);
    }
    let power = (d - 2 - k) as i32;
    let r = gauss_kronrod(
        |t| {
            omega[k] = sin_prod * t.cos();
            let inner = sphere_level(d, k + 1, sin_prod * t.sin(), omega, g)?;
            Ok(inner * t.sin().powi(power))
        },
        0.0,
        PI,
        ANGULAR_TOL,
        0.0,
    )?;
    Ok(r.value)
}

/// Neck integral `∫_{|y'|<radius} (Θ(eps) / (eps + y'ᵀHy'/2))^(p-1) dy'`.
pub fn neck_integral(
    regime: &Regime,
    hessian: &GapHessian,
    radius: f64,
    eps: f64,
) -> Result<f64> {
    if regime.branch == Branch::Sub {
        return Err(NeckError::UnsupportedBranch(
            "the neck integral limit is only finite for p >= (n+1)/2".into(),
        ));
    }
    if hessian.dim() + 1 != regime.n {
        return Err(NeckError::domain("Hessian size does not match dimension"));
    }
    if !(radius > 0.0) || !(eps > 0.0) {
        return Err(NeckError::domain("radius and eps must be positive"));
    }
    hessian.determinant()?;
    let th = theta(eps, regime)?;
    let d = regime.n - 1;
    let p = regime.p;
    let mut integrand = |omega: &[f64]| {
        let q = 0.5 * hessian.quad_form(omega);
        radial(eps, q, p, d, radius)
    };
    let raw = sphere(d, &mut integrand)?;
    Ok(th.powf(p - 1.0) * raw)
}

pub const NECK_INTEGRAL_EPS: [f64; 3] = [1e-4, 1e-6, 1e-8];
pub const NECK_INTEGRAL_RADII: [f64; 3] = [0.2, 0.1, 0.05];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeckIntegralLimit {
    /// Iterated limit estimate (eps first, then radius).
    pub value: f64,
    /// Raw quadrature values, one row per radius, one column per eps.
    pub table: Vec<Vec<f64>>,
    /// eps-extrapolated value per radius.
    pub per_radius: Vec<f64>,
}

/// Solves the small dense system `basis * c = values` for three points.
fn fit3(basis: &[[f64; 3]; 3], values: &[f64; 3]) -> Result<[f64; 3]> {
    let mut a = *basis;
    let mut b = *values;
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        if a[col][col].abs() < 1e-300 {
            return Err(NeckError::Numeric("singular extrapolation system".into()));
        }
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = b[row];
        for k in row + 1..3 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Ok(x)
}

/// Iterated limit `lim_{r->0} lim_{eps->0}` of the neck integral, accelerated in
/// eps by the known correction structure and in r by an even power series.
pub fn neck_integral_limit(regime: &Regime, hessian: &GapHessian) -> Result<NeckIntegralLimit> {
    let mut table = Vec::new();
    let mut per_radius = Vec::new();
    for &r in &NECK_INTEGRAL_RADII {
        let mut row = [0.0; 3];
        for (k, &eps) in NECK_INTEGRAL_EPS.iter().enumerate() {
            row[k] = neck_integral(regime, hessian, r, eps)?;
        }
        let mut basis = [[0.0; 3]; 3];
        for (k, &eps) in NECK_INTEGRAL_EPS.iter().enumerate() {
            basis[k] = match regime.branch {
                Branch::Super => {
                    let g = regime.tail_exponent();
                    [1.0, eps.powf(g), eps.powf(g + 1.0)]
                }
                _ => {
                    let inv_l = 1.0 / eps.ln().abs();
                    [1.0, inv_l, eps * inv_l]
                }
            };
        }
        per_radius.push(fit3(&basis, &row)?[0]);
        table.push(row.to_vec());
    }
    let mut basis = [[0.0; 3]; 3];
    let mut vals = [0.0; 3];
    for (k, &r) in NECK_INTEGRAL_RADII.iter().enumerate() {
        basis[k] = [1.0, r * r, r.powi(4)];
        vals[k] = per_radius[k];
    }
    let value = fit3(&basis, &vals)?[0];
    Ok(NeckIntegralLimit {
        value,
        table,
        per_radius,
    })
}
