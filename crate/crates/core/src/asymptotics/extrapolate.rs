use super::{k_const, sgn, theta, Branch, GapHessian, Regime};
use crate::error::{NeckError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UgapLimit {
    /// Estimate of `lim (U1-U2)/Θ(eps)`.
    pub limit: f64,
    /// `sgn(L)|L|^(p-1)/K`; absent in the subcritical branch where K is undefined.
    pub flux_implied: Option<f64>,
    /// Fitted correction exponent of `L + A eps^gamma`, when extrapolation ran.
    pub rate: Option<f64>,
    pub ratios: Vec<f64>,
    pub warning: Option<String>,
}

fn fit_power_tail(e: [f64; 3], r: [f64; 3]) -> Option<(f64, f64)> {
    let d1 = r[0] - r[1];
    let d2 = r[1] - r[2];
    if d1 == 0.0 || d2 == 0.0 || d1.signum() != d2.signum() {
        return None;
    }
    let target = d1 / d2;
    let shape = |g: f64| (e[0].powf(g) - e[1].powf(g)) / (e[1].powf(g) - e[2].powf(g));
    let (mut lo, mut hi) = (1e-3, 8.0);
    let (flo, fhi) = (shape(lo) - target, shape(hi) - target);
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = shape(mid) - target;
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let g = 0.5 * (lo + hi);
    let a = d2 / (e[1].powf(g) - e[2].powf(g));
    Some((r[2] - a * e[2].powf(g), g))
}

/// Extrapolates `(U1-U2)/Θ(eps)` to eps -> 0 from a decreasing-eps sequence,
/// fitting `L + A eps^gamma` through the last three rows.
pub fn fit_ugap_limit(rows: &[(f64, f64)], regime: &Regime, hessian: &GapHessian) -> Result<UgapLimit> {
    if rows.len() < 3 {
        return Err(NeckError::Fit(format!("need at least 3 rows, got {}", rows.len())));
    }
    if rows.windows(2).any(|w| !(w[1].0 < w[0].0)) {
        return Err(NeckError::Fit("eps must be strictly decreasing".into()));
    }
    let ratios = rows
        .iter()
        .map(|&(e, gap)| Ok(gap / theta(e, regime)?))
        .collect::<Result<Vec<f64>>>()?;
    let m = ratios.len();
    let e = [rows[m - 3].0, rows[m - 2].0, rows[m - 1].0];
    let r = [ratios[m - 3], ratios[m - 2], ratios[m - 1]];
    let scale = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let flat = (r[0] - r[1]).abs() <= 1e-13 * scale && (r[1] - r[2]).abs() <= 1e-13 * scale;
    let diffs: Vec<f64> = ratios.windows(2).map(|w| w[1] - w[0]).collect();
    let monotone = diffs.iter().all(|d| *d >= 0.0) || diffs.iter().all(|d| *d <= 0.0);

    let (limit, rate, warning) = if flat {
        (r[2], None, None)
    } else if !monotone {
        (
            r[2],
            None,
            Some("ratio sequence is not monotone; reporting the last ratio without extrapolation".to_string()),
        )
    } else {
        match fit_power_tail(e, r) {
            Some((l, g)) => (l, Some(g), None),
            None => (
                r[2],
                None,
                Some("no power-law correction fits the last three ratios; reporting the last ratio".to_string()),
            ),
        }
    };
    let flux_implied = match regime.branch {
        Branch::Sub => None,
        _ => {
            let k = k_const(hessian, regime)?;
            Some(sgn(limit) * limit.abs().powf(regime.p - 1.0) / k)
        }
    };
    Ok(UgapLimit {
        limit,
        flux_implied,
        rate,
        ratios,
        warning,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FluxModel {
    /// `F(r) = F_inf + A exp(-B/r)`.
    Exponential,
    /// `F(r) = F_inf + A r^exponent`.
    PowerLaw { exponent: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FluxExtrapolation {
    pub f_inf: f64,
    pub model: FluxModel,
    /// Fitted amplitude `A` and rate `B` (or the fixed exponent).
    pub amplitude: f64,
    pub rate: f64,
    /// True when the fit failed and `f_inf` is the smallest-radius value.
    pub fallback: bool,
}

pub(crate) fn lsq_two(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let det = n * sxx - sx * sx;
    if !(det.abs() > 1e-300) {
        return None;
    }
    let slope = (n * sxy - sx * sy) / det;
    let icpt = (sy - slope * sx) / n;
    let res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (icpt + slope * a - b).powi(2))
        .sum();
    Some((icpt, slope, res))
}

/// Extrapolates cross-section fluxes `(r, F(r))` to `r -> 0`.
pub fn extrapolate_flux(rows: &[(f64, f64)], model: FluxModel) -> Result<FluxExtrapolation> {
    if rows.len() < 3 {
        return Err(NeckError::Fit(format!("need at least 3 radii, got {}", rows.len())));
    }
    let smallest = rows
        .iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .copied()
        .unwrap();
    let r: Vec<f64> = rows.iter().map(|v| v.0).collect();
    let y: Vec<f64> = rows.iter().map(|v| v.1).collect();
    let fallback = |model| FluxExtrapolation {
        f_inf: smallest.1,
        model,
        amplitude: 0.0,
        rate: 0.0,
        fallback: true,
    };
    match model {
        FluxModel::PowerLaw { exponent } => {
            let x: Vec<f64> = r.iter().map(|v| v.powf(exponent)).collect();
            match lsq_two(&x, &y) {
                Some((f, a, _)) if f.is_finite() => Ok(FluxExtrapolation {
                    f_inf: f,
                    model,
                    amplitude: a,
                    rate: exponent,
                    fallback: false,
                }),
                _ => Ok(fallback(model)),
            }
        }
        FluxModel::Exponential => {
            let resid = |b: f64| {
                let x: Vec<f64> = r.iter().map(|v| (-b / v).exp()).collect();
                lsq_two(&x, &y).map(|v| v.2).unwrap_or(f64::INFINITY)
            };
            let (lo, hi) = (1e-3f64.ln(), 1e3f64.ln());
            let grid = 400;
            let mut best = (f64::INFINITY, lo);
            for k in 0..=grid {
                let t = lo + (hi - lo) * k as f64 / grid as f64;
                let v = resid(t.exp());
                if v < best.0 {
                    best = (v, t);
                }
            }
            let step = (hi - lo) / grid as f64;
            let (mut a, mut b) = (best.1 - step, best.1 + step);
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..200 {
                let c = b - phi * (b - a);
                let d = a + phi * (b - a);
                if resid(c.exp()) < resid(d.exp()) {
                    b = d;
                } else {
                    a = c;
                }
            }
            let rate = (0.5 * (a + b)).exp();
            let x: Vec<f64> = r.iter().map(|v| (-rate / v).exp()).collect();
            match lsq_two(&x, &y) {
                Some((f, amp, _))
                    if f.is_finite() && rate > 1.01e-3 && rate < 0.99e3 =>
                {
                    Ok(FluxExtrapolation {
                        f_inf: f,
                        model,
                        amplitude: amp,
                        rate,
                        fallback: false,
                    })
                }
                _ => Ok(fallback(model)),
            }
        }
    }
}

/// Two-point Richardson step in `eps^exponent` using the last two rows.
pub fn extrapolate_in_eps(rows: &[(f64, f64)], exponent: f64) -> Result<f64> {
    if rows.len() < 2 {
        return Err(NeckError::Fit("need at least 2 rows".into()));
    }
    let (e1, v1) = rows[rows.len() - 2];
    let (e2, v2) = rows[rows.len() - 1];
    let (a, b) = (e1.powf(exponent), e2.powf(exponent));
    if !((a - b).abs() > 0.0) {
        return Err(NeckError::Fit("eps values coincide".into()));
    }
    Ok((v2 * a - v1 * b) / (a - b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 2 {
        return Err(NeckError::Fit("insufficient points".into()));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(NeckError::Fit("log-log fit needs positive data".into()));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (icpt, slope, res) =
        lsq_two(&x, &y).ok_or_else(|| NeckError::Fit("degenerate abscissae".into()))?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if tot > 0.0 { 1.0 - res / tot } else { 1.0 };
    Ok(SlopeFit {
        slope,
        intercept: icpt,
        r_squared,
        points: points.len(),
    })
}
