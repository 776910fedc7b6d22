use super::{k_const, sgn, theta, Branch, GapHessian, Regime};
use crate::error::{NeckError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymptoticPrediction {
    pub regime: Regime,
    pub eps: f64,
    pub theta: f64,
    pub k_const: Option<f64>,
    /// `sgn(F)(K|F|)^(1/(p-1))` above the critical exponent, the U-gap below it.
    pub leading_coeff: f64,
    /// Set when a zero flux makes the leading term vanish identically.
    pub flagged_zero: bool,
    /// Error envelope of the expansion, relative to the leading term.
    pub error_envelope: String,
}

impl AsymptoticPrediction {
    /// Predicted vertical gradient at a point with local gap `delta`.
    pub fn predicted_dn(&self, delta: f64) -> Result<f64> {
        if !(delta > 0.0) {
            return Err(NeckError::domain(format!("delta must be positive, got {delta}")));
        }
        Ok(self.theta * self.leading_coeff / delta)
    }
}

pub fn predict_expansion(
    f_or_gap: f64,
    regime: &Regime,
    eps: f64,
    hessian: &GapHessian,
) -> Result<AsymptoticPrediction> {
    let th = theta(eps, regime)?;
    let (k, leading, flagged) = match regime.branch {
        Branch::Super | Branch::Critical => {
            let k = k_const(hessian, regime)?;
            let lead = sgn(f_or_gap) * (k * f_or_gap.abs()).powf(1.0 / (regime.p - 1.0));
            (Some(k), lead, f_or_gap == 0.0)
        }
        Branch::Sub => (None, f_or_gap, false),
    };
    Ok(AsymptoticPrediction {
        regime: *regime,
        eps,
        theta: th,
        k_const: k,
        leading_coeff: leading,
        flagged_zero: flagged,
        error_envelope: "O(delta^(beta/2)), beta in (0,1) unknown".to_string(),
    })
}
