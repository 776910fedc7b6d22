use crate::error::{NeckError, Result};
use serde::{Deserialize, Serialize};

/// A convex height function `h(x)` with `h(0) = h'(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `R - sqrt(R^2 - x^2)`, the lower arc of a disc of radius `R` resting on the origin.
    Circle { radius: f64 },
    /// `k x^2 / 2`.
    Parabola { curvature: f64 },
    Table(TableProfile),
}

impl Profile {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Profile::Circle { radius } => {
                let r = *radius;
                // r - sqrt(r^2-x^2) written to avoid cancellation near 0
                x * x / (r + (r * r - x * x).max(0.0).sqrt())
            }
            Profile::Parabola { curvature } => 0.5 * curvature * x * x,
            Profile::Table(t) => t.value(x),
        }
    }

    pub fn slope(&self, x: f64) -> f64 {
        match self {
            Profile::Circle { radius } => x / (radius * radius - x * x).sqrt(),
            Profile::Parabola { curvature } => curvature * x,
            Profile::Table(t) => t.slope(x),
        }
    }

    pub fn second(&self, x: f64) -> f64 {
        match self {
            Profile::Circle { radius } => {
                let r2 = radius * radius;
                r2 / (r2 - x * x).powf(1.5)
            }
            Profile::Parabola { curvature } => *curvature,
            Profile::Table(t) => t.second(x),
        }
    }

    /// Largest `|x|` where the profile is defined.
    pub fn extent(&self) -> f64 {
        match self {
            Profile::Circle { radius } => *radius,
            Profile::Parabola { .. } => f64::INFINITY,
            Profile::Table(t) => t.extent(),
        }
    }
}

/// Natural cubic spline through sampled `(x, h)` pairs. A table given only for
/// `x >= 0` is extended evenly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableProfile {
    xs: Vec<f64>,
    ys: Vec<f64>,
    m: Vec<f64>,
}

impl TableProfile {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        let mut pts: Vec<(f64, f64)> = points.to_vec();
        if pts.len() < 3 {
            return Err(NeckError::Config("profile table needs at least 3 rows".into()));
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pts.iter().all(|p| p.0 >= 0.0) {
            let mirrored: Vec<(f64, f64)> =
                pts.iter().filter(|p| p.0 > 0.0).map(|p| (-p.0, p.1)).collect();
            pts.extend(mirrored);
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        if pts.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(NeckError::Config("profile table has repeated abscissae".into()));
        }
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let m = natural_spline_moments(&xs, &ys);
        Ok(TableProfile { xs, ys, m })
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut pts = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(NeckError::Config(format!(
                    "profile table line {}: expected two columns",
                    ln + 1
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| {
                    NeckError::Config(format!("profile table line {}: {e}", ln + 1))
                })
            };
            pts.push((parse(cols[0])?, parse(cols[1])?));
        }
        Self::new(&pts)
    }

    fn extent(&self) -> f64 {
        self.xs[0].abs().min(self.xs[self.xs.len() - 1].abs())
    }

    fn locate(&self, x: f64) -> usize {
        let n = self.xs.len();
        match self.xs.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.clamp(1, n - 1) - 1,
        }
    }

    fn coeffs(&self, x: f64) -> (f64, f64, usize) {
        let i = self.locate(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        (a, h, i)
    }

    fn value(&self, x: f64) -> f64 {
        let (a, h, i) = self.coeffs(x);
        let b = 1.0 - a;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    fn slope(&self, x: f64) -> f64 {
        let (a, h, i) = self.coeffs(x);
        let b = 1.0 - a;
        (self.ys[i + 1] - self.ys[i]) / h
            + ((1.0 - 3.0 * a * a) * self.m[i] + (3.0 * b * b - 1.0) * self.m[i + 1]) * h / 6.0
    }

    fn second(&self, x: f64) -> f64 {
        let (a, _, i) = self.coeffs(x);
        a * self.m[i] + (1.0 - a) * self.m[i + 1]
    }
}

fn natural_spline_moments(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        let rhs = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
        let diag = 2.0 * (h0 + h1) - h0 * c[i - 1];
        c[i] = h1 / diag;
        d[i] = (rhs - h0 * d[i - 1]) / diag;
    }
    for i in (1..n - 1).rev() {
        m[i] = d[i] - c[i] * m[i + 1];
    }
    m
}
