//! Computational domain: outer boundary, the two eps-separated inclusions,
//! neck gap functions and boundary data.

mod config;
mod curve;
mod profile;

pub use config::{GeometryConfig, PhiKind, ShapeKind};
pub use curve::{Segment, Shape, Vec2};
pub use profile::{Profile, TableProfile};

use crate::asymptotics::GapHessian;
use crate::error::{NeckError, Result};
use serde::{Deserialize, Serialize};

pub const DEFAULT_CHART_RADIUS: f64 = 1.0;

/// Local gap profile near the touching point: `h1` bounds the upper inclusion
/// from below, `h2 = -lower` bounds the lower inclusion from above.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapProfile {
    pub upper: Profile,
    pub lower: Profile,
    pub c1: f64,
    pub c2: f64,
}

impl GapProfile {
    /// Builds the profile and measures `c1`, `c2` on `0 < |x'| < chart`.
    pub fn new(upper: Profile, lower: Profile, chart: f64) -> Result<Self> {
        let mut g = GapProfile {
            upper,
            lower,
            c1: 0.0,
            c2: 0.0,
        };
        let extent = g.upper.extent().min(g.lower.extent());
        if !(chart < extent) {
            return Err(NeckError::domain(format!(
                "chart radius {chart} exceeds the profile extent {extent}"
            )));
        }
        let (mut c1, mut c2) = (f64::INFINITY, 0.0f64);
        let n = 400;
        let step = chart / n as f64;
        for k in 1..n {
            for x in [k as f64 * step, -(k as f64) * step] {
                c1 = c1.min(g.gap(x) / (x * x));
                for h in [g.upper.clone(), g.lower.clone()] {
                    let s = 0.25 * step;
                    let q = (h.value(x + s) - 2.0 * h.value(x) + h.value(x - s)) / (s * s);
                    c2 = c2.max(q.abs());
                }
            }
        }
        g.c1 = c1;
        g.c2 = c2;
        g.validate(chart)?;
        Ok(g)
    }

    pub fn h1(&self, x: f64) -> f64 {
        self.upper.value(x)
    }

    pub fn h2(&self, x: f64) -> f64 {
        -self.lower.value(x)
    }

    pub fn gap(&self, x: f64) -> f64 {
        self.h1(x) - self.h2(x)
    }

    /// `(h1 - h2)''(0)` as a 1x1 Hessian.
    pub fn hessian(&self) -> GapHessian {
        GapHessian::scalar(self.upper.second(0.0) + self.lower.second(0.0))
    }

    fn validate(&self, chart: f64) -> Result<()> {
        let s = 1e-4;
        for h in [&self.upper, &self.lower] {
            if h.value(0.0).abs() > 1e-12 {
                return Err(NeckError::domain("gap profile does not vanish at 0"));
            }
            let fd = (h.value(s) - h.value(-s)) / (2.0 * s);
            if fd.abs() > 1e-6 {
                return Err(NeckError::domain("gap profile has nonzero slope at 0"));
            }
        }
        if !(self.c1 > 0.0) {
            return Err(NeckError::domain(format!(
                "gap is not bounded below by c1 |x'|^2 on the chart of radius {chart}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeckPoint {
    pub xprime: f64,
    pub xn: f64,
}

impl NeckPoint {
    pub fn new(xprime: f64, xn: f64) -> Self {
        NeckPoint { xprime, xn }
    }
    pub fn as_vec(&self) -> Vec2 {
        Vec2::new(self.xprime, self.xn)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub coef: f64,
    pub px: u32,
    pub py: u32,
}

/// Dirichlet data on the outer boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryData {
    LinearXn,
    Constant { value: f64 },
    Poly { terms: Vec<PolyTerm> },
    /// Zero on the graph parts of a channel, `sin(pi (y - lo)/(hi - lo))` on its end walls.
    WallMode { half_width: f64, y_lo: f64, y_hi: f64 },
}

impl BoundaryData {
    pub fn eval(&self, p: Vec2) -> f64 {
        match self {
            BoundaryData::LinearXn => p.y,
            BoundaryData::Constant { value } => *value,
            BoundaryData::Poly { terms } => terms
                .iter()
                .map(|t| t.coef * p.x.powi(t.px as i32) * p.y.powi(t.py as i32))
                .sum(),
            BoundaryData::WallMode {
                half_width,
                y_lo,
                y_hi,
            } => {
                if p.x.abs() >= half_width * (1.0 - 1e-12) {
                    let s = ((p.y - y_lo) / (y_hi - y_lo)).clamp(0.0, 1.0);
                    (std::f64::consts::PI * s).sin()
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InclusionCondition {
    /// Unknown constant potential with zero net flux.
    Floating,
    /// Prescribed potential.
    Fixed { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inclusion {
    /// Shape at eps = 0.
    pub shape: Shape,
    pub condition: InclusionCondition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub outer: Shape,
    pub inclusions: Vec<Inclusion>,
    pub eps: f64,
    pub gap: Option<GapProfile>,
    pub phi: BoundaryData,
    pub chart_radius: f64,
    /// Invariant under `(x', x_n) -> (x', -x_n)` with inclusion 2 the mirror of inclusion 1.
    pub mirror_symmetric: bool,
    pub label: String,
}

impl Geometry {
    /// Discs of radius 2s at `(0, ±2s)` inside the disc of radius 5s, `φ = x_n`.
    pub fn symmetric_discs(scale: f64, eps: f64) -> Result<Geometry> {
        if !(scale > 0.0) || !(eps >= 0.0) {
            return Err(NeckError::domain("scale must be positive and eps non-negative"));
        }
        let r = 2.0 * scale;
        let chart = DEFAULT_CHART_RADIUS.min(0.5 * r);
        let gap = GapProfile::new(Profile::Circle { radius: r }, Profile::Circle { radius: r }, chart)?;
        let g = Geometry {
            outer: Shape::Disc {
                center: Vec2::new(0.0, 0.0),
                radius: 5.0 * scale,
            },
            inclusions: vec![
                Inclusion {
                    shape: Shape::Disc {
                        center: Vec2::new(0.0, r),
                        radius: r,
                    },
                    condition: InclusionCondition::Floating,
                },
                Inclusion {
                    shape: Shape::Disc {
                        center: Vec2::new(0.0, -r),
                        radius: r,
                    },
                    condition: InclusionCondition::Floating,
                },
            ],
            eps,
            gap: Some(gap),
            phi: BoundaryData::LinearXn,
            chart_radius: chart,
            mirror_symmetric: true,
            label: format!("symmetric_discs(scale={scale})"),
        };
        Ok(g)
    }

    /// Two inclusions with parabolic neck sides `k1 x^2/2` and `-k2 x^2/2` closed
    /// by tangent arcs, inside the disc of radius 5.
    pub fn parabolic(k1: f64, k2: f64, eps: f64, phi: BoundaryData) -> Result<Geometry> {
        Self::capped(
            Profile::Parabola { curvature: k1 },
            Profile::Parabola { curvature: k2 },
            eps,
            phi,
            format!("parabolic(k1={k1}, k2={k2})"),
        )
    }

    /// Inclusions whose neck sides follow the given profiles.
    pub fn capped(
        upper: Profile,
        lower: Profile,
        eps: f64,
        phi: BoundaryData,
        label: String,
    ) -> Result<Geometry> {
        if !(eps >= 0.0) {
            return Err(NeckError::domain("eps must be non-negative"));
        }
        let chart = DEFAULT_CHART_RADIUS;
        let w = chart;
        let symmetric = upper == lower;
        let gap = GapProfile::new(upper.clone(), lower.clone(), chart * 0.999)?;
        let g = Geometry {
            outer: Shape::Disc {
                center: Vec2::new(0.0, 0.0),
                radius: 5.0,
            },
            inclusions: vec![
                Inclusion {
                    shape: Shape::Capped {
                        profile: upper,
                        base: 0.0,
                        side: 1.0,
                        half_width: w,
                    },
                    condition: InclusionCondition::Floating,
                },
                Inclusion {
                    shape: Shape::Capped {
                        profile: lower,
                        base: 0.0,
                        side: -1.0,
                        half_width: w,
                    },
                    condition: InclusionCondition::Floating,
                },
            ],
            eps,
            gap: Some(gap),
            phi,
            chart_radius: chart * 0.999,
            mirror_symmetric: symmetric,
            label,
        };
        g.validate()?;
        Ok(g)
    }

    /// Concentric annulus with prescribed potentials on both circles.
    pub fn annulus(r_in: f64, r_out: f64, inner_value: f64, outer_value: f64) -> Result<Geometry> {
        if !(r_in > 0.0 && r_out > r_in) {
            return Err(NeckError::domain("annulus needs 0 < r_in < r_out"));
        }
        Ok(Geometry {
            outer: Shape::Disc {
                center: Vec2::new(0.0, 0.0),
                radius: r_out,
            },
            inclusions: vec![Inclusion {
                shape: Shape::Disc {
                    center: Vec2::new(0.0, 0.0),
                    radius: r_in,
                },
                condition: InclusionCondition::Fixed { value: inner_value },
            }],
            eps: 0.0,
            gap: None,
            phi: BoundaryData::Constant { value: outer_value },
            chart_radius: DEFAULT_CHART_RADIUS,
            mirror_symmetric: false,
            label: format!("annulus({r_in}, {r_out})"),
        })
    }

    /// Neck channel `{|x'| < half_width}` between the two inclusion surfaces, with
    /// zero data on both surfaces and a sine mode on the end walls.
    pub fn channel(gap: GapProfile, eps: f64, half_width: f64) -> Result<Geometry> {
        if !(eps > 0.0) || !(half_width > 0.0) {
            return Err(NeckError::domain("channel needs eps > 0 and half_width > 0"));
        }
        let y_hi = 0.5 * eps + gap.h1(half_width);
        let y_lo = -0.5 * eps + gap.h2(half_width);
        let outer = Shape::Channel {
            upper: gap.upper.clone(),
            lower: gap.lower.clone(),
            upper_base: 0.5 * eps,
            lower_base: -0.5 * eps,
            half_width,
        };
        Ok(Geometry {
            outer,
            inclusions: Vec::new(),
            eps,
            gap: Some(gap),
            phi: BoundaryData::WallMode {
                half_width,
                y_lo,
                y_hi,
            },
            chart_radius: half_width,
            mirror_symmetric: false,
            label: format!("channel(half_width={half_width})"),
        })
    }

    pub fn with_eps(&self, eps: f64) -> Result<Geometry> {
        let mut g = self.clone();
        g.eps = eps;
        if let (Shape::Channel { .. }, Some(gap)) = (&self.outer, &self.gap) {
            let hw = self.chart_radius;
            return Geometry::channel(gap.clone(), eps, hw);
        }
        g.validate()?;
        Ok(g)
    }

    pub fn with_phi(mut self, phi: BoundaryData) -> Geometry {
        self.phi = phi;
        self
    }

    fn offset(&self, i: usize) -> f64 {
        if self.gap.is_some() {
            if i == 0 {
                0.5 * self.eps
            } else {
                -0.5 * self.eps
            }
        } else {
            0.0
        }
    }

    /// Inclusion `i` after the ±eps/2 translation.
    pub fn inclusion_shape(&self, i: usize) -> Shape {
        self.inclusions[i].shape.translated(self.offset(i))
    }

    /// Membership in the perforated domain.
    pub fn contains(&self, p: Vec2) -> bool {
        self.outer.contains(p)
            && (0..self.inclusions.len()).all(|i| !self.inclusion_shape(i).contains(p))
    }

    fn gap_profile(&self) -> Result<&GapProfile> {
        self.gap
            .as_ref()
            .ok_or_else(|| NeckError::domain("geometry has no neck"))
    }

    /// `eps + h1(x') - h2(x')`.
    pub fn delta(&self, x: NeckPoint) -> Result<f64> {
        let gap = self.gap_profile()?;
        if !(x.xprime.abs() < self.chart_radius) {
            return Err(NeckError::domain(format!(
                "x' = {} lies outside the chart of radius {}",
                x.xprime, self.chart_radius
            )));
        }
        Ok(self.eps + gap.gap(x.xprime))
    }

    /// `eps + |x'|^2`.
    pub fn delta_lower(&self, x: NeckPoint) -> Result<f64> {
        self.gap_profile()?;
        if !(x.xprime.abs() < self.chart_radius) {
            return Err(NeckError::domain(format!(
                "x' = {} lies outside the chart of radius {}",
                x.xprime, self.chart_radius
            )));
        }
        Ok(self.eps + x.xprime * x.xprime)
    }

    /// Upper and lower neck surfaces `eps/2 + h1`, `-eps/2 + h2` at `x'`.
    pub fn neck_bounds(&self, xprime: f64) -> Option<(f64, f64)> {
        let gap = self.gap.as_ref()?;
        Some((-0.5 * self.eps + gap.h2(xprime), 0.5 * self.eps + gap.h1(xprime)))
    }

    /// True when `p` lies in the neck over the chart.
    pub fn in_neck(&self, p: Vec2) -> bool {
        match self.neck_bounds(p.x) {
            Some((lo, hi)) => p.x.abs() < self.chart_radius && p.y >= lo && p.y <= hi,
            None => false,
        }
    }

    /// Range of the Dirichlet data over the outer boundary and fixed inclusions.
    pub fn phi_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in self.outer.sample_boundary(4096) {
            let v = self.phi.eval(p);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        for inc in &self.inclusions {
            if let InclusionCondition::Fixed { value } = inc.condition {
                lo = lo.min(value);
                hi = hi.max(value);
            }
        }
        (lo, hi)
    }

    pub fn validate(&self) -> Result<()> {
        if self.inclusions.len() > 2 {
            return Err(NeckError::domain("at most two inclusions are supported"));
        }
        let m = self.inclusions.len();
        for i in 0..m {
            let shape = self.inclusion_shape(i);
            let pts = shape.sample_boundary(512);
            let outer_pts = self.outer.sample_boundary(512);
            for p in &pts {
                if !self.outer.contains(*p) {
                    return Err(NeckError::domain(format!(
                        "inclusion {} touches or crosses the outer boundary",
                        i + 1
                    )));
                }
                for j in 0..m {
                    if j != i && self.inclusion_shape(j).contains(*p) {
                        return Err(NeckError::domain("inclusions overlap"));
                    }
                }
            }
            for q in &outer_pts {
                if shape.contains(*q) {
                    return Err(NeckError::domain("outer boundary enters an inclusion"));
                }
            }
        }
        if let (Some(gap), 2) = (&self.gap, m) {
            let s1 = self.inclusion_shape(0);
            let s2 = self.inclusion_shape(1);
            let tol = 1e-9;
            for k in 0..=20 {
                let x = (k as f64 / 20.0 - 0.5) * self.chart_radius;
                let y1 = 0.5 * self.eps + gap.h1(x);
                let y2 = -0.5 * self.eps + gap.h2(x);
                if !(s1.contains(Vec2::new(x, y1 + tol)) && !s1.contains(Vec2::new(x, y1 - tol)))
                    || !(s2.contains(Vec2::new(x, y2 - tol)) && !s2.contains(Vec2::new(x, y2 + tol)))
                {
                    return Err(NeckError::domain(format!(
                        "gap profile disagrees with the inclusion boundary at x' = {x}"
                    )));
                }
            }
        }
        Ok(())
    }
}
