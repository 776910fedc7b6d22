use super::profile::Profile;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
    pub fn mirrored(self) -> Vec2 {
        Vec2::new(self.x, -self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}
impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}
impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

/// A parametrized boundary piece, `t` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    Line {
        from: Vec2,
        to: Vec2,
    },
    Arc {
        center: Vec2,
        radius: f64,
        start: f64,
        sweep: f64,
    },
    /// `(x, base + sign * h(x))` for `x` from `x0` to `x1`.
    Graph {
        profile: Profile,
        base: f64,
        sign: f64,
        x0: f64,
        x1: f64,
    },
}

impl Segment {
    pub fn point(&self, t: f64) -> Vec2 {
        match self {
            Segment::Line { from, to } => *from + (*to - *from) * t,
            Segment::Arc {
                center,
                radius,
                start,
                sweep,
            } => {
                let a = start + sweep * t;
                Vec2::new(center.x + radius * a.cos(), center.y + radius * a.sin())
            }
            Segment::Graph {
                profile,
                base,
                sign,
                x0,
                x1,
            } => {
                let x = x0 + (x1 - x0) * t;
                Vec2::new(x, base + sign * profile.value(x))
            }
        }
    }

    /// `|dP/dt|`.
    pub fn speed(&self, t: f64) -> f64 {
        match self {
            Segment::Line { from, to } => (*to - *from).norm(),
            Segment::Arc { radius, sweep, .. } => (radius * sweep).abs(),
            Segment::Graph {
                profile, x0, x1, ..
            } => {
                let x = x0 + (x1 - x0) * t;
                (x1 - x0).abs() * profile.slope(x).hypot(1.0)
            }
        }
    }

    pub fn mirrored(&self) -> Segment {
        match self {
            Segment::Line { from, to } => Segment::Line {
                from: from.mirrored(),
                to: to.mirrored(),
            },
            Segment::Arc {
                center,
                radius,
                start,
                sweep,
            } => Segment::Arc {
                center: center.mirrored(),
                radius: *radius,
                start: -start,
                sweep: -sweep,
            },
            Segment::Graph {
                profile,
                base,
                sign,
                x0,
                x1,
            } => Segment::Graph {
                profile: profile.clone(),
                base: -base,
                sign: -sign,
                x0: *x0,
                x1: *x1,
            },
        }
    }
}

/// A closed convex curve, or the channel region used for the decay problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Disc {
        center: Vec2,
        radius: f64,
    },
    /// Body whose near-neck side is the graph `y = base + side * h(x)`, `|x| <= half_width`,
    /// closed on the far side by the circular arc tangent to the graph at both ends.
    /// `side = 1` puts the body above the graph, `side = -1` below it.
    Capped {
        profile: Profile,
        base: f64,
        side: f64,
        half_width: f64,
    },
    /// `{|x| < half_width, lower_base - lower(x) < y < upper_base + upper(x)}`.
    Channel {
        upper: Profile,
        lower: Profile,
        upper_base: f64,
        lower_base: f64,
        half_width: f64,
    },
}

impl Shape {
    fn cap_circle(profile: &Profile, half_width: f64) -> (f64, f64, f64) {
        let w = half_width;
        let yw = profile.value(w);
        let s = profile.slope(w);
        let cy = yw + w / s;
        let rho = (w * w + (w / s) * (w / s)).sqrt();
        (yw, cy, rho)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        match self {
            Shape::Disc { center, radius } => (p - *center).norm() < *radius,
            Shape::Capped {
                profile,
                base,
                side,
                half_width,
            } => {
                let y = side * (p.y - base);
                let (yw, cy, rho) = Self::cap_circle(profile, *half_width);
                if y >= yw {
                    p.x.hypot(y - cy) < rho
                } else {
                    p.x.abs() < *half_width && y > profile.value(p.x)
                }
            }
            Shape::Channel {
                upper,
                lower,
                upper_base,
                lower_base,
                half_width,
            } => {
                p.x.abs() < *half_width
                    && p.y < upper_base + upper.value(p.x)
                    && p.y > lower_base - lower.value(p.x)
            }
        }
    }

    pub fn translated(&self, dy: f64) -> Shape {
        match self {
            Shape::Disc { center, radius } => Shape::Disc {
                center: Vec2::new(center.x, center.y + dy),
                radius: *radius,
            },
            Shape::Capped {
                profile,
                base,
                side,
                half_width,
            } => Shape::Capped {
                profile: profile.clone(),
                base: base + dy,
                side: *side,
                half_width: *half_width,
            },
            Shape::Channel {
                upper,
                lower,
                upper_base,
                lower_base,
                half_width,
            } => Shape::Channel {
                upper: upper.clone(),
                lower: lower.clone(),
                upper_base: upper_base + dy,
                lower_base: lower_base + dy,
                half_width: *half_width,
            },
        }
    }

    pub fn mirrored(&self) -> Shape {
        match self {
            Shape::Disc { center, radius } => Shape::Disc {
                center: center.mirrored(),
                radius: *radius,
            },
            Shape::Capped {
                profile,
                base,
                side,
                half_width,
            } => Shape::Capped {
                profile: profile.clone(),
                base: -base,
                side: -side,
                half_width: *half_width,
            },
            Shape::Channel {
                upper,
                lower,
                upper_base,
                lower_base,
                half_width,
            } => Shape::Channel {
                upper: lower.clone(),
                lower: upper.clone(),
                upper_base: -lower_base,
                lower_base: -upper_base,
                half_width: *half_width,
            },
        }
    }

    /// Boundary as a chain of segments; consecutive segments share endpoints.
    pub fn segments(&self) -> Vec<Segment> {
        match self {
            Shape::Disc { center, radius } => vec![Segment::Arc {
                center: *center,
                radius: *radius,
                start: -0.5 * PI,
                sweep: 2.0 * PI,
            }],
            Shape::Capped {
                profile,
                base,
                side,
                half_width,
            } => {
                let w = *half_width;
                let (yw, cy, rho) = Self::cap_circle(profile, w);
                let theta0 = (yw - cy).atan2(w);
                let up = vec![
                    Segment::Graph {
                        profile: profile.clone(),
                        base: 0.0,
                        sign: 1.0,
                        x0: -w,
                        x1: w,
                    },
                    Segment::Arc {
                        center: Vec2::new(0.0, cy),
                        radius: rho,
                        start: theta0,
                        sweep: PI - 2.0 * theta0,
                    },
                ];
                let placed: Vec<Segment> = if *side > 0.0 {
                    up
                } else {
                    up.iter().map(|s| s.mirrored()).collect()
                };
                placed.into_iter().map(|s| shift(s, *base)).collect()
            }
            Shape::Channel {
                upper,
                lower,
                upper_base,
                lower_base,
                half_width,
            } => {
                let w = *half_width;
                let top = |x: f64| upper_base + upper.value(x);
                let bot = |x: f64| lower_base - lower.value(x);
                vec![
                    Segment::Graph {
                        profile: lower.clone(),
                        base: *lower_base,
                        sign: -1.0,
                        x0: -w,
                        x1: w,
                    },
                    Segment::Line {
                        from: Vec2::new(w, bot(w)),
                        to: Vec2::new(w, top(w)),
                    },
                    Segment::Graph {
                        profile: upper.clone(),
                        base: *upper_base,
                        sign: 1.0,
                        x0: w,
                        x1: -w,
                    },
                    Segment::Line {
                        from: Vec2::new(-w, top(-w)),
                        to: Vec2::new(-w, bot(-w)),
                    },
                ]
            }
        }
    }

    /// Points spread along the boundary, used for validation and data ranges.
    pub fn sample_boundary(&self, per_segment: usize) -> Vec<Vec2> {
        let mut out = Vec::new();
        for s in self.segments() {
            for k in 0..per_segment {
                out.push(s.point(k as f64 / per_segment as f64));
            }
        }
        out
    }
}

fn shift(s: Segment, dy: f64) -> Segment {
    match s {
        Segment::Line { from, to } => Segment::Line {
            from: Vec2::new(from.x, from.y + dy),
            to: Vec2::new(to.x, to.y + dy),
        },
        Segment::Arc {
            center,
            radius,
            start,
            sweep,
        } => Segment::Arc {
            center: Vec2::new(center.x, center.y + dy),
            radius,
            start,
            sweep,
        },
        Segment::Graph {
            profile,
            base,
            sign,
            x0,
            x1,
        } => Segment::Graph {
            profile,
            base: base + dy,
            sign,
            x0,
            x1,
        },
    }
}
