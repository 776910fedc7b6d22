//! Conforming triangulations of the perforated domain with neck grading.

mod generate;
mod io;
mod random;
mod refine;

pub use generate::{generate, generate_with, MeshOptions, SizeField};
pub use io::{read_mesh, write_mesh};
pub use random::random_mesh;
pub use refine::refine_uniform;

use crate::geometry::{Geometry, Segment, Vec2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BoundaryTag {
    Outer,
    Inc1,
    Inc2,
}

impl BoundaryTag {
    pub fn name(&self) -> &'static str {
        match self {
            BoundaryTag::Outer => "OUTER",
            BoundaryTag::Inc1 => "INC1",
            BoundaryTag::Inc2 => "INC2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "OUTER" | "0" => Some(BoundaryTag::Outer),
            "INC1" | "1" => Some(BoundaryTag::Inc1),
            "INC2" | "2" => Some(BoundaryTag::Inc2),
            _ => None,
        }
    }

    pub fn inclusion(i: usize) -> Self {
        if i == 0 {
            BoundaryTag::Inc1
        } else {
            BoundaryTag::Inc2
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub v: [usize; 2],
    pub tag: BoundaryTag,
    /// Index into [`TriMesh::curves`] and the parameter span of the edge, when known.
    pub curve: Option<usize>,
    pub t: [f64; 2],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GradingReport {
    pub min_h: f64,
    pub max_h: f64,
    pub min_angle_deg: f64,
    /// Fewest element layers across the gap over sampled `|x'| <= 0.5`.
    pub neck_layers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriMesh {
    pub vertices: Vec<Vec2>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub curves: Vec<Segment>,
    pub grading: GradingReport,
}

impl TriMesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * (pb - pa).cross(pc - pa)
    }

    pub fn centroid(&self, t: usize) -> Vec2 {
        let [a, b, c] = self.triangles[t];
        (self.vertices[a] + self.vertices[b] + self.vertices[c]) * (1.0 / 3.0)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    /// Boundary tag per vertex (`None` for interior vertices).
    pub fn vertex_tags(&self) -> Vec<Option<BoundaryTag>> {
        let mut tags = vec![None; self.vertices.len()];
        for e in &self.boundary_edges {
            for &v in &e.v {
                tags[v] = Some(e.tag);
            }
        }
        tags
    }

    pub fn min_angle_deg(&self) -> f64 {
        let mut best = 180.0f64;
        for tri in &self.triangles {
            for k in 0..3 {
                let p = self.vertices[tri[k]];
                let a = self.vertices[tri[(k + 1) % 3]] - p;
                let b = self.vertices[tri[(k + 2) % 3]] - p;
                let ang = a.cross(b).abs().atan2(a.dot(b)).to_degrees();
                best = best.min(ang);
            }
        }
        best
    }

    /// Shortest and longest edge lengths.
    pub fn edge_length_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for tri in &self.triangles {
            for k in 0..3 {
                let l = (self.vertices[tri[k]] - self.vertices[tri[(k + 1) % 3]]).norm();
                lo = lo.min(l);
                hi = hi.max(l);
            }
        }
        (lo, hi)
    }

    /// Number of triangles crossed by the vertical line `x = xprime` inside the neck.
    pub fn layers_at(&self, g: &Geometry, xprime: f64) -> usize {
        let Some((lo, hi)) = g.neck_bounds(xprime) else {
            return 0;
        };
        let mut count = 0;
        for tri in &self.triangles {
            let xs = tri.map(|v| self.vertices[v].x);
            let xmin = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let xmax = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if xprime < xmin || xprime >= xmax {
                continue;
            }
            let mut ys = Vec::with_capacity(2);
            for k in 0..3 {
                let p = self.vertices[tri[k]];
                let q = self.vertices[tri[(k + 1) % 3]];
                let (a, b) = if p.x <= q.x { (p, q) } else { (q, p) };
                if a.x <= xprime && xprime < b.x {
                    let s = (xprime - a.x) / (b.x - a.x);
                    ys.push(a.y + s * (b.y - a.y));
                }
            }
            if ys.len() == 2 {
                let mid = 0.5 * (ys[0] + ys[1]);
                if mid > lo && mid < hi {
                    count += 1;
                }
            }
        }
        count
    }

    /// Recomputes the grading report; `g` enables the neck layer count.
    pub fn update_grading(&mut self, g: Option<&Geometry>) {
        let (min_h, max_h) = self.edge_length_range();
        let neck_layers = g.filter(|g| g.gap.is_some() && g.inclusions.len() == 2).map(|g| {
            let w = 0.5f64.min(0.999 * g.chart_radius);
            (0..=40)
                .map(|k| self.layers_at(g, (k as f64 / 20.0 - 1.0) * w + 1e-9))
                .min()
                .unwrap_or(0)
        });
        self.grading = GradingReport {
            min_h,
            max_h,
            min_angle_deg: self.min_angle_deg(),
            neck_layers,
        };
    }

    /// Number of distinct undirected edges.
    pub fn num_edges(&self) -> usize {
        let mut set = std::collections::HashSet::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                set.insert((a.min(b), a.max(b)));
            }
        }
        set.len()
    }
}
