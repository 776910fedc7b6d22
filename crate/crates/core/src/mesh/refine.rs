use super::{BoundaryEdge, TriMesh};
use std::collections::HashMap;

/// Splits every triangle into four through its edge midpoints. Midpoints of
/// boundary edges with a known curve are placed on the curve.
pub fn refine_uniform(m: &TriMesh) -> TriMesh {
    let mut vertices = m.vertices.clone();
    let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
    let mut curve_mid: HashMap<(usize, usize), crate::geometry::Vec2> = HashMap::new();
    for e in &m.boundary_edges {
        if let Some(c) = e.curve {
            let key = (e.v[0].min(e.v[1]), e.v[0].max(e.v[1]));
            curve_mid.insert(key, m.curves[c].point(0.5 * (e.t[0] + e.t[1])));
        }
    }
    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<_>| -> usize {
        let key = (a.min(b), a.max(b));
        *mid.entry(key).or_insert_with(|| {
            let p = curve_mid
                .get(&key)
                .copied()
                .unwrap_or_else(|| (vertices[a] + vertices[b]) * 0.5);
            vertices.push(p);
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(4 * m.triangles.len());
    for &[a, b, c] in &m.triangles {
        let ab = midpoint(a, b, &mut vertices);
        let bc = midpoint(b, c, &mut vertices);
        let ca = midpoint(c, a, &mut vertices);
        triangles.push([a, ab, ca]);
        triangles.push([ab, b, bc]);
        triangles.push([ca, bc, c]);
        triangles.push([ab, bc, ca]);
    }
    let mut boundary_edges = Vec::with_capacity(2 * m.boundary_edges.len());
    for e in &m.boundary_edges {
        let w = midpoint(e.v[0], e.v[1], &mut vertices);
        let tm = 0.5 * (e.t[0] + e.t[1]);
        boundary_edges.push(BoundaryEdge {
            v: [e.v[0], w],
            tag: e.tag,
            curve: e.curve,
            t: [e.t[0], tm],
        });
        boundary_edges.push(BoundaryEdge {
            v: [w, e.v[1]],
            tag: e.tag,
            curve: e.curve,
            t: [tm, e.t[1]],
        });
    }
    let mut out = TriMesh {
        vertices,
        triangles,
        boundary_edges,
        curves: m.curves.clone(),
        grading: m.grading.clone(),
    };
    let (lo, hi) = out.edge_length_range();
    out.grading.min_h = lo;
    out.grading.max_h = hi;
    out.grading.min_angle_deg = out.min_angle_deg();
    out.grading.neck_layers = m.grading.neck_layers.map(|l| 2 * l);
    out
}
