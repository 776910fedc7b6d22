use super::{BoundaryEdge, BoundaryTag, GradingReport, TriMesh};
use crate::error::{NeckError, Result};
use crate::geometry::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spade::{DelaunayTriangulation, Point2, Triangulation};

/// Delaunay triangulation of the unit-square corners plus `n - 4` random
/// interior points; hull edges are tagged OUTER.
pub fn random_mesh(n: usize, seed: u64) -> Result<TriMesh> {
    if n < 4 {
        return Err(NeckError::domain("random mesh needs at least 4 vertices"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = vec![
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(1.0, 1.0),
        Point2::new(0.0, 1.0),
    ];
    while pts.len() < n {
        pts.push(Point2::new(rng.gen_range(0.02..0.98), rng.gen_range(0.02..0.98)));
    }
    let dt = DelaunayTriangulation::<Point2<f64>>::bulk_load(pts)
        .map_err(|e| NeckError::Numeric(format!("triangulation failed: {e:?}")))?;
    let vertices: Vec<Vec2> = dt
        .vertices()
        .map(|v| Vec2::new(v.position().x, v.position().y))
        .collect();
    let triangles: Vec<[usize; 3]> = dt
        .inner_faces()
        .map(|f| f.vertices().map(|v| v.fix().index()))
        .collect();
    let boundary_edges = dt
        .convex_hull()
        .map(|e| BoundaryEdge {
            v: [e.from().fix().index(), e.to().fix().index()],
            tag: BoundaryTag::Outer,
            curve: None,
            t: [0.0, 0.0],
        })
        .collect();
    let mut m = TriMesh {
        vertices,
        triangles,
        boundary_edges,
        curves: Vec::new(),
        grading: GradingReport::default(),
    };
    for k in 0..m.triangles.len() {
        if m.signed_area(k) < 0.0 {
            m.triangles[k].swap(1, 2);
        }
    }
    m.update_grading(None);
    Ok(m)
}
