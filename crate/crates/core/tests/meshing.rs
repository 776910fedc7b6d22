use neckflow::geometry::{Geometry, Vec2};
use neckflow::mesh::{self, BoundaryTag, MeshOptions, TriMesh};
use neckflow::NeckError;
use std::collections::{BTreeMap, BTreeSet};

fn disc_mesh(eps: f64, h: f64) -> (Geometry, TriMesh) {
    let g = Geometry::symmetric_discs(1.0, eps).unwrap();
    let m = mesh::generate(&g, h, 6).unwrap();
    (g, m)
}

/// Every boundary vertex has exactly two edges of its own tag, and each tag's
/// edges form a single closed loop.
fn assert_closed_loops(m: &TriMesh, expect: &[BoundaryTag]) {
    let mut by_tag: BTreeMap<BoundaryTag, Vec<[usize; 2]>> = BTreeMap::new();
    for e in &m.boundary_edges {
        by_tag.entry(e.tag).or_default().push(e.v);
    }
    assert_eq!(by_tag.keys().copied().collect::<Vec<_>>(), expect);
    for (tag, edges) in by_tag {
        let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for [a, b] in &edges {
            adj.entry(*a).or_default().push(*b);
            adj.entry(*b).or_default().push(*a);
        }
        assert!(adj.values().all(|n| n.len() == 2), "{tag:?} has a branching vertex");
        let start = *adj.keys().next().unwrap();
        let (mut prev, mut cur, mut len) = (start, adj[&start][0], 1);
        while cur != start {
            let next = if adj[&cur][0] == prev { adj[&cur][1] } else { adj[&cur][0] };
            prev = cur;
            cur = next;
            len += 1;
        }
        assert_eq!(len, edges.len(), "{tag:?} splits into several loops");
    }
}

fn assert_valid(m: &TriMesh) {
    for t in 0..m.num_triangles() {
        assert!(m.signed_area(t) > 0.0, "triangle {t} is inverted");
    }
    // each interior edge is shared by two triangles, boundary edges by one
    let mut count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for tri in &m.triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let boundary: BTreeSet<(usize, usize)> = m
        .boundary_edges
        .iter()
        .map(|e| (e.v[0].min(e.v[1]), e.v[0].max(e.v[1])))
        .collect();
    for (e, c) in count {
        assert_eq!(c, if boundary.contains(&e) { 1 } else { 2 }, "edge {e:?}");
    }
}

#[test]
fn symmetric_disc_mesh_resolves_gap() {
    let (g, m) = disc_mesh(1e-2, 0.1);
    assert!(m.grading.neck_layers.unwrap() >= 6);
    assert!(m.layers_at(&g, 0.0) >= 6);
    assert!(m.grading.min_angle_deg >= 20.0, "{:?}", m.grading);
    assert_valid(&m);
    assert_closed_loops(&m, &[BoundaryTag::Outer, BoundaryTag::Inc1, BoundaryTag::Inc2]);
}

#[test]
fn disc_mesh_boundary_is_mirror_symmetric() {
    let (_, m) = disc_mesh(2e-2, 0.2);
    let tags = m.vertex_tags();
    let bverts: Vec<Vec2> = (0..m.num_vertices()).filter(|&v| tags[v].is_some()).map(|v| m.vertices[v]).collect();
    for p in &bverts {
        let q = Vec2::new(p.x, -p.y);
        let d = bverts.iter().map(|b| (*b - q).norm()).fold(f64::INFINITY, f64::min);
        assert!(d < 1e-9, "no mirror partner for {p:?} ({d:e})");
    }
}

#[test]
fn neck_elements_follow_the_gap() {
    let (g, m) = disc_mesh(1e-3, 0.1);
    for x in [-0.3, -0.05, 0.0, 0.02, 0.2, 0.45] {
        assert!(m.layers_at(&g, x) >= 6, "x' = {x}: {} layers", m.layers_at(&g, x));
    }
}

#[test]
fn annulus_has_two_loops() {
    let g = Geometry::annulus(1.0, 2.0, 0.0, 1.0).unwrap();
    let m = mesh::generate(&g, 0.2, 6).unwrap();
    assert_valid(&m);
    assert_closed_loops(&m, &[BoundaryTag::Outer, BoundaryTag::Inc1]);
}

#[test]
fn vertex_cap_gives_capacity_error() {
    let g = Geometry::symmetric_discs(1.0, 1e-4).unwrap();
    let opts = MeshOptions {
        vertex_cap: 2_000,
        ..MeshOptions::new(0.1, 6)
    };
    match mesh::generate_with(&g, &opts) {
        Err(NeckError::Capacity { cap, eps_floor, .. }) => {
            assert_eq!(cap, 2_000);
            assert!(eps_floor > 1e-4);
        }
        other => panic!("expected capacity error, got {:?}", other.map(|m| m.num_vertices())),
    }
}

#[test]
fn rejects_bad_size() {
    let g = Geometry::symmetric_discs(1.0, 1e-2).unwrap();
    assert!(mesh::generate(&g, 0.0, 6).is_err());
}

#[test]
fn uniform_refinement_bookkeeping() {
    let (_, m) = disc_mesh(5e-2, 0.3);
    let r = mesh::refine_uniform(&m);
    assert_eq!(r.num_triangles(), 4 * m.num_triangles());
    assert_eq!(r.num_vertices(), m.num_vertices() + m.num_edges());
    assert_eq!(r.boundary_edges.len(), 2 * m.boundary_edges.len());
    // Euler characteristic of a disc with two holes
    let chi = r.num_vertices() as i64 - r.num_edges() as i64 + r.num_triangles() as i64;
    assert_eq!(chi, -1);
    assert_valid(&r);
    assert_closed_loops(&r, &[BoundaryTag::Outer, BoundaryTag::Inc1, BoundaryTag::Inc2]);
    assert!(r.min_angle_deg() >= m.min_angle_deg() - 1.0);
}

#[test]
fn refinement_projects_onto_circles() {
    let (g, m) = disc_mesh(5e-2, 0.3);
    let r = mesh::refine_uniform(&m);
    let c1 = Vec2::new(0.0, 2.0 + 0.5 * g.eps);
    for e in r.boundary_edges.iter().filter(|e| e.tag == BoundaryTag::Inc1) {
        for &v in &e.v {
            assert!(((r.vertices[v] - c1).norm() - 2.0).abs() < 1e-12);
        }
    }
    for e in r.boundary_edges.iter().filter(|e| e.tag == BoundaryTag::Outer) {
        for &v in &e.v {
            assert!((r.vertices[v].norm() - 5.0).abs() < 1e-12);
        }
    }
}

#[test]
fn text_round_trip() {
    let (_, m) = disc_mesh(5e-2, 0.3);
    let mut buf = Vec::new();
    mesh::write_mesh(&m, &mut buf).unwrap();
    let head = String::from_utf8_lossy(&buf).lines().next().unwrap().to_string();
    assert_eq!(
        head,
        format!("{} {} {}", m.num_vertices(), m.num_triangles(), m.boundary_edges.len())
    );
    let back = mesh::read_mesh(buf.as_slice()).unwrap();
    assert_eq!(back.vertices, m.vertices);
    assert_eq!(back.triangles, m.triangles);
    let tags = |m: &TriMesh| m.boundary_edges.iter().map(|e| (e.v, e.tag)).collect::<Vec<_>>();
    assert_eq!(tags(&back), tags(&m));
}

#[test]
fn malformed_text_is_rejected() {
    assert!(mesh::read_mesh("3 1".as_bytes()).is_err());
    assert!(mesh::read_mesh("1 0 0\n0.0 zero\n".as_bytes()).is_err());
    assert!(mesh::read_mesh("2 0 0\n0 0\n".as_bytes()).is_err());
}

#[test]
fn random_mesh_is_valid() {
    let m = mesh::random_mesh(50, 3).unwrap();
    assert_eq!(m.num_vertices(), 50);
    assert_valid(&m);
    assert_closed_loops(&m, &[BoundaryTag::Outer]);
}
