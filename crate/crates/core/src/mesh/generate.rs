use super::{BoundaryEdge, BoundaryTag, TriMesh};
use crate::error::{NeckError, Result};
use crate::geometry::{Geometry, Segment, Shape, Vec2};
use spade::handles::{FixedVertexHandle, VertexHandle};
use spade::{
    ConstrainedDelaunayTriangulation, FloatTriangulation, Intersection, LineIntersectionIterator,
    Point2, PositionInTriangulation, Triangulation,
};
use std::collections::{BTreeMap, HashSet};

type Cdt = ConstrainedDelaunayTriangulation<Point2<f64>>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshOptions {
    pub target_h: f64,
    pub neck_layers: usize,
    pub min_angle_deg: f64,
    pub vertex_cap: usize,
    /// Growth rate of the element size away from the neck.
    pub grading: f64,
}

impl MeshOptions {
    pub fn new(target_h: f64, neck_layers: usize) -> Self {
        MeshOptions {
            target_h,
            neck_layers,
            ..Default::default()
        }
    }
}

impl Default for MeshOptions {
    fn default() -> Self {
        MeshOptions {
            target_h: 0.1,
            neck_layers: 6,
            min_angle_deg: 25.0,
            vertex_cap: 2_000_000,
            grading: 0.25,
        }
    }
}

/// Target element size: `min(target_h, δ(x)/layers)` across the neck, growing
/// linearly away from it.
#[derive(Debug, Clone)]
pub struct SizeField {
    target_h: f64,
    layers: f64,
    grading: f64,
    neck: Option<NeckSizing>,
}

#[derive(Debug, Clone)]
struct NeckSizing {
    geometry: Geometry,
    sources: Vec<(Vec2, f64)>,
}

impl SizeField {
    pub fn new(g: &Geometry, opts: &MeshOptions) -> Self {
        let layers = opts.neck_layers.max(1) as f64;
        let neck = g.gap.as_ref().map(|gap| {
            let chart = g.chart_radius;
            let mut xs = vec![0.0];
            let mut x = 0.25 * g.eps.sqrt().max(1e-6);
            while x < chart {
                xs.push(x);
                xs.push(-x);
                x *= 1.3;
            }
            let sources = xs
                .into_iter()
                .map(|x| {
                    let mid = 0.5 * (gap.h1(x) + gap.h2(x));
                    (Vec2::new(x, mid), (g.eps + gap.gap(x)) / layers)
                })
                .collect();
            NeckSizing {
                geometry: g.clone(),
                sources,
            }
        });
        SizeField {
            target_h: opts.target_h,
            layers,
            grading: opts.grading,
            neck,
        }
    }

    pub fn at(&self, p: Vec2) -> f64 {
        let Some(neck) = &self.neck else {
            return self.target_h;
        };
        let g = &neck.geometry;
        if p.x.abs() < g.chart_radius {
            if let Some((lo, hi)) = g.neck_bounds(p.x) {
                let d = hi - lo;
                if p.y >= lo - 0.25 * d && p.y <= hi + 0.25 * d {
                    return self.target_h.min(d / self.layers);
                }
            }
        }
        let cone = neck
            .sources
            .iter()
            .map(|(s, h)| h + self.grading * (p - *s).norm())
            .fold(f64::INFINITY, f64::min);
        self.target_h.min(cone)
    }
}

struct Piece {
    seg: Segment,
    tag: Option<BoundaryTag>,
}

/// A boundary chain; the last piece ends where the first starts.
struct Chain {
    pieces: Vec<Piece>,
}

struct Domain<'a> {
    geometry: &'a Geometry,
    chains: Vec<Chain>,
    upper_half: bool,
}

impl Domain<'_> {
    fn inside(&self, p: Vec2) -> bool {
        (!self.upper_half || p.y > 0.0) && self.geometry.contains(p)
    }
}

fn half_domain_possible(g: &Geometry) -> bool {
    g.mirror_symmetric
        && g.inclusions.len() == 2
        && g.eps > 0.0
        && matches!(g.outer, Shape::Disc { center, .. } if center.x == 0.0 && center.y == 0.0)
}

fn build_domain(g: &Geometry) -> Domain<'_> {
    let upper_half = half_domain_possible(g);
    let mut chains = Vec::new();
    if upper_half {
        let Shape::Disc { radius, .. } = g.outer else {
            unreachable!()
        };
        chains.push(Chain {
            pieces: vec![
                Piece {
                    seg: Segment::Arc {
                        center: Vec2::new(0.0, 0.0),
                        radius,
                        start: 0.0,
                        sweep: std::f64::consts::PI,
                    },
                    tag: Some(BoundaryTag::Outer),
                },
                Piece {
                    seg: Segment::Line {
                        from: Vec2::new(-radius, 0.0),
                        to: Vec2::new(radius, 0.0),
                    },
                    tag: None,
                },
            ],
        });
        chains.push(Chain {
            pieces: g
                .inclusion_shape(0)
                .segments()
                .into_iter()
                .map(|seg| Piece {
                    seg,
                    tag: Some(BoundaryTag::Inc1),
                })
                .collect(),
        });
    } else {
        chains.push(Chain {
            pieces: g
                .outer
                .segments()
                .into_iter()
                .map(|seg| Piece {
                    seg,
                    tag: Some(BoundaryTag::Outer),
                })
                .collect(),
        });
        for i in 0..g.inclusions.len() {
            chains.push(Chain {
                pieces: g
                    .inclusion_shape(i)
                    .segments()
                    .into_iter()
                    .map(|seg| Piece {
                        seg,
                        tag: Some(BoundaryTag::inclusion(i)),
                    })
                    .collect(),
            });
        }
    }
    Domain {
        geometry: g,
        chains,
        upper_half,
    }
}

/// Parameters `0 = t_0 < ... < t_N = 1` spacing the segment according to the size field.
fn discretize(seg: &Segment, size: &SizeField, min_edges: usize) -> Vec<f64> {
    let mut ts = vec![0.0];
    let mut ms = vec![0.0];
    let mut t = 0.0;
    let mut m = 0.0;
    while t < 1.0 {
        let h = size.at(seg.point(t));
        let sp = seg.speed(t).max(1e-300);
        let dt = (0.1 * h / sp).min(1e-2).min(1.0 - t);
        let tn = t + dt;
        let hn = size.at(seg.point(tn));
        let spn = seg.speed(tn);
        m += 0.5 * dt * (sp / h + spn / hn);
        t = tn;
        ts.push(t);
        ms.push(m);
    }
    let n = (m.round() as usize).max(min_edges).max(1);
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let mut j = 0;
    for k in 1..n {
        let target = m * k as f64 / n as f64;
        while ms[j + 1] < target {
            j += 1;
        }
        let s = (target - ms[j]) / (ms[j + 1] - ms[j]);
        out.push(ts[j] + s * (ts[j + 1] - ts[j]));
    }
    out.push(1.0);
    out
}

#[derive(Debug, Clone, Copy)]
struct SegInfo {
    /// Vertex at parameter `t0` and at `t1`.
    va: usize,
    vb: usize,
    curve: usize,
    t0: f64,
    t1: f64,
    tag: Option<BoundaryTag>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

fn p2(v: Vec2) -> Point2<f64> {
    Point2::new(v.x, v.y)
}

fn v2(p: Point2<f64>) -> Vec2 {
    Vec2::new(p.x, p.y)
}

fn circumcircle(a: Vec2, b: Vec2, c: Vec2) -> (Vec2, f64) {
    let ab = b - a;
    let ac = c - a;
    let d = 2.0 * ab.cross(ac);
    let ab2 = ab.dot(ab);
    let ac2 = ac.dot(ac);
    let ux = (ac.y * ab2 - ab.y * ac2) / d;
    let uy = (ab.x * ac2 - ac.x * ab2) / d;
    let off = Vec2::new(ux, uy);
    (a + off, off.norm())
}

struct Mesher<'a> {
    cdt: Cdt,
    segs: BTreeMap<(usize, usize), SegInfo>,
    curves: Vec<Segment>,
    domain: Domain<'a>,
    size: SizeField,
    opts: MeshOptions,
    stuck: HashSet<[usize; 3]>,
}

fn handle(i: usize) -> FixedVertexHandle {
    FixedVertexHandle::from_index(i)
}

impl<'a> Mesher<'a> {
    fn new(domain: Domain<'a>, size: SizeField, opts: MeshOptions) -> Result<Self> {
        let mut points: Vec<Vec2> = Vec::new();
        let mut segs = BTreeMap::new();
        let mut curves = Vec::new();
        let mut edges = Vec::new();
        for chain in &domain.chains {
            let first = points.len();
            let single = chain.pieces.len() == 1;
            let mut pending: Vec<(usize, Vec<f64>)> = Vec::new();
            for piece in &chain.pieces {
                curves.push(piece.seg.clone());
                let ts = discretize(&piece.seg, &size, if single { 12 } else { 2 });
                pending.push((curves.len() - 1, ts));
            }
            // vertices: the start of every piece, then its interior points
            let mut piece_vertices: Vec<Vec<usize>> = Vec::new();
            for (ci, ts) in &pending {
                let mut ids = Vec::new();
                for &t in &ts[..ts.len() - 1] {
                    points.push(curves[*ci].point(t));
                    ids.push(points.len() - 1);
                }
                piece_vertices.push(ids);
            }
            let m = pending.len();
            for (k, (ci, ts)) in pending.iter().enumerate() {
                let mut ids = piece_vertices[k].clone();
                let next_start = if k + 1 < m {
                    piece_vertices[k + 1][0]
                } else {
                    first
                };
                ids.push(next_start);
                for j in 0..ids.len() - 1 {
                    let (a, b) = (ids[j], ids[j + 1]);
                    edges.push([a, b]);
                    segs.insert(
                        key(a, b),
                        SegInfo {
                            va: a,
                            vb: b,
                            curve: *ci,
                            t0: ts[j],
                            t1: ts[j + 1],
                            tag: chain.pieces[k].tag,
                        },
                    );
                }
            }
        }
        let cdt = Cdt::bulk_load_cdt(points.iter().map(|p| p2(*p)).collect(), edges)
            .map_err(|e| NeckError::Numeric(format!("boundary triangulation failed: {e:?}")))?;
        if cdt.num_vertices() != points.len() {
            return Err(NeckError::Numeric("boundary discretization has duplicate points".into()));
        }
        Ok(Mesher {
            cdt,
            segs,
            curves,
            domain,
            size,
            opts,
            stuck: HashSet::new(),
        })
    }

    fn pos(&self, i: usize) -> Vec2 {
        v2(self.cdt.vertex(handle(i)).position())
    }

    fn check_cap(&self) -> Result<()> {
        let n = self.cdt.num_vertices();
        if n > self.opts.vertex_cap {
            let eps = self.domain.geometry.eps;
            let ratio = n as f64 / self.opts.vertex_cap as f64;
            return Err(NeckError::Capacity {
                cap: self.opts.vertex_cap,
                estimated: n,
                eps_floor: eps * ratio * ratio,
            });
        }
        Ok(())
    }

    fn face_in_domain(&self, pts: [Vec2; 3]) -> bool {
        let c = (pts[0] + pts[1] + pts[2]) * (1.0 / 3.0);
        self.domain.inside(c)
    }

    fn split_segment(&mut self, k: (usize, usize)) -> Result<()> {
        let Some(info) = self.segs.get(&k).copied() else {
            return Ok(());
        };
        let tm = 0.5 * (info.t0 + info.t1);
        let p = self.curves[info.curve].point(tm);
        let (ha, hb) = (handle(info.va), handle(info.vb));
        let edge = self
            .cdt
            .get_edge_from_neighbors(ha, hb)
            .map(|e| e.fix().as_undirected())
            .ok_or_else(|| NeckError::Numeric("lost a boundary segment".into()))?;
        self.cdt.remove_constraint_edge(edge);
        let w = self
            .cdt
            .insert(p2(p))
            .map_err(|e| NeckError::Numeric(format!("vertex insertion failed: {e:?}")))?;
        let wi = w.index();
        if wi == info.va || wi == info.vb || self.cdt.num_vertices() <= wi {
            self.cdt.add_constraint(ha, hb);
            return Err(NeckError::Numeric(
                "boundary segment too short to split in double precision".into(),
            ));
        }
        self.segs.remove(&k);
        for (a, b, t0, t1) in [(info.va, wi, info.t0, tm), (wi, info.vb, tm, info.t1)] {
            let added = self.cdt.try_add_constraint(handle(a), handle(b));
            if added.is_empty() {
                return Err(NeckError::Numeric(format!(
                    "boundary pieces cross near ({:.3e}, {:.3e}); refine the boundary",
                    p.x, p.y
                )));
            }
            self.segs.insert(
                key(a, b),
                SegInfo {
                    va: a,
                    vb: b,
                    curve: info.curve,
                    t0,
                    t1,
                    tag: info.tag,
                },
            );
        }
        self.check_cap()
    }

    fn encroached_segments(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (k, info) in &self.segs {
            let a = self.pos(info.va);
            let b = self.pos(info.vb);
            let mid = (a + b) * 0.5;
            let r2 = 0.25 * (b - a).dot(b - a) * (1.0 - 1e-9);
            let hit = self
                .cdt
                .get_vertices_in_circle(p2(mid), r2)
                .any(|v: VertexHandle<'_, _, _, _, _>| {
                    let i = v.fix().index();
                    if i == info.va || i == info.vb {
                        return false;
                    }
                    let q = v2(v.position());
                    // only vertices on the domain side can encroach
                    let probe = mid + (q - mid) * 0.5;
                    self.domain.inside(probe)
                });
            if hit {
                out.push(*k);
            }
        }
        out
    }

    fn bad_faces(&self) -> Vec<([usize; 3], f64)> {
        let ratio_limit = 1.0 / (2.0 * self.opts.min_angle_deg.to_radians().sin());
        let mut out = Vec::new();
        for f in self.cdt.inner_faces() {
            let vs = f.vertices().map(|v| v.fix().index());
            let pts = vs.map(|i| self.pos(i));
            if !self.face_in_domain(pts) {
                continue;
            }
            let mut sorted = vs;
            sorted.sort_unstable();
            if self.stuck.contains(&sorted) {
                continue;
            }
            let (_, r) = circumcircle(pts[0], pts[1], pts[2]);
            let c = (pts[0] + pts[1] + pts[2]) * (1.0 / 3.0);
            let h = self.size.at(c);
            let shortest = (0..3)
                .map(|k| (pts[k] - pts[(k + 1) % 3]).norm())
                .fold(f64::INFINITY, f64::min);
            let size_bad = r / h;
            let angle_bad = r / shortest / ratio_limit;
            let badness = size_bad.max(angle_bad);
            if size_bad > 0.65 || angle_bad > 1.0 {
                out.push((vs, badness));
            }
        }
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out
    }

    fn face_exists(&self, vs: [usize; 3]) -> bool {
        match self.cdt.get_edge_from_neighbors(handle(vs[0]), handle(vs[1])) {
            Some(e) => {
                let e = if e.face().is_outer() { e.rev() } else { e };
                e.opposite_vertex().map(|v| v.fix().index()) == Some(vs[2])
                    || e.rev().opposite_vertex().map(|v| v.fix().index()) == Some(vs[2])
            }
            None => false,
        }
    }

    fn is_constraint(&self, a: usize, b: usize) -> bool {
        self.segs.contains_key(&key(a, b))
    }

    /// Constraint segments whose diametral circle holds `c`, searched over the
    /// cavity of triangles whose circumcircle contains `c`.
    fn encroached_by(&self, c: Vec2) -> Vec<(usize, usize)> {
        let start = match self.cdt.locate(p2(c)) {
            PositionInTriangulation::OnFace(f) => vec![f],
            PositionInTriangulation::OnEdge(e) => {
                let e = self.cdt.directed_edge(e);
                [e.face(), e.rev().face()]
                    .iter()
                    .filter_map(|f| f.as_inner().map(|f| f.fix()))
                    .collect()
            }
            _ => return Vec::new(),
        };
        let mut seen = HashSet::new();
        let mut stack = start;
        let mut out = Vec::new();
        while let Some(fh) = stack.pop() {
            if !seen.insert(fh) {
                continue;
            }
            let f = self.cdt.face(fh);
            for e in f.adjacent_edges() {
                let a = e.from().fix().index();
                let b = e.to().fix().index();
                if self.is_constraint(a, b) {
                    let pa = self.pos(a);
                    let pb = self.pos(b);
                    let mid = (pa + pb) * 0.5;
                    if (c - mid).norm() < 0.5 * (pb - pa).norm() {
                        out.push(key(a, b));
                    }
                    continue;
                }
                if let Some(nf) = e.rev().face().as_inner() {
                    let pts = nf.vertices().map(|v| v2(v.position()));
                    let (cc, r) = circumcircle(pts[0], pts[1], pts[2]);
                    if (c - cc).norm() < r {
                        stack.push(nf.fix());
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    fn fix_face(&mut self, vs: [usize; 3]) -> Result<()> {
        let pts = vs.map(|i| self.pos(i));
        let (cc, _) = circumcircle(pts[0], pts[1], pts[2]);
        let centroid = (pts[0] + pts[1] + pts[2]) * (1.0 / 3.0);
        let mut blocking = None;
        for inter in LineIntersectionIterator::new(&self.cdt, p2(centroid), p2(cc)) {
            if let Intersection::EdgeIntersection(e) = inter {
                let a = e.from().fix().index();
                let b = e.to().fix().index();
                if self.is_constraint(a, b) {
                    blocking = Some(key(a, b));
                    break;
                }
            }
        }
        if let Some(k) = blocking {
            return self.split_segment(k);
        }
        let mut sorted = vs;
        sorted.sort_unstable();
        if !cc.x.is_finite() || !cc.y.is_finite() || !self.domain.inside(cc) {
            self.stuck.insert(sorted);
            return Ok(());
        }
        let enc = self.encroached_by(cc);
        if !enc.is_empty() {
            for k in enc {
                self.split_segment(k)?;
            }
            return Ok(());
        }
        let before = self.cdt.num_vertices();
        self.cdt
            .insert(p2(cc))
            .map_err(|e| NeckError::Numeric(format!("vertex insertion failed: {e:?}")))?;
        if self.cdt.num_vertices() == before {
            self.stuck.insert(sorted);
        }
        self.check_cap()
    }

    fn refine(&mut self) -> Result<()> {
        loop {
            let enc = self.encroached_segments();
            if !enc.is_empty() {
                for k in enc {
                    self.split_segment(k)?;
                }
                continue;
            }
            let bad = self.bad_faces();
            if bad.is_empty() {
                return Ok(());
            }
            for (vs, _) in bad {
                if self.face_exists(vs) {
                    self.fix_face(vs)?;
                }
            }
        }
    }

    fn into_mesh(self) -> TriMesh {
        let n = self.cdt.num_vertices();
        let mut map = vec![usize::MAX; n];
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let mut faces: Vec<[usize; 3]> = Vec::new();
        for f in self.cdt.inner_faces() {
            let vs = f.vertices().map(|v| v.fix().index());
            let pts = vs.map(|i| self.pos(i));
            if self.face_in_domain(pts) {
                faces.push(vs);
            }
        }
        faces.sort_unstable();
        for vs in &faces {
            for &v in vs {
                if map[v] == usize::MAX {
                    map[v] = usize::MAX - 1;
                }
            }
        }
        for (i, slot) in map.iter_mut().enumerate() {
            if *slot == usize::MAX - 1 {
                *slot = vertices.len();
                vertices.push(v2(self.cdt.vertex(handle(i)).position()));
            }
        }
        for vs in faces {
            let t = vs.map(|v| map[v]);
            let (a, b, c) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if (b - a).cross(c - a) > 0.0 {
                triangles.push(t);
            } else {
                triangles.push([t[0], t[2], t[1]]);
            }
        }
        let mut boundary_edges = Vec::new();
        for info in self.segs.values() {
            if let Some(tag) = info.tag {
                boundary_edges.push(BoundaryEdge {
                    v: [map[info.va], map[info.vb]],
                    tag,
                    curve: Some(info.curve),
                    t: [info.t0, info.t1],
                });
            }
        }
        TriMesh {
            vertices,
            triangles,
            boundary_edges,
            curves: self.curves,
            grading: Default::default(),
        }
    }
}

fn mirror(half: TriMesh) -> TriMesh {
    let n = half.vertices.len();
    let mut vertices = half.vertices.clone();
    let mut map = vec![0usize; n];
    for (i, v) in half.vertices.iter().enumerate() {
        if v.y == 0.0 {
            map[i] = i;
        } else {
            map[i] = vertices.len();
            vertices.push(v.mirrored());
        }
    }
    let mut triangles = half.triangles.clone();
    for t in &half.triangles {
        triangles.push([map[t[0]], map[t[2]], map[t[1]]]);
    }
    let nc = half.curves.len();
    let mut curves = half.curves.clone();
    curves.extend(half.curves.iter().map(|c| c.mirrored()));
    let mut boundary_edges = half.boundary_edges.clone();
    for e in &half.boundary_edges {
        boundary_edges.push(BoundaryEdge {
            v: [map[e.v[0]], map[e.v[1]]],
            tag: match e.tag {
                BoundaryTag::Inc1 => BoundaryTag::Inc2,
                other => other,
            },
            curve: e.curve.map(|c| c + nc),
            t: e.t,
        });
    }
    TriMesh {
        vertices,
        triangles,
        boundary_edges,
        curves,
        grading: half.grading,
    }
}

/// Graded triangulation of the perforated domain with `neck_layers` element
/// layers across the gap.
pub fn generate(g: &Geometry, target_h: f64, neck_layers: usize) -> Result<TriMesh> {
    generate_with(g, &MeshOptions::new(target_h, neck_layers))
}

pub fn generate_with(g: &Geometry, opts: &MeshOptions) -> Result<TriMesh> {
    if !(opts.target_h > 0.0) {
        return Err(NeckError::domain("target_h must be positive"));
    }
    if g.inclusions.len() == 2 && !(g.eps > 0.0) {
        return Err(NeckError::domain(
            "touching inclusions (eps = 0) cannot be meshed; extrapolate in eps instead",
        ));
    }
    g.validate()?;
    let domain = build_domain(g);
    let upper_half = domain.upper_half;
    let size = SizeField::new(g, opts);
    let mut mesher = Mesher::new(domain, size, *opts)?;
    mesher.refine()?;
    let mesh = mesher.into_mesh();
    let mut mesh = if upper_half { mirror(mesh) } else { mesh };
    mesh.update_grading(Some(g));
    if let Some(layers) = mesh.grading.neck_layers {
        if layers < opts.neck_layers {
            return Err(NeckError::Numeric(format!(
                "mesh has only {layers} layers across the neck (wanted {})",
                opts.neck_layers
            )));
        }
    }
    if mesh.triangles.iter().enumerate().any(|(t, _)| mesh.signed_area(t) <= 0.0) {
        return Err(NeckError::Numeric("mesh has an inverted triangle".into()));
    }
    Ok(mesh)
}
