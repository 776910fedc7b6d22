use super::{BoundaryEdge, BoundaryTag, TriMesh};
use crate::error::{NeckError, Result};
use crate::geometry::Vec2;
use std::io::{BufRead, Write};

/// Plain-text format: `nv nt nbe`, then vertex lines `x y`, triangle lines
/// `i j k` and boundary-edge lines `i j tag`.
pub fn write_mesh<W: Write>(m: &TriMesh, mut w: W) -> Result<()> {
    writeln!(
        w,
        "{} {} {}",
        m.vertices.len(),
        m.triangles.len(),
        m.boundary_edges.len()
    )?;
    for v in &m.vertices {
        writeln!(w, "{:e} {:e}", v.x, v.y)?;
    }
    for t in &m.triangles {
        writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
    }
    for e in &m.boundary_edges {
        writeln!(w, "{} {} {}", e.v[0], e.v[1], e.tag.name())?;
    }
    Ok(())
}

fn bad(line: usize, msg: &str) -> NeckError {
    NeckError::Config(format!("mesh line {line}: {msg}"))
}

pub fn read_mesh<R: BufRead>(r: R) -> Result<TriMesh> {
    let mut lines = r.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let mut next = || -> Result<(usize, Vec<String>)> {
        let (i, l) = lines
            .next()
            .ok_or_else(|| NeckError::Config("mesh file ends early".into()))?;
        Ok((i, l?.split_whitespace().map(String::from).collect()))
    };
    let (ln, head) = next()?;
    if head.len() != 3 {
        return Err(bad(ln, "expected `nv nt nbe`"));
    }
    let counts: Vec<usize> = head
        .iter()
        .map(|s| s.parse().map_err(|_| bad(ln, "bad count")))
        .collect::<Result<_>>()?;
    let (nv, nt, nb) = (counts[0], counts[1], counts[2]);
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, c) = next()?;
        if c.len() != 2 {
            return Err(bad(ln, "expected `x y`"));
        }
        let x: f64 = c[0].parse().map_err(|_| bad(ln, "bad coordinate"))?;
        let y: f64 = c[1].parse().map_err(|_| bad(ln, "bad coordinate"))?;
        vertices.push(Vec2::new(x, y));
    }
    let idx = |ln: usize, s: &str| -> Result<usize> {
        let v: usize = s.parse().map_err(|_| bad(ln, "bad index"))?;
        if v >= nv {
            return Err(bad(ln, "vertex index out of range"));
        }
        Ok(v)
    };
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, c) = next()?;
        if c.len() != 3 {
            return Err(bad(ln, "expected `i j k`"));
        }
        triangles.push([idx(ln, &c[0])?, idx(ln, &c[1])?, idx(ln, &c[2])?]);
    }
    let mut boundary_edges = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (ln, c) = next()?;
        if c.len() != 3 {
            return Err(bad(ln, "expected `i j tag`"));
        }
        let tag = BoundaryTag::parse(&c[2]).ok_or_else(|| bad(ln, "unknown tag"))?;
        boundary_edges.push(BoundaryEdge {
            v: [idx(ln, &c[0])?, idx(ln, &c[1])?],
            tag,
            curve: None,
            t: [0.0, 1.0],
        });
    }
    let mut m = TriMesh {
        vertices,
        triangles,
        boundary_edges,
        curves: Vec::new(),
        grading: Default::default(),
    };
    m.update_grading(None);
    Ok(m)
}
