use crate::error::{NeckError, Result};
use crate::geometry::{Geometry, InclusionCondition};
use crate::mesh::{BoundaryTag, TriMesh};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VertexDof {
    Free(usize),
    Fixed(f64),
}

/// Map from mesh vertices to unknowns. Every vertex of a floating inclusion
/// shares one unknown; outer-boundary vertices carry the Dirichlet data.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub per_vertex: Vec<VertexDof>,
    pub n_free: usize,
    /// Unknown of each floating inclusion.
    pub inclusion_dof: [Option<usize>; 2],
}

impl DofMap {
    pub fn new(m: &TriMesh, g: &Geometry) -> Result<Self> {
        let tags = m.vertex_tags();
        for (i, _) in g.inclusions.iter().enumerate() {
            let tag = BoundaryTag::inclusion(i);
            if !tags.contains(&Some(tag)) {
                return Err(NeckError::domain(format!(
                    "mesh has no vertices tagged {}",
                    tag.name()
                )));
            }
        }
        let mut per_vertex = Vec::with_capacity(m.vertices.len());
        let mut n_free = 0;
        for (v, tag) in tags.iter().enumerate() {
            let dof = match tag {
                Some(BoundaryTag::Outer) => VertexDof::Fixed(g.phi.eval(m.vertices[v])),
                None => {
                    n_free += 1;
                    VertexDof::Free(n_free - 1)
                }
                Some(_) => VertexDof::Free(usize::MAX),
            };
            per_vertex.push(dof);
        }
        let mut inclusion_dof = [None, None];
        for (i, inc) in g.inclusions.iter().enumerate() {
            let tag = BoundaryTag::inclusion(i);
            let slot = match inc.condition {
                InclusionCondition::Floating => {
                    n_free += 1;
                    inclusion_dof[i] = Some(n_free - 1);
                    VertexDof::Free(n_free - 1)
                }
                InclusionCondition::Fixed { value } => VertexDof::Fixed(value),
            };
            for (v, t) in tags.iter().enumerate() {
                if *t == Some(tag) {
                    per_vertex[v] = slot;
                }
            }
        }
        if per_vertex.contains(&VertexDof::Free(usize::MAX)) {
            return Err(NeckError::domain("mesh has inclusion tags the geometry does not define"));
        }
        Ok(DofMap {
            per_vertex,
            n_free,
            inclusion_dof,
        })
    }

    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        self.per_vertex
            .iter()
            .map(|d| match d {
                VertexDof::Free(i) => x[*i],
                VertexDof::Fixed(v) => *v,
            })
            .collect()
    }

    /// Reads the unknowns back from a nodal vector.
    pub fn restrict(&self, nodal: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n_free];
        for (v, d) in self.per_vertex.iter().enumerate() {
            if let VertexDof::Free(i) = d {
                x[*i] = nodal[v];
            }
        }
        x
    }

    /// Sums a per-vertex vector into the unknowns.
    pub fn condense(&self, per_vertex: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n_free];
        for (v, d) in self.per_vertex.iter().enumerate() {
            if let VertexDof::Free(i) = d {
                g[*i] += per_vertex[v];
            }
        }
        g
    }

    pub fn free(&self, v: usize) -> Option<usize> {
        match self.per_vertex[v] {
            VertexDof::Free(i) => Some(i),
            VertexDof::Fixed(_) => None,
        }
    }
}
