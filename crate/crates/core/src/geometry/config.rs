use super::{BoundaryData, Geometry, PolyTerm, Profile, TableProfile};
use crate::error::{NeckError, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    #[default]
    Disc,
    Parabola,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PhiKind {
    #[default]
    LinearXn,
    CustomPoly,
}

/// Key-value geometry description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default)]
    pub shape: ShapeKind,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub phi: PhiKind,
    /// Terms `[coef, i, j]` of `sum coef x^i y^j`.
    #[serde(default)]
    pub phi_poly: Vec<(f64, u32, u32)>,
    /// Neck curvatures of the upper and lower parabolic inclusions.
    #[serde(default = "default_curvature")]
    pub curvature: [f64; 2],
    /// Sampled upper profile, two columns `x' h`.
    #[serde(default)]
    pub table: Option<PathBuf>,
    /// Sampled lower profile; defaults to the upper one.
    #[serde(default)]
    pub table_lower: Option<PathBuf>,
}

fn default_eps() -> f64 {
    1e-2
}
fn default_scale() -> f64 {
    1.0
}
fn default_curvature() -> [f64; 2] {
    [1.0, 1.0]
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            shape: ShapeKind::Disc,
            eps: default_eps(),
            scale: default_scale(),
            phi: PhiKind::LinearXn,
            phi_poly: Vec::new(),
            curvature: default_curvature(),
            table: None,
            table_lower: None,
        }
    }
}

impl GeometryConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| NeckError::Config(e.to_string()))
    }

    /// Reads a config file; table paths are resolved relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for t in [&mut cfg.table, &mut cfg.table_lower].into_iter().flatten() {
            if t.is_relative() {
                *t = dir.join(&*t);
            }
        }
        Ok(cfg)
    }

    fn boundary_data(&self) -> Result<BoundaryData> {
        Ok(match self.phi {
            PhiKind::LinearXn => BoundaryData::LinearXn,
            PhiKind::CustomPoly => {
                if self.phi_poly.is_empty() {
                    return Err(NeckError::Config(
                        "phi = \"custom_poly\" needs a non-empty phi_poly".into(),
                    ));
                }
                BoundaryData::Poly {
                    terms: self
                        .phi_poly
                        .iter()
                        .map(|&(coef, px, py)| PolyTerm { coef, px, py })
                        .collect(),
                }
            }
        })
    }

    pub fn build(&self) -> Result<Geometry> {
        let phi = self.boundary_data()?;
        match self.shape {
            ShapeKind::Disc => Ok(Geometry::symmetric_discs(self.scale, self.eps)?.with_phi(phi)),
            ShapeKind::Parabola => {
                Geometry::parabolic(self.curvature[0], self.curvature[1], self.eps, phi)
            }
            ShapeKind::Table => {
                let upper_path = self
                    .table
                    .as_ref()
                    .ok_or_else(|| NeckError::Config("shape = \"table\" needs a table path".into()))?;
                let upper = TableProfile::from_text(&std::fs::read_to_string(upper_path)?)?;
                let lower = match &self.table_lower {
                    Some(p) => TableProfile::from_text(&std::fs::read_to_string(p)?)?,
                    None => upper.clone(),
                };
                Geometry::capped(
                    Profile::Table(upper),
                    Profile::Table(lower),
                    self.eps,
                    phi,
                    format!("table({})", upper_path.display()),
                )
            }
        }
    }
}
