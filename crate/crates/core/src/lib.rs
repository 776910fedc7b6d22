//! Solver and verification harness for the p-Laplacian perfect-conductivity
//! problem with two closely spaced inclusions.
//!
//! The crate minimizes the p-Dirichlet energy over potentials that are constant
//! on each inclusion, extracts inclusion potentials, fluxes and neck gradients,
//! and compares them with closed-form asymptotics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod asymptotics;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod mesh;
pub mod solver;

pub use error::{NeckError, Result};
pub use geometry::{Geometry, NeckPoint, Vec2};
pub use mesh::TriMesh;
pub use solver::{solve, Solution, SolveConfig};
