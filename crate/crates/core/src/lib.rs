//! Numerical workbench for the homogenization of a two-dimensional conductivity
//! problem with membrane (jump-type) transmission conditions on a randomly
//! deformed periodic medium.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: the unit-cell interface, the cellwise deformation maps and
//!   their Jacobians, inverses and surface-measure factors.
//! * [`mesh`]: a conforming reference-cell triangulation with duplicated
//!   interface nodes, tiled into domain and truncated-cube meshes.
//! * [`fem`]: P1 assembly of the transmission bilinear form, Dirichlet
//!   elimination, Jacobi-preconditioned conjugate gradients and norms.
//! * [`corrector`]: the regularized, truncated cell problem and the periodic
//!   single-cell oracle.
//! * [`effective`]: volume statistics and the Monte-Carlo effective tensor.
//! * [`homogenize`]: the heterogeneous vs. homogenized comparison harness.
//! * [`verify`]: independent oracles and property utilities.

pub mod corrector;
pub mod effective;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod homogenize;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod verify;

pub use error::{Error, Result};

/// A point or vector in the plane.
pub type Point = [f64; 2];
