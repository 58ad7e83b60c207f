//! Discontinuous Galerkin discretizations of nonsmooth convex variational
//! problems on triangulated rectangles, with discrete primal and dual
//! energies whose difference certifies the quality of an approximation.
//!
//! The three model problems are a Poisson problem, total-variation
//! regularized L2 fitting and an obstacle problem. See [`problems::catalog`]
//! for the benchmark cases and [`harness`] for convergence sweeps.

pub mod error;
pub mod extended;
pub mod fem;
pub mod functionals;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod problems;
pub mod quadrature;
pub mod solvers;
pub mod vec2;

pub use error::{Error, Result};
pub use extended::ExtReal;
pub use fem::{DgField, RtField, SideTraces};
pub use mesh::{BoundaryTag, Mesh, Rect, Side, SideKind, SideSet};
pub use quadrature::{Circle, Quadrature};
