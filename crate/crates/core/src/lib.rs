//! Standard (SCN) and temporal two-grid (TTGCN) Crank-Nicolson solvers for
//! two-dimensional nonlinear Volterra integro-differential equations with a
//! weakly singular Riemann-Liouville kernel.

pub mod cli;
pub mod error;
pub mod harness;
pub mod linsolve;
pub mod mesh;
pub mod problems;
pub mod quadrature;
pub mod schemes;
pub mod stencil;

pub use error::{Error, Result};
pub use mesh::{GridFunction, SpatialMesh, TemporalPair};
