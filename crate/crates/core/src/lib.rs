//! Inhomogeneous anisotropic least gradient problems on 2-D grids.
//!
//! The crate minimizes the relaxed functional
//! `int_Omega phi(x, Du) + int_dOmega phi(x, nu) |f - u| ds` over functions equal
//! to a given extension `f` outside the domain, and produces alongside the
//! minimizer a pointwise dual-feasible, (nearly) divergence-free vector field
//! `T` whose boundary pairing with `f` certifies the optimal value.

pub mod error;
pub mod field_io;
pub mod functional;
pub mod gallery;
pub mod grid;
pub mod imaging;
pub mod metric;
pub mod numerics;
pub mod problem;
pub mod shape;
pub mod solver;
pub mod structure;
pub mod barrier;

pub use error::{Error, Result};
pub use grid::{build_mask, BoundaryField, DomainMask, GridSpec, ScalarGrid, VectorGrid};
pub use metric::{LocalNorm, MetricField, NormKind};
pub use numerics::Sym2;
pub use shape::Shape;
pub use solver::{solve_relaxed, SolveOutput, SolveReport, SolverOptions, SolverState};
