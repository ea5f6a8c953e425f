//! Adaptive partially penalized immersed finite element solver for
//! second-order elliptic interface problems on unfitted triangular meshes.
//!
//! The library covers the full pipeline: unfitted meshing with
//! newest-vertex-bisection refinement, level-set interface geometry, the
//! immersed P1 nodal basis on cut elements, assembly and solution of the
//! penalized system, residual-based error indicators with the geometric
//! inconsistency term, and the Solve-Estimate-Mark-Refine driver.
//!
//! Everything is generic over the scalar type; the `*64` aliases below fix
//! `f64`, which is what the CLI and the benchmark presets use.

pub mod amr;
pub mod assembly;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod ife_space;
pub mod interface_geometry;
pub mod mesh;
pub mod problems;
pub mod quadrature;
pub mod report;
pub mod scalar;
pub mod sparse;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Mesh64 = mesh::Mesh<f64>;
pub type Point64 = geometry::Point2<f64>;
pub type Problem64 = problems::BenchmarkProblem<f64>;
pub type Classification64 = interface_geometry::Classification<f64>;
pub type Solution64 = assembly::DiscreteSolution<f64>;
pub type Indicators64 = estimator::Indicators<f64>;
pub type History64 = amr::ConvergenceHistory<f64>;
