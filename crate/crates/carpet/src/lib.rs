//! Numerical laboratory for Dirichlet-form analysis on unconstrained
//! Sierpinski carpets.
//!
//! A carpet is given by an exact-rational iterated function system of `N`
//! square similarities with contraction `1/k` whose cells may sit off the
//! `1/k` grid. The crate materializes the cell adjacency graphs, computes
//! the discrete energy apparatus over them (variance constants, effective
//! resistances, pair constants, the renormalization factor), runs the
//! building-brick extension constructions, evaluates k-adic Besov seminorms
//! and the harmonic trace experiment, and compares resistance against the
//! geodesic metric, including the sliding `k = 7` family.
//!
//! Geometry is decided exactly over rationals; the solver layer is generic
//! over a floating `Scalar` (`f32`/`f64`), with [`Real`] = `f64` the default
//! used by the experiment layers.

pub mod besov;
pub mod brick;
pub mod geometry;
pub mod graph;
pub mod io;
pub mod metric;
pub mod poincare;
pub mod rational;
pub mod runner;
pub mod scalar;
pub mod solver;
pub mod symmetry;
pub mod word;

pub use geometry::{CarpetSpec, IntersectKind, Side, Similarity, Square};
pub use rational::{Point, Ratio};
pub use scalar::{Real, Scalar};
pub use solver::{SolverConfig, SparseForm};
pub use symmetry::SymmetryElement;
pub use word::Word;

/// Errors across all operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("level {level} exceeds the cell budget")]
    LevelTooLarge { level: u32 },
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("level mismatch: {left} vs {right}")]
    LevelMismatch { left: u32, right: u32 },
    #[error("graph is disconnected")]
    Disconnected,
    #[error("sets lie in different components: infinite resistance")]
    InfiniteResistance,
    #[error("constraint sets must be non-empty")]
    EmptyConstraint,
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("far set is empty")]
    FarSetEmpty,
    #[error("singular block: {0}")]
    Singular(String),
    #[error("{0}")]
    InvalidInput(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("points fall in the same cell; refine the level")]
    SameCell,
}
