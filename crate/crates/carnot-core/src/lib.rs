//! Numerical toolkit for sublaplacians on stratified (Carnot) groups.
//!
//! The crate builds stratified Lie algebras with their group law and
//! anisotropic dilations, discretizes horizontal sublaplacians and the
//! dilation generator on box lattices, estimates the constants in
//! Hardy-type inequalities variationally, checks admissibility of
//! perturbing potentials against commutator-positivity criteria, and
//! probes the spectral type of the perturbed operators through
//! resolvent boundary values, spectral measures and eigenvalue
//! persistence under grid refinement.

pub mod algebra;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod expr;
pub mod hardy;
pub mod lattice;
pub mod linalg;
pub mod par;
pub mod potential;
pub mod report;
pub mod spectral;
pub mod tasks;

pub use algebra::{GroupElement, QuasiNorm, StratifiedAlgebra};
pub use error::{Error, Result};
pub use lattice::{GridFunction, Lattice, LatticeSpec, SparseOperator};

/// Version string stamped into report provenance blocks.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
