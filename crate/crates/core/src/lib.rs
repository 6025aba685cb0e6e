//! Covariant brackets for Lagrangian systems.
//!
//! The bracket of two functionals of a path is computed on the space of
//! solutions of the Euler-Lagrange equations, from the retarded and advanced
//! responses of a reference solution to infinitesimal deformations of the
//! action. Three independent routes are provided (response integral, conserved
//! two-form, two-point basis) so results can be cross-checked, together with a
//! finite-dimensional quantum-mechanical model and a lattice Klein-Gordon field.
//!
//! Module map:
//!
//! * [`model`], [`models`], [`metric`], [`trajectory`], [`functional`]: models,
//!   their partial derivatives, sampled paths and path functionals.
//! * [`solver`]: initial and two-point boundary problems for the equations of motion.
//! * [`jacobi`]: the linearized (Jacobi) operator along a solution.
//! * [`flow`], [`green`]: responses, two-point bases and the commutator kernel.
//! * [`bracket`]: the bracket itself plus action-based validators.
//! * [`qm`]: quadratic observables on a finite-dimensional Hilbert space.
//! * [`kg`]: free scalar field on a periodic lattice.
//! * [`config`], [`report`]: experiment configuration and output files.

pub mod bracket;
pub mod config;
pub mod corpus;
pub mod error;
mod fd;
pub mod flow;
pub mod functional;
pub mod green;
pub mod jacobi;
pub mod kg;
pub mod metric;
pub mod model;
pub mod models;
pub mod qm;
pub mod report;
pub mod solver;
pub mod trajectory;

pub use error::{Error, Result};
