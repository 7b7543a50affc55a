//! Two interacting bosons in a time-dependent triple well.
//!
//! The crate discretizes the two-particle problem with a contact interaction on
//! a square grid, prepares localized pair states by imaginary-time evolution,
//! drives them through spatial adiabatic passage schedules with a split-operator
//! propagator, and tracks the von Neumann entropy of the one-body reduced
//! density matrix. A three-mode model of the same processes is included as a
//! fast reference.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod busch;
pub mod error;
pub mod exec;
pub mod fft2;
pub mod grid;
pub mod hamiltonian;
pub mod observables;
pub mod propagator;
pub mod protocols;
pub mod runner;
pub mod three_mode;

pub use error::{SapError, SapResult};
pub use exec::Execution;
