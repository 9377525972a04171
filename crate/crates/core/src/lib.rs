//! Core numerics for learning the augmented (load, initial point) to solution
//! mapping of an interior-point AC optimal power flow solver.
//!
//! Everything here is `no_std` + `alloc`: case data, admittance and flow
//! kernels, the primal-dual interior-point solver whose deterministic
//! trajectory defines the learned mapping, dataset assembly, a small
//! feed-forward network with Adam, predict-and-reconstruct inference and the
//! evaluation metrics. File formats, wall-clock timing, parallel label
//! generation and the command line live in the `augopf` crate.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![deny(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod case;
pub mod dataset;
pub mod digest;
pub mod fixtures;
pub mod inference;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod opf;
pub mod powerflow;

pub use case::{Branch, Bus, BusType, CaseError, Generator, NetworkCase};
pub use opf::{OpfOutcome, OpfProblem, SolverOptions};
pub use powerflow::{AdmittanceMatrix, VoltageProfile};
