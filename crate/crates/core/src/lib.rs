//! Numerical model of a crosspoint-memory eigenvector circuit.
//!
//! A positive matrix is stored as conductances in a crosspoint array and closed
//! in a feedback loop through transimpedance amplifiers and analog inverters.
//! With the feedback conductance set slightly below the largest eigenvalue, the
//! outputs grow exponentially along the dominant eigenvector until one of them
//! reaches the supply rail, after which the rest settle onto the eigenvector.
//!
//! The crate is `no_std` (it needs `alloc`) and does no IO. File formats, the
//! parallel sweep harness and the command-line tool live in the `xpoint` crate.
//!
//! Modules:
//! - [`linalg`]: dense kernels, the power-iteration oracle, spectral abscissa
//!   and the solution-error metric.
//! - [`circuit`]: op-amp parameters and the associated state matrix of the circuit.
//! - [`fdsim`]: explicit finite-difference integration with supply clipping.
//! - [`pagerank`]: citation graphs, transition matrices and circuit ranking.
//! - [`experiments`]: random datasets, sweep plans and report statistics.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod circuit;
pub mod error;
pub mod experiments;
pub mod fdsim;
pub mod linalg;
pub mod pagerank;

mod math;

pub use circuit::{EigenSystem, OpAmpParams};
pub use error::{Error, Result};
pub use fdsim::{SimConfig, Trace};
pub use linalg::{EigPair, LinearMap, Matrix, SquareCoefficients, Vector};
pub use pagerank::{CitationMatrix, RankResult, TransitionMatrix};
