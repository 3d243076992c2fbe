//! Constrained stochastic optimization with adaptive step sizes for
//! weakly convex objectives, plus the measurement tools to verify the
//! method's stationarity guarantees numerically: a Moreau-envelope
//! oracle, lemma/bound checks, and convergence-rate fitting.

pub mod analysis;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod moreau;
pub mod optimizers;
pub mod problems;
pub mod rng;

pub use error::{Error, Result};
