//! Cointegration analysis of high-dimensional linear Kuramoto-type systems.
//!
//! The crate covers the full pipeline:
//!
//! - [`kuramoto`] builds block-structured, symmetric, reduced-rank coupling matrices.
//! - [`linmodel`] simulates the error-correction model and computes moment matrices,
//!   the OLS estimator and the concentrated likelihood.
//! - [`johansen`] solves the reduced-rank regression and computes trace statistics.
//! - [`rankboot`] determines the cointegration rank by sequential wild-bootstrap testing.
//! - [`lowrank`] estimates the coupling matrix under joint symmetry and rank restrictions.
//! - [`community`] recovers the cluster network by greedy modularity maximisation.
//! - [`experiment`] wires everything into reproducible runs that emit CSV, JSON and SVG.

pub mod community;
pub mod error;
pub mod experiment;
pub mod johansen;
pub mod kuramoto;
pub mod linalg;
pub mod linmodel;
pub mod lowrank;
pub mod rankboot;
pub mod seed;

pub use error::{Error, Result};
