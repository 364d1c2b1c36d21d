//! Consensus weight design for random networks with correlated link failures.
//!
//! The library designs per-link averaging weights that make distributed
//! average consensus converge fast over a finite horizon when links fail
//! randomly, possibly with spatial correlation. The design objective is the
//! sum of the `n` largest eigenvalues of the mean-square error dynamics
//! matrix `E[W^2] - J`; varying `n` trades transient speed against asymptotic
//! speed. A Monte Carlo simulator with a correlated-link sampler validates
//! the designs.
//!
//! Modules:
//! - [`supergraph`]: geometric graph generation and the link statistics
//!   model (activation probabilities, cross-covariances).
//! - [`moments`]: realized state matrices and the closed-form moment matrix
//!   `E[W^2] - J` with its exact derivative.
//! - [`spectrum`]: symmetric eigendecomposition, the `phi_n`/`psi_n`
//!   objective families, Ky Fan subgradients, convergence rates.
//! - [`optimizer`]: switching subgradient scheme plus Metropolis and
//!   supergraph-based baseline weights.
//! - [`netsim`]: correlated topology sampling and Monte Carlo consensus
//!   trajectories.

pub mod error;
pub mod moments;
pub mod netsim;
pub mod optimizer;
pub mod spectrum;
pub mod supergraph;

pub use error::{Error, Result};
pub use moments::{MomentMatrix, WeightVector};
pub use netsim::{ErrorTrajectory, TopologySampler};
pub use optimizer::{OptimizationResult, StepRule, SubgradientSchedule};
pub use spectrum::{RateReport, SpectralDecomposition};
pub use supergraph::{LinkStatModel, ModelValidity, Supergraph};
