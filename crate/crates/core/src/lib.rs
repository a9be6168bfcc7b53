//! Detection-directed sparse reconstruction for noisy compressive sensing.
//!
//! A sparse signal observed through a sparse-Bernoulli sensing matrix,
//! `z = Φx₀ + n`, is reconstructed by alternating three stages:
//!
//! - belief propagation over the bipartite graph of `Φ` ([`bp`]) produces a
//!   discretized posterior density for every signal element ([`density`]);
//! - a Bayesian hypothesis test on each posterior decides whether the element
//!   belongs to the support ([`detection`]);
//! - an MMSE estimator computes values on the detected support
//!   ([`estimation`]).
//!
//! [`reconstruct`] runs the outer loop, [`model`] generates problem instances
//! and computes metrics, and [`harness`] drives Monte Carlo SNR sweeps.

pub mod bp;
pub mod density;
pub mod detection;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod reconstruct;
pub mod sensing;

pub use density::{ConvMode, DiscreteDensity, ValueGrid};
pub use error::{Error, Result};
pub use model::{PriorParams, SparseSignal};
pub use reconstruct::{cs_bsd, oracle_mmse, CsBsdConfig, ReconResult};
pub use sensing::SensingGraph;
