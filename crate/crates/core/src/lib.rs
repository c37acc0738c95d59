//! Fourth moments of partial sums `Sₙ(φ) = φ(X₁) + … + φ(Xₙ)` for strongly
//! ergodic Markov chains and expanding dynamical systems.
//!
//! The crate computes `E_ν[Sₙ(φ)⁴]` exactly on finite chains and by seeded
//! Monte Carlo elsewhere, evaluates the log-norm moment bounds against it, and
//! checks each intermediate inequality of the bound's derivation term by term.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

/// Crate version, recorded in report provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod error;
pub mod exec;
pub mod linalg;
pub mod model;
pub mod montecarlo;
pub mod norms;
pub mod observable;
pub mod oracle;
pub mod spectral;
pub mod systems;
pub mod verify;

pub use error::{Error, Result};
pub use exec::{Execution, SimRng};
pub use linalg::Matrix;
pub use model::FiniteMarkovModel;
pub use montecarlo::{estimate_indicator_s4, estimate_s4, McEstimate};
pub use norms::{center, norm_profile, MeanSource, NormProfile};
pub use observable::{Formula, NormKind, Observable, StateKind, StatePoint};
pub use oracle::{exact_covariance, exact_cross_moment, exact_fourth_moment, green_kubo_sigma2, MomentOracle};
pub use spectral::{theta_kappa, ulam, ErgodicityCertificate, IntervalMap, ProbeSet};
pub use systems::{StationarySampler, SystemConfig, SystemSpec, Walker};
