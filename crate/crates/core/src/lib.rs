//! First-passage analysis of absorbing Markov chains.
//!
//! Given a row-stochastic matrix with one absorbing halt state, this crate
//! computes
//!
//! - the Perron root `lambda2` of the transient block, the metastable
//!   distribution `phi`, `|lambda3|` and the memory constant ([`spectral`]);
//! - the system-wide mean first passage time `M = 1/(1 - lambda2)`, its
//!   standard deviation, and per-state MFPT / MFPV vectors ([`passage`]);
//! - confidence-level bounds on first passage time and value ([`confidence`]);
//!
//! and reduces finite MDPs to chains through a policy and a randomness
//! distribution ([`mdp`]). [`models`] builds the example chains and [`sim`]
//! is a Monte Carlo simulator used to cross-check analytic results.
//!
//! ```
//! use fpv_core::{analysis, models};
//!
//! let chain = models::coin_toss(0.01).unwrap();
//! let a = analysis::analyze(&chain).unwrap();
//! assert!((a.mfpt() - 1.0099e4).abs() / 1.0099e4 < 1e-4);
//! ```

pub mod analysis;
pub mod chain;
pub mod confidence;
pub mod error;
pub mod mdp;
pub mod models;
pub mod passage;
pub mod sim;
pub mod spectral;

pub use analysis::{analyze, ChainAnalysis};
pub use chain::{CanonicalChain, ChainModel, StateDistribution, ValueMatrix, ROW_TOL};
pub use error::{Error, Result};
pub use mdp::{apply_policy, marginalize, MdpModel, Policy};
pub use sim::{simulate, SimReport};
pub use spectral::{EigenMethod, SpectralOptions, SpectralSummary};

pub use nalgebra;
