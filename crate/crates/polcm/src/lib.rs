//! Partially observed linear causal models: graphical identifiability
//! checks and likelihood-based estimation of all edge coefficients.
//!
//! The crate is organised around a handful of building blocks:
//!
//! * [`graph`] — the DAG representation with a latent/observed partition,
//!   d-separation, pure children, and simple-trek enumeration.
//! * [`identify`] — atomic-cover detection and the graphical conditions
//!   that decide whether the edge coefficients can be recovered from the
//!   observed covariance alone.
//! * [`covariance`] — population covariance construction (matrix form,
//!   block form, and trek-rule polynomials) plus the three indeterminacy
//!   transforms (latent rescaling, group sign, orthogonal rotation).
//! * [`sim`] — ground-truth model generation and ancestral sampling,
//!   including uniform-noise and leaky-ReLU misspecification regimes.
//! * [`estimator`] — Gaussian negative log-likelihood minimisation over
//!   the supported coefficients, with the unit-variance constraint
//!   enforced either structurally (TR) or by penalty (LM).
//! * [`metrics`] — MSE up to group sign and up to orthogonal
//!   transformation of the latent coordinates.
//! * [`fixtures`] — built-in benchmark graphs.
//! * [`bench`] — the simulate/estimate/score harness.

pub mod bench;
pub mod covariance;
pub mod error;
pub mod estimator;
pub mod fixtures;
pub mod graph;
pub mod identify;
pub mod metrics;
pub mod sim;

pub use covariance::{CovModel, NoiseSpec, WeightMatrix};
pub use error::PolcmError;
pub use graph::{Cover, NodeId, PolcmGraph, Trek};
pub use identify::{IdentReport, Verdict};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, PolcmError>;
