//! PFSA-based sequence-likelihood metrics for time series.
//!
//! The crate models discrete-valued stochastic processes with probabilistic
//! finite-state automata and builds a distance between symbol sequences out
//! of their per-symbol log-likelihoods under a fixed base set of machines:
//!
//! - [`pfsa`]: the machine type, validation, stationary distributions,
//!   sampling, minimization, and the JSON model format.
//! - [`measures`]: closed-form entropy rate and KL divergence, exact sequence
//!   probabilities, and the streaming log-likelihood filter.
//! - [`genesess`]: inference of a machine from a single long symbol sequence.
//! - [`quantize`]: continuous-to-symbolic conversion (detrend / normalize /
//!   partition schemes) and class-separation scoring of distance matrices.
//! - [`metric`]: likelihood coordinates, pairwise distances, and distance
//!   matrices over sequence datasets.

pub mod genesess;
mod graph;
pub mod measures;
pub mod metric;
pub mod pfsa;
pub mod quantize;

pub use measures::{entropy_rate, kl_divergence, log_likelihood, seq_probability};
pub use metric::{
    default_base_set, distance, distance_matrix, featurize, BaseSet, CoordNorm, DistMatrix,
};
pub use pfsa::{Pfsa, Start, StateDist, StateRecord, SymbolSeq, Violation};
pub use quantize::{apply_scheme, class_separation, parse_scheme, QuantScheme};
