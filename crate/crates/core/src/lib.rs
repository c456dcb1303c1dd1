//! Evolutionary extreme learning machines trained by manta ray foraging
//! optimization with Lévy flight, plus the supporting pieces: baseline
//! optimizers, a partial-RDF crystal featurizer, and a cross-validated
//! experiment harness.

pub mod baselines;
pub mod benchfns;
pub mod config;
pub mod elm;
pub mod error;
pub mod harness;
pub mod mrfo;
pub mod optimizer;
pub mod rdf;
pub mod trainer;

pub use error::{Error, Result};
