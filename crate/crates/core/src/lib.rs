//! Differentially private learning of Gaussian mixtures.
//!
//! The pipeline list-decodes each mixture component from heavily corrupted
//! samples with stability-based histograms, combines candidate components
//! with a grid over mixing weights, and picks one candidate mixture with a
//! private Scheffé tournament.

pub mod data;
pub mod decoders;
pub mod distributions;
pub mod error;
pub mod io;
pub mod learner;
pub mod privacy;
pub mod rng;
pub mod selection;

pub use data::Dataset;
pub use error::{Error, Result};
pub use privacy::PrivacyBudget;
