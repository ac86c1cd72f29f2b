//! EEG animacy decoding benchmark.
//!
//! The pipeline runs raw recordings through [`signal`] into 63 × 50
//! epochs, builds the binary living/non-living task in [`dataset`], trains
//! the decoders of [`models`] with the fixed protocol in [`training`],
//! fits the CSP+LDA comparator in [`baseline`], and summarizes runs in
//! [`analysis`].

pub mod analysis;
pub mod baseline;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod models;
pub mod signal;
pub mod training;

pub use error::{Error, Result};
