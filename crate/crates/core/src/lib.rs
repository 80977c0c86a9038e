//! Constant-Q cepstral artifact detector: feature extraction, two-class GMM
//! scoring and equal-error-rate evaluation.

pub mod audio;
pub mod cache;
pub mod cqt;
pub mod detector;
pub mod error;
pub mod experiment;
pub mod features;
pub mod gmm;
pub mod manifest;
pub mod matrix;
pub mod metrics;
pub mod output;
pub mod report;
pub mod run_config;

pub use error::{Error, Result};
