//! Unsupervised clustering of malware sample bundles into family
//! communities, with one-class fingerprints for cheap future matching.
//!
//! The pipeline stages, in order: sibling filtering, per-content feature
//! extraction, feature hashing, PCA compression, per-content similarity
//! layers, majority-vote homogenization, community detection, size
//! filtering, and community fingerprinting into a signature database.

pub mod bundle;
pub mod community;
pub mod error;
pub mod features;
pub mod fingerprint;
pub mod hashing;
pub mod metrics;
pub mod network;
pub mod pca;
pub mod pipeline;
pub mod svm;
pub mod synth;
mod util;

pub use error::{Error, Result};
