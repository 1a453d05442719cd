//! Doxing detection for tweets carrying SSNs or IPv4 addresses: validators,
//! rule heuristics, featurizers, a linear SVM and evaluation tooling.

pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod features;
pub mod heuristics;
pub mod pipeline;
pub mod svm;
pub mod synthetic;
pub mod validators;

pub use error::{Error, Result};
