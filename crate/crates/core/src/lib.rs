//! Typological diversity measures for language samples.
//!
//! The crate computes how diverse a set of languages is along several
//! axes: mean pairwise distance over syntactic, genetic or geographic
//! representations, and inclusion of typological feature values from CLDF
//! databases such as Grambank or WALS. It also projects samples into the
//! typological design space with PCA and audits how benchmark score
//! averages shift when languages are grouped by a typological feature.

pub mod audit;
pub mod cldf;
pub mod cli;
pub mod distances;
pub mod error;
pub mod langmeta;
pub mod metrics;
pub mod pca;
pub mod report;
pub mod survey;
mod svg;
pub mod vectors;

pub use error::{Error, Result};
