//! Hub detection in Gaussian graphical models.
//!
//! Hubs (variables with an outsized weighted degree in the precision matrix)
//! are found directly from the tail of the spectrum of a covariance estimate,
//! without estimating the graph itself.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod ipchd;
pub mod matrix;
pub mod metrics;
pub mod pipeline;
pub mod preprocess;
pub mod simgen;

pub use error::{HubError, Result};
