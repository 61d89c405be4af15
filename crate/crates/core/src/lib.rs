//! Chat and artifact-edit log analysis: corpus model, interaction
//! segmentation, engagement labeling, benchmarking and the analysis suite.

pub mod analysis;
pub mod benchmark;
pub mod error;
pub mod fixtures;
pub mod label;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod segment;

pub use error::{CoreError, Result};
