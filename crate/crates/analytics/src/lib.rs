//! Objective metrics, exclusion rules, linear models and the statistics used
//! to summarise a study.

pub mod ancova;
pub mod error;
pub mod metrics;
pub mod report;
pub mod stats;

pub use error::{AnalyticsError, Result};
