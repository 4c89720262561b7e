//! Core library: representation space, persona generation, exercise catalog,
//! pairwise rank learning, recommendation, contrast and explanation.

pub mod bootstrap;
pub mod catalog;
pub mod contrast;
pub mod data;
pub mod domain;
pub mod error;
pub mod explain;
pub mod persona;
pub mod rank;
pub mod recommender;
pub mod seed;
pub mod template;

pub use error::{Error, Result};
