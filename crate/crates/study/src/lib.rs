//! Five-condition study engine: session flow, event log, questionnaires,
//! exports and scripted bot participants.

pub mod bots;
pub mod clock;
pub mod condition;
pub mod context;
pub mod engine;
pub mod error;
pub mod event;
pub mod export;
pub mod instruments;
pub mod session;
pub mod store;

pub use condition::{Block, Condition};
pub use engine::Engine;
pub use error::{Result, StudyError};
