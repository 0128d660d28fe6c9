//! Participant selection for multi-task mobile crowd sensing.

pub mod error;
pub mod fpmt;
pub mod geo;
pub mod mpft;
pub mod opt;
pub mod report;
pub mod scenario;
pub mod tsp;

pub use error::{Error, Result};
