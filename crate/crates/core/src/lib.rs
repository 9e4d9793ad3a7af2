//! Delayed CSMA laboratory: high-order Glauber dynamics over conflict graphs.

pub mod error;
pub mod graph;
pub mod harness;
pub mod oracle;
pub mod queueing;
pub mod scheduler;
pub mod stats;

pub use error::{CsmaError, Result};
