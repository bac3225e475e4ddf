//! Simulated shared-memory objects and checkers for linearizability and
//! strong linearizability.

pub mod agreement;
pub mod algo;
pub mod base;
pub mod catalog;
pub mod codec;
pub mod error;
pub mod explore;
pub mod lin;
pub mod liveness;
pub mod model;
pub mod points;
pub mod sched;
pub mod specs;
pub mod strong;
pub mod suite;
pub mod value;

pub use error::{Error, ModelError, Result};
pub use model::{Event, EventKind, History, Linearization, Op, OpId, ProcessId, SequentialSpec, SpecRef};
pub use value::Value;
