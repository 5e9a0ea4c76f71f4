//! Plan-and-execute orchestration for satellite water-quality analysis.

pub mod aquatools;
pub mod clock;
pub mod engine;
pub mod evaluation;
pub mod executor;
pub mod gateway;
pub mod geo;
pub mod knowledge;
pub mod planning;
pub mod registry;
pub mod reporting;
pub mod transport;
pub mod window;
pub mod workflow;
