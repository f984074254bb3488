//! Agent-based discrete-event simulator of two-sided ride-hailing platforms.

pub mod assignment;
pub mod cli;
pub mod decisions;
pub mod engine;
pub mod experiments;
pub mod kpi;
pub mod netgraph;
pub mod platform;
pub mod rng;
pub mod scenario;
