pub mod cuts;
pub mod dispatch;
pub mod engine;
pub mod harness;
mod float_repr;
pub mod master;
pub mod model;
pub mod orchestrator;
pub mod qubo;
