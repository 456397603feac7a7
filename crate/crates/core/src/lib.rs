pub mod doe;
pub mod experiment;
pub mod hlf;
pub mod metrics;
pub mod spn;
pub mod stats;
