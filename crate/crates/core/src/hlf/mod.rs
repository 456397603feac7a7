//! The Hyperledger Fabric transaction-flow model.

mod build;
mod config;

pub use build::{
    build_hlf_net, BuildError, ClockNames, HlfNetHandle, NameMap, NodeNames, OrdererNames,
};
pub(crate) use config::line_col;
pub use config::{
    default_config, ConfigError, ConfigValue, HlfConfig, DEFAULT_CAPACITY, DEFAULT_QUEUE,
};
