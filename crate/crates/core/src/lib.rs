pub mod allocator;
pub mod cache;
pub mod channel;
pub mod config;
pub mod dataset;
pub mod delay;
pub mod error;
pub mod experiment;
pub mod features;
pub mod model;
pub mod pipeline;
mod quadrature;
pub mod queue;

pub use error::{Error, Result};
