pub mod admission;
pub mod allocator;
pub mod cell_sim;
pub mod cli;
pub mod error;
pub mod exec;
pub mod fading;
pub mod profile;
pub mod qos;
pub mod quadrature;
pub mod queue_sim;
pub mod rate_quality;
pub mod roots;
pub mod scheduler;
pub mod special;

pub use error::{Error, Result};
