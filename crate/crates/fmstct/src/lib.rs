//! Simulation and reconstruction toolkit for full-scan multiple
//! source-translation CT (F-mSTCT).

pub mod error;
pub mod geometry;
pub mod phantom;
pub mod projector;
pub mod redundancy;

pub mod config;
pub mod container;
pub mod dbp;
pub mod fbp;
pub mod hilbert;
pub mod metrics;
pub mod pipeline;
pub use error::{Error, Result};
