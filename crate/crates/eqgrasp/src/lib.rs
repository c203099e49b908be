//! Dataset generation, training, sampling and evaluation on top of
//! [`eqgrasp_core`]: configuration, file formats, a rayon worker pool and
//! the command implementations behind the `eqgrasp` binary.

pub mod config;
pub mod dataset;
pub mod error;
pub mod formats;
pub mod parallel;
pub mod pipeline;

pub use config::Config;
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use parallel::Rayon;

pub use eqgrasp_core as core;
