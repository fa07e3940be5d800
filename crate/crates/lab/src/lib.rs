//! Experiment harness for the semiclassical soliton laboratory: JSON run
//! configs, the experiments built on `nls-core`, and run manifests.

pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;

pub use config::RunConfig;
pub use error::{LabError, Result};
pub use manifest::RunManifest;
