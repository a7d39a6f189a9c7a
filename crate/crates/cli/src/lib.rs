//! Experiment runner: configuration, check orchestration, manifests and
//! summaries.

pub mod config;
pub mod error;
pub mod oracle;
pub mod run;

pub use config::{CheckSpec, ExperimentConfig};
pub use error::{LabError, LabResult};
pub use run::{read_manifest, run, summarize, RunManifest, RunOptions};
