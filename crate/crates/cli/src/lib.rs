//! Pipeline orchestration, artifact formats and report rendering for the `dynbias` binary.

pub mod artifacts;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod provenance;
pub mod report;
pub mod stages;
pub mod svg;

pub use error::CliError;
pub use manifest::Manifest;
pub use provenance::Provenance;
