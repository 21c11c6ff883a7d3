//! Orchestration of the secular stability pipeline: configuration,
//! hash-checked stage artifacts, reports and curve emission.

pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod reference;
pub mod report;

pub use config::{PipelineConfig, Stage};
pub use pipeline::{run, StageStatus};
