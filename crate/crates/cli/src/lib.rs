//! Config-driven experiment runner for targeted event detection.

pub mod config;
pub mod runner;

pub use config::{load, preset, Diagnostic, DiagnosticKind, DetectorKind, ExperimentConfig, Scenario, PRESETS};
pub use runner::{run, DetectorResult, Report, RunError};
