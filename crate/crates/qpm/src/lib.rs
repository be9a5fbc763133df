//! Command-line laboratory around `qpm-core`: instance files, reports,
//! sweeps and calibration.

pub use qpm_core as core;

pub mod bench;
pub mod calibrate;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod format;
pub mod report;
