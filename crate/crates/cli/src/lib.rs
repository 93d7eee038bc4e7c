//! Command-line driver: world materialization, learning runs, evaluation and reports.

pub mod commands;
pub mod config;
pub mod report;
