//! File-format and pipeline layer over `analogic-core`: PNG and manifest
//! I/O, procedural dataset generation, checkpointing, the training loop,
//! held-out evaluation, and the `analogic` command-line tool.
//!
//! The split of responsibilities is strict — everything differentiable or
//! optics-related lives in the core crate; this crate only moves bytes,
//! schedules work, and reports.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod manifest;
pub mod pngio;
pub mod runner;

pub use error::{AppError, Result};
