//! File formats, experiment orchestration, multi-threaded evaluation and the
//! `embedstab` command-line tool, on top of `embedstab-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod io;
pub mod parallel;
pub mod pipeline;
pub mod report;

pub use error::{Result, ToolError};
