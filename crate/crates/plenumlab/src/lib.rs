//! File formats, run configuration and the command-line pipeline.

pub mod cli;
pub mod config;
pub mod error;
pub mod export;
pub mod gradsuite;
pub mod pfd;
pub mod pipeline;
pub mod ptn;
pub mod sidecar;
