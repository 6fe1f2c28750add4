//! File formats, reports and the command line around `ccdetect-core`.
//!
//! - [`formats`]: coverage, instrumentation, faults and truth files.
//! - [`config`]: TOML configuration with flag overrides.
//! - [`report`]: JSON reports and the CSV cost table.
//! - [`cli`]: the `detect`, `evaluate`, `simulate` and `summary` commands.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod report;
