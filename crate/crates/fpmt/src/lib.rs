//! File formats, the experiment runner and command-line plumbing around
//! `fpmt-core`.

pub mod ablation;
pub mod checkpoint;
pub mod config;
pub mod csvio;
pub mod error;
pub mod report;

pub use error::{FormatError, Result};
