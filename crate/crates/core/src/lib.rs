#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod data;
pub mod encoder;
pub mod gan;
pub mod losses;
pub mod metrics;
pub mod mixing;
pub mod numcore;
pub mod pipeline;

pub use error::{Error, Result};
