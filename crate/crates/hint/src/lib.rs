//! File formats, data loading, synthetic data and the end-to-end pipeline
//! around [`hint_core`].

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod pipeline;
pub mod report;
pub mod synth;

pub use error::{Error, Result};
