//! Experiment harness for semantic and RGB GANs: dataset and checkpoint
//! files, training runs, evaluation reports and the `semgan` CLI.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod features;
pub mod grid;
pub mod io;
pub mod report;

pub use error::{Error, Result};
