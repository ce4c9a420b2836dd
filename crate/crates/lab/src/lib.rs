//! Experiment runners and command-line plumbing for quantized compressed sensing.

pub mod config;
pub mod experiments;
pub mod fit;
pub mod output;
