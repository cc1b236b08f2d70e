//! Objectives, data and experiment configuration.

pub mod config;
mod dataset;
pub mod experiment;
mod init;
mod kl;
mod mle;
pub mod synthetic;
mod vi;

pub use config::{best_cell, ExperimentConfig};
pub use dataset::Dataset;
pub use init::initial_theta;
pub use kl::KlObjective;
pub use mle::{MleObjective, Reduction};
pub use vi::{SeedPolicy, ViObjective};
