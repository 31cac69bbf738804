//! Configuration, run manifests, and the command implementations behind the
//! `blendr` binary.

pub mod commands;
pub mod config;
pub mod manifest;

pub use commands::{cmd_ablate, cmd_eval, cmd_replay, cmd_sample, cmd_train, EvalOptions, SampleOptions};
pub use config::{Mode, RunConfig};
pub use manifest::RunManifest;
