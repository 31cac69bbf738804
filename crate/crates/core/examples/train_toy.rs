//! Trains the toy denoiser and runs the quality gate.
//!
//! `cargo run --release --example train_toy [out_dir] [steps]`
//! Defaults: `runs/example`, 20000 steps. Other examples read the checkpoint
//! written here.

use std::path::PathBuf;

use blendr::cli::{cmd_train, RunConfig};

fn main() -> blendr::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let out = args.next().map_or_else(|| PathBuf::from("runs/example"), PathBuf::from);
    let mut config = RunConfig::default();
    if let Some(steps) = args.next() {
        config.train.steps = steps.parse().expect("steps must be an integer");
    }
    let outcome = cmd_train(&config, &out)?;
    println!("checkpoint  {}", outcome.checkpoint.display());
    println!("gate        {} ({})", if outcome.gate.passed { "passed" } else { "FAILED" }, outcome.gate.summary());
    for p in &outcome.gate.pairs {
        println!("  concept {} attribute {}: {:.1}% in mode", p.concept, p.attribute, 100.0 * p.in_mode_fraction);
    }
    Ok(())
}
