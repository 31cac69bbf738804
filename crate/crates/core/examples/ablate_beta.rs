//! Sweeps the initial residual weight with and without the norm clamp.
//!
//! `cargo run --release --example ablate_beta [checkpoint] [count]`

use std::path::PathBuf;

use blendr::cli::{cmd_ablate, RunConfig};
use blendr::rso::Operation;

fn main() -> blendr::Result<()> {
    let mut args = std::env::args().skip(1);
    let ckpt = args.next().map_or_else(|| PathBuf::from("runs/example/model.ckpt"), PathBuf::from);
    let mut config = RunConfig::default();
    config.sampling.count = args.next().map_or(100, |c| c.parse().expect("count must be an integer"));
    config.ablate.beta0 = vec![0.5, 2.0, 6.0];
    config.ablate.tau = vec![1.0, f64::INFINITY];
    config.ablate.orthogonalize = vec![true];
    config.ablate.operation = vec![Operation::Union];
    let outcome = cmd_ablate(&config, &ckpt, &PathBuf::from("runs/example/ablate"), false)?;
    for row in &outcome.rows {
        println!("{:<60} adherence {:.4}  class {:.4}", row.label, row.mean_adherence, row.mean_class_similarity);
    }
    println!("manifest {}", outcome.manifest_path.display());
    Ok(())
}
