//! Re-runs a manifest and checks every samples file hashes identically.
//!
//! `cargo run --release --example replay_manifest [manifest]`

use std::path::PathBuf;

use blendr::cli::cmd_replay;

fn main() {
    let manifest =
        std::env::args().nth(1).map_or_else(|| PathBuf::from("runs/example/sample/full/manifest.json"), PathBuf::from);
    match cmd_replay(&manifest, None, &PathBuf::from("runs/example/replay")) {
        Ok(jobs) => {
            for j in jobs {
                println!("{:<40} {}", j.label, j.actual_sha256);
            }
            println!("all hashes match");
        }
        Err(e) => {
            eprintln!("replay failed: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
