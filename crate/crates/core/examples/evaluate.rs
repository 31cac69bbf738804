//! Scores two sample files against each other and computes Recall@K on a
//! labelled point set drawn from the toy world.
//!
//! `cargo run --release --example evaluate [checkpoint]`
//! Expects the files written by the `sample_modes` example.

use std::path::PathBuf;

use blendr::cli::commands::EvalOptions;
use blendr::cli::cmd_eval;
use blendr::toymodel::checkpoint::Checkpoint;
use blendr::toymodel::world::generate_dataset;

fn main() -> blendr::Result<()> {
    let ckpt = std::env::args().nth(1).map_or_else(|| PathBuf::from("runs/example/model.ckpt"), PathBuf::from);
    let out = PathBuf::from("runs/example/eval");
    let world = Checkpoint::load(&ckpt)?.world;

    // Labelled embeddings: toy data points, labelled by concept.
    let data = generate_dataset(&world, 25, 11)?;
    let mut emb = String::from("label, e0, e1\n");
    for d in &data {
        emb.push_str(&format!("{}, {}, {}\n", d.concept, d.point[0], d.point[1]));
    }
    std::fs::create_dir_all(&out).expect("create output dir");
    let emb_path = out.join("embeddings.csv");
    std::fs::write(&emb_path, emb).expect("write embeddings");

    let samples = vec![
        PathBuf::from("runs/example/sample/baseline/samples.csv"),
        PathBuf::from("runs/example/sample/full/samples.csv"),
    ];
    let opts = EvalOptions { embeddings: Some(emb_path), k_values: vec![1, 2, 4] };
    let outcome = cmd_eval(&samples, &ckpt, &out, &opts)?;
    for r in &outcome.reports {
        println!("{}: adherence {:.4} ± {:.4}", r.file.display(), r.report.mean_adherence, r.report.std_adherence);
    }
    for table in &outcome.subsets {
        for row in &table.rows {
            println!("bottom {:>4.0}%: {:+.3}%", 100.0 * row.subset_fraction, row.relative_improvement_pct);
        }
    }
    for (k, v) in outcome.recall.unwrap_or_default() {
        println!("recall@{k} {v:.3}");
    }
    Ok(())
}
