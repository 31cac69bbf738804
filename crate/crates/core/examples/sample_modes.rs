//! Samples the held-out target with every mode on the same seeds and
//! compares where the samples land.
//!
//! `cargo run --release --example sample_modes [checkpoint] [count]`

use std::path::PathBuf;

use blendr::cli::commands::SampleOutcome;
use blendr::cli::config::Mode;
use blendr::cli::manifest::SampleRecord;
use blendr::cli::{cmd_sample, RunConfig, SampleOptions};
use blendr::evalkit::{adherence, region_fraction};
use blendr::toymodel::checkpoint::Checkpoint;

fn main() -> blendr::Result<()> {
    let mut args = std::env::args().skip(1);
    let ckpt = args.next().map_or_else(|| PathBuf::from("runs/example/model.ckpt"), PathBuf::from);
    let count = args.next().map_or(200, |c| c.parse().expect("count must be an integer"));
    let world = Checkpoint::load(&ckpt)?.world;
    let config = RunConfig::default();
    println!("mode      mean x   mean y   in-region  adherence  class");
    for mode in [Mode::Baseline, Mode::Tei, Mode::Rso, Mode::Full] {
        let out = PathBuf::from("runs/example/sample").join(mode.as_str());
        let SampleOutcome { manifest, records, .. } =
            cmd_sample(&config, &ckpt, &out, &SampleOptions { mode: Some(mode), count: Some(count), trace: false })?;
        let sel = &manifest.selection;
        let pts: Vec<_> = records[0].iter().map(SampleRecord::point).collect();
        let rep = adherence(&pts, sel.novel_attribute, sel.target_concept, &world)?;
        let n = pts.len() as f64;
        println!(
            "{:<8}  {:>7.3}  {:>7.3}  {:>9.3}  {:>9.4}  {:.4}",
            mode.as_str(),
            pts.iter().map(|p| p[0]).sum::<f64>() / n,
            pts.iter().map(|p| p[1]).sum::<f64>() / n,
            region_fraction(&pts, sel.target_concept, sel.novel_attribute, &world)?,
            rep.mean_adherence,
            rep.mean_class_similarity
        );
    }
    Ok(())
}
