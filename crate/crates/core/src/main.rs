use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blendr::cli::{self, EvalOptions, Mode, RunConfig, SampleOptions};
use blendr::{Error, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "blendr", version, about = "Residual set operations for guided diffusion on a 2-D toy model")]
struct Args {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; overrides `seeds.master`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the toy dataset, train the denoiser and run the quality gate.
    Train,
    /// Draw samples for the selected target.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        count: Option<usize>,
        /// Write per-step diagnostics next to the samples.
        #[arg(long)]
        trace: bool,
    },
    /// Sweep the `[ablate]` grid.
    Ablate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        trace: bool,
    },
    /// Score samples files; the first is the baseline for subset comparisons.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(required = true)]
        samples: Vec<PathBuf>,
        /// Labelled embeddings for Recall@K.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long = "k", value_delimiter = ',')]
        k_values: Vec<usize>,
    },
    /// Re-run a manifest and check the outputs hash identically.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn run(args: Args) -> Result<()> {
    let mut config = RunConfig::load_or_default(args.config.as_deref())?;
    if let Some(s) = args.seed {
        config.seeds.master = s;
    }
    let out = args.out.unwrap_or_else(|| config.output_dir.clone());
    match args.command {
        Command::Train => {
            let o = cli::cmd_train(&config, &out)?;
            println!("checkpoint: {}", o.checkpoint.display());
            println!("gate: {}", o.gate.summary());
            if !o.gate.passed {
                return Err(Error::Gate(o.gate.summary()));
            }
        }
        Command::Sample { checkpoint, mode, count, trace } => {
            let o = cli::cmd_sample(&config, &checkpoint, &out, &SampleOptions { mode, count, trace })?;
            println!("manifest: {}", o.manifest_path.display());
        }
        Command::Ablate { checkpoint, trace } => {
            let o = cli::cmd_ablate(&config, &checkpoint, &out, trace)?;
            for r in &o.rows {
                println!("{}\tadherence {:.4}\tclass {:.4}", r.label, r.mean_adherence, r.mean_class_similarity);
            }
            println!("manifest: {}", o.manifest_path.display());
        }
        Command::Eval { checkpoint, samples, embeddings, k_values } => {
            let o = cli::cmd_eval(&samples, &checkpoint, &out, &EvalOptions { embeddings, k_values })?;
            for r in &o.reports {
                println!(
                    "{}\tadherence {:.4} ± {:.4}\tclass {:.4} ± {:.4}",
                    r.file.display(),
                    r.report.mean_adherence,
                    r.report.std_adherence,
                    r.report.mean_class_similarity,
                    r.report.std_class_similarity
                );
            }
            if let Some(recall) = o.recall {
                for (k, v) in recall {
                    println!("recall@{k}\t{v:.4}");
                }
            }
        }
        Command::Replay { manifest, checkpoint } => {
            let jobs = cli::cmd_replay(&manifest, checkpoint.as_deref().map(Path::new), &out)?;
            println!("replayed {} job(s), all hashes match", jobs.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
