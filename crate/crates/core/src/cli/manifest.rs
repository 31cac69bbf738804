//! Run manifests, sample files, and the sampling jobs both are built from.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Mode, RunConfig};
use crate::diffusion::{sample_one, sample_seed, NoiseSchedule, SamplerConfig, StepTrace};
use crate::error::{Error, Result};
use crate::io::{read_text, sha256_hex, write_atomic};
use crate::selection::{PromptSet, SelectionRecord};
use crate::toymodel::model::DenoiserModel;
use crate::toymodel::world::Point;

pub const SAMPLES_HEADER: &str = "x, y, target_concept, target_attribute, mode, seed";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub x: f64,
    pub y: f64,
    pub target_concept: usize,
    pub target_attribute: usize,
    pub mode: Mode,
    pub seed: u64,
}

impl SampleRecord {
    pub fn point(&self) -> Point {
        [self.x, self.y]
    }
}

/// Header line plus one comma-separated record per line. Floats use the
/// shortest representation that parses back to the same value.
pub fn format_samples(records: &[SampleRecord]) -> String {
    let mut out = String::from(SAMPLES_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{:?}, {:?}, {}, {}, {}, {}",
            r.x,
            r.y,
            r.target_concept,
            r.target_attribute,
            r.mode.as_str(),
            r.seed
        );
    }
    out
}

pub fn parse_samples(text: &str, origin: &Path) -> Result<Vec<SampleRecord>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(SAMPLES_HEADER) {
        return Err(Error::format(origin, format!("expected header '{SAMPLES_HEADER}'")));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let bad = |m: &str| Error::format(origin, format!("line {}: {m}", i + 2));
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 6 {
                return Err(bad("expected 6 fields"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
            let id = |s: &str| s.parse::<usize>().map_err(|_| bad("bad id"));
            Ok(SampleRecord {
                x: num(f[0])?,
                y: num(f[1])?,
                target_concept: id(f[2])?,
                target_attribute: id(f[3])?,
                mode: f[4].parse().map_err(|_| bad("bad mode"))?,
                seed: f[5].parse().map_err(|_| bad("bad seed"))?,
            })
        })
        .collect()
}

pub fn read_samples(path: &Path) -> Result<Vec<SampleRecord>> {
    parse_samples(&read_text(path)?, path)
}

/// One samples file: a sampler configuration and every per-sample random
/// choice needed to regenerate it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleJob {
    pub label: String,
    pub mode: Mode,
    /// Sampler before the per-sample `beta(0)` is applied.
    pub sampler: SamplerConfig,
    pub seeds: Vec<u64>,
    /// Drawn `beta(0)` per sample; `None` keeps `sampler` unchanged.
    pub beta0: Vec<Option<f64>>,
    pub samples_file: String,
    pub samples_sha256: String,
    pub trace_file: Option<String>,
}

impl SampleJob {
    /// Job with per-sample seeds `sample_seed(sampling_seed, i)`. With a
    /// pool, every sample draws its `beta(0)` uniformly from it.
    pub fn plan(
        label: String,
        mode: Mode,
        sampler: SamplerConfig,
        count: usize,
        sampling_seed: u64,
        beta: BetaChoice<'_>,
        samples_file: String,
    ) -> Self {
        let seeds: Vec<u64> = (0..count as u64).map(|i| sample_seed(sampling_seed, i)).collect();
        let beta0 = (0..count as u64)
            .map(|i| match beta {
                _ if !mode.uses_rso() => None,
                BetaChoice::Fixed(b) => Some(b),
                BetaChoice::Pool { values, seed } => {
                    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed, i));
                    Some(values[rng.random_range(0..values.len())])
                }
            })
            .collect();
        Self { label, mode, sampler, seeds, beta0, samples_file, samples_sha256: String::new(), trace_file: None }
    }

    pub fn sampler_for(&self, index: usize) -> SamplerConfig {
        match self.beta0[index] {
            Some(b) => SamplerConfig { tei: self.sampler.tei, rso: self.sampler.rso.clone().with_beta0(b) },
            None => self.sampler.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum BetaChoice<'a> {
    Fixed(f64),
    Pool { values: &'a [f64], seed: u64 },
}

#[derive(Serialize)]
struct TraceRecord<'a> {
    job: &'a str,
    sample: usize,
    seed: u64,
    #[serde(flatten)]
    step: &'a StepTrace,
}

/// Everything a job run needs besides the job itself.
pub struct JobContext<'a> {
    pub model: &'a DenoiserModel,
    pub schedule: &'a NoiseSchedule,
    pub prompts: &'a PromptSet,
}

/// Runs a job, writes its samples (and trace) under `dir`, and fills in the
/// output hash. Returns the records.
pub fn execute_job(job: &mut SampleJob, ctx: &JobContext<'_>, dir: &Path, trace: bool) -> Result<Vec<SampleRecord>> {
    let cond = ctx.prompts.conditioning();
    let mut records = Vec::with_capacity(job.seeds.len());
    let mut trace_text = String::new();
    for (i, &seed) in job.seeds.iter().enumerate() {
        let sampler = job.sampler_for(i);
        sampler.rso.validate()?;
        let mut steps = Vec::new();
        let x = sample_one(&cond, &sampler, ctx.schedule, ctx.model, seed, trace.then_some(&mut steps))?;
        for s in &steps {
            let rec = TraceRecord { job: &job.label, sample: i, seed, step: s };
            trace_text.push_str(&serde_json::to_string(&rec).expect("trace serializes"));
            trace_text.push('\n');
        }
        records.push(SampleRecord {
            x: x.x[0],
            y: x.x[1],
            target_concept: ctx.prompts.record.target_concept,
            target_attribute: ctx.prompts.record.novel_attribute,
            mode: job.mode,
            seed,
        });
    }
    let text = format_samples(&records);
    job.samples_sha256 = sha256_hex(text.as_bytes());
    write_atomic(&dir.join(&job.samples_file), text.as_bytes())?;
    if trace {
        let name = format!("{}.trace.jsonl", job.samples_file.trim_end_matches(".csv"));
        write_atomic(&dir.join(&name), trace_text.as_bytes())?;
        job.trace_file = Some(name);
    }
    Ok(records)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    /// Resolved configuration: phase seeds written out, world, noise and
    /// architecture taken from the checkpoint.
    pub config: RunConfig,
    pub checkpoint: PathBuf,
    pub checkpoint_sha256: String,
    pub selection: SelectionRecord,
    pub jobs: Vec<SampleJob>,
}

impl RunManifest {
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_str(&read_text(path)?).map_err(|e| Error::format(path, e.to_string()))
    }
}
