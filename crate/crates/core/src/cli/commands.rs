//! The `train`, `sample`, `ablate`, `eval` and `replay` commands as library
//! functions. Each writes its artifacts under an output directory and
//! returns a summary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use super::config::{Mode, Phase, RunConfig};
use super::manifest::{execute_job, read_samples, BetaChoice, JobContext, RunManifest, SampleJob, SampleRecord};
use crate::diffusion::{sample_seed, sample_one, PromptConditioning, SamplerConfig};
use crate::error::{Error, Result};
use crate::evalkit::{
    adherence, recall_at_k, region_fraction, subset_improvement, write_plot, write_records, AdherenceReport,
    SubsetImprovement, DEFAULT_FRACTIONS,
};
use crate::io::{file_sha256, read_text, write_atomic};
use crate::rso::Operation;
use crate::schedule::GuidanceSchedule;
use crate::selection::{build_prompt_set, PromptSet};
use crate::toymodel::checkpoint::Checkpoint;
use crate::toymodel::conditioning::{encode_empty, encode_prompt, Subject};
use crate::toymodel::model::DenoiserModel;
use crate::toymodel::train::{train, TrainReport};
use crate::toymodel::world::{generate_dataset, write_dataset};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const CHECKPOINT_FILE: &str = "model.ckpt";

/// Minimum fraction of conditional samples inside the prompted mode region.
pub const GATE_IN_MODE: f64 = 0.9;
/// Minimum ratio of untrained to final smoothed loss.
pub const GATE_LOSS_RATIO: f64 = 5.0;
/// Conditional samples drawn per prompted pair for the gate.
pub const GATE_SAMPLES: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairGate {
    pub concept: usize,
    pub attribute: usize,
    pub in_mode_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub loss_ratio: f64,
    pub loss_ok: bool,
    pub pairs: Vec<PairGate>,
    pub in_mode_ok: bool,
    pub passed: bool,
}

impl GateReport {
    pub fn summary(&self) -> String {
        let worst = self.pairs.iter().map(|p| p.in_mode_fraction).fold(f64::INFINITY, f64::min);
        format!(
            "loss ratio {:.2} (need >= {GATE_LOSS_RATIO}), worst in-mode fraction {:.3} (need >= {GATE_IN_MODE})",
            self.loss_ratio, worst
        )
    }
}

/// Conditional (unguided) sampling of every trained pair, plus the loss
/// improvement check.
pub fn quality_gate(ckpt: &Checkpoint, report: &TrainReport, seed: u64) -> Result<GateReport> {
    let model = &ckpt.model;
    let world = &ckpt.world;
    let schedule = ckpt.noise.build()?;
    let conditional = SamplerConfig::baseline(GuidanceSchedule::Constant(1.0));
    let mut pairs = Vec::new();
    for c in 0..world.n_concepts {
        for a in (0..world.n_attributes).filter(|&a| world.cooccurs(c, a)) {
            let prompt = encode_prompt(Subject::Concept(c), a, model)?;
            let cond = PromptConditioning { empty: encode_empty(model), prompts: vec![prompt.clone(), prompt] };
            let pts = (0..GATE_SAMPLES as u64)
                .map(|i| sample_one(&cond, &conditional, &schedule, model, sample_seed(seed, i), None).map(|s| [s.x[0], s.x[1]]))
                .collect::<Result<Vec<_>>>()?;
            pairs.push(PairGate { concept: c, attribute: a, in_mode_fraction: region_fraction(&pts, c, a, world)? });
        }
    }
    let loss_ratio = report.improvement_ratio();
    let loss_ok = loss_ratio >= GATE_LOSS_RATIO;
    let in_mode_ok = pairs.iter().all(|p| p.in_mode_fraction >= GATE_IN_MODE);
    Ok(GateReport { loss_ratio, loss_ok, pairs, in_mode_ok, passed: loss_ok && in_mode_ok })
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub report: TrainReport,
    pub gate: GateReport,
}

/// Generates the dataset, trains, writes the checkpoint, loss curve and gate
/// report. A failed gate is reported in the outcome, not as an error.
pub fn cmd_train(config: &RunConfig, out: &Path) -> Result<TrainOutcome> {
    config.validate()?;
    let seeds = &config.seeds;
    let data = generate_dataset(&config.world, config.train.n_per_pair, seeds.phase(Phase::Data))?;
    write_dataset(&out.join("dataset.csv"), &data)?;
    let mut model =
        DenoiserModel::new(config.model, config.world.n_concepts, config.world.n_attributes, seeds.phase(Phase::Init))?;
    let schedule = config.noise.build()?;
    let train_seed = seeds.phase(Phase::Train);
    let report = train(&mut model, &data, &schedule, &config.train, train_seed)?;
    info!("training done: initial loss {:.4}, final smoothed loss {:.4}", report.initial_loss, report.final_smoothed_loss);

    let ckpt = Checkpoint { world: config.world.clone(), noise: config.noise, model, train_seed };
    let checkpoint = out.join(CHECKPOINT_FILE);
    ckpt.save(&checkpoint)?;
    let curve: Vec<(f64, f64)> = report.loss_curve.iter().map(|&(s, l)| (s as f64, l)).collect();
    write_plot(&out.join("loss_curve.dat"), "step", "smoothed_loss", &curve)?;

    let gate = quality_gate(&ckpt, &report, seeds.phase(Phase::Sampling))?;
    let summary = serde_json::json!({ "report": report, "gate": gate, "config": config });
    write_atomic(&out.join("train_report.json"), serde_json::to_string_pretty(&summary).unwrap().as_bytes())?;
    Ok(TrainOutcome { checkpoint, report, gate })
}

/// Overrides applied on top of the configuration file.
#[derive(Clone, Debug, Default)]
pub struct SampleOptions {
    pub mode: Option<Mode>,
    pub count: Option<usize>,
    pub trace: bool,
}

#[derive(Clone, Debug)]
pub struct SampleOutcome {
    pub manifest_path: PathBuf,
    pub manifest: RunManifest,
    pub records: Vec<Vec<SampleRecord>>,
}

struct Loaded {
    ckpt: Checkpoint,
    sha: String,
    config: RunConfig,
    prompts: PromptSet,
}

fn load_for_sampling(config: &RunConfig, checkpoint: &Path) -> Result<Loaded> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let sha = file_sha256(checkpoint)?;
    let mut config = config.clone();
    config.world = ckpt.world.clone();
    config.noise = ckpt.noise;
    config.model = ckpt.model.arch;
    config.seeds = config.seeds.resolved();
    config.validate()?;
    let prompts =
        build_prompt_set(config.sampling.target_concept, &ckpt.world, &ckpt.model, config.seeds.phase(Phase::Selection))?;
    info!(
        "target concept {} with novel attribute {}, donor concept {}, cluster {:?}",
        prompts.record.target_concept, prompts.record.novel_attribute, prompts.record.donor_concept, prompts.record.cluster
    );
    Ok(Loaded { ckpt, sha, config, prompts })
}

fn run_jobs(loaded: &Loaded, jobs: &mut [SampleJob], out: &Path, trace: bool) -> Result<Vec<Vec<SampleRecord>>> {
    let schedule = loaded.ckpt.noise.build()?;
    let ctx = JobContext { model: &loaded.ckpt.model, schedule: &schedule, prompts: &loaded.prompts };
    jobs.iter_mut()
        .map(|job| {
            info!("sampling '{}' ({} samples)", job.label, job.seeds.len());
            execute_job(job, &ctx, out, trace)
        })
        .collect()
}

fn finish(loaded: Loaded, command: &str, checkpoint: &Path, jobs: Vec<SampleJob>, out: &Path) -> Result<RunManifest> {
    let manifest = RunManifest {
        tool_version: TOOL_VERSION.into(),
        command: command.into(),
        config: loaded.config,
        checkpoint: checkpoint.to_path_buf(),
        checkpoint_sha256: loaded.sha,
        selection: loaded.prompts.record,
        jobs,
    };
    manifest.save(out)?;
    Ok(manifest)
}

pub fn cmd_sample(config: &RunConfig, checkpoint: &Path, out: &Path, opts: &SampleOptions) -> Result<SampleOutcome> {
    let mut config = config.clone();
    if let Some(m) = opts.mode {
        config.sampling.mode = m;
    }
    if let Some(c) = opts.count {
        config.sampling.count = c;
    }
    let loaded = load_for_sampling(&config, checkpoint)?;
    let s = &loaded.config.sampling;
    let seeds = &loaded.config.seeds;
    let mut jobs = vec![SampleJob::plan(
        s.mode.as_str().into(),
        s.mode,
        s.sampler(s.mode, 0.0),
        s.count,
        seeds.phase(Phase::Sampling),
        BetaChoice::Pool { values: &s.beta0_pool, seed: seeds.phase(Phase::BetaDraws) },
        "samples.csv".into(),
    )];
    let records = run_jobs(&loaded, &mut jobs, out, opts.trace)?;
    let manifest = finish(loaded, "sample", checkpoint, jobs, out)?;
    Ok(SampleOutcome { manifest_path: out.join(super::manifest::MANIFEST_FILE), manifest, records })
}

/// One sweep row's coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub operation: Operation,
    /// `None` draws from the sampling pool.
    pub beta0: Option<f64>,
    #[serde(with = "crate::io::extended_float")]
    pub tau: f64,
    pub w_cfg: f64,
    pub t_star: f64,
    pub orthogonalize: bool,
}

impl GridPoint {
    pub fn label(&self) -> String {
        let beta = self.beta0.map_or("pool".to_string(), |b| b.to_string());
        format!(
            "op={} beta0={beta} tau={} w_cfg={} t_star={} orth={}",
            match self.operation {
                Operation::Union => "union",
                Operation::Intersection => "intersection",
                Operation::Both => "both",
            },
            self.tau,
            self.w_cfg,
            self.t_star,
            self.orthogonalize
        )
    }
}

fn or_default<T: Clone>(list: &[T], fallback: T) -> Vec<T> {
    if list.is_empty() {
        vec![fallback]
    } else {
        list.to_vec()
    }
}

/// Cross product of the sweep axes, in the order operation, beta0, tau,
/// w_cfg, t_star, orthogonalize (last varies fastest).
pub fn expand_grid(config: &RunConfig) -> Vec<GridPoint> {
    let s = &config.sampling;
    let a = &config.ablate;
    let beta: Vec<Option<f64>> = if a.beta0.is_empty() { vec![None] } else { a.beta0.iter().map(|&b| Some(b)).collect() };
    let mut out = Vec::new();
    for operation in or_default(&a.operation, s.operation) {
        for &beta0 in &beta {
            for tau in or_default(&a.tau, s.tau) {
                for w_cfg in or_default(&a.w_cfg, s.w_cfg) {
                    for t_star in or_default(&a.t_star, s.t_star) {
                        for orthogonalize in or_default(&a.orthogonalize, s.orthogonalize) {
                            out.push(GridPoint { operation, beta0, tau, w_cfg, t_star, orthogonalize });
                        }
                    }
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub point: GridPoint,
    pub label: String,
    pub metric: String,
    pub mean_adherence: f64,
    pub std_adherence: f64,
    pub mean_class_similarity: f64,
    pub std_class_similarity: f64,
}

#[derive(Clone, Debug)]
pub struct AblateOutcome {
    pub manifest_path: PathBuf,
    pub manifest: RunManifest,
    pub rows: Vec<AblationRow>,
}

pub fn cmd_ablate(config: &RunConfig, checkpoint: &Path, out: &Path, trace: bool) -> Result<AblateOutcome> {
    let grid = expand_grid(config);
    if grid.is_empty() {
        return Err(Error::Config("ablation grid is empty".into()));
    }
    let loaded = load_for_sampling(config, checkpoint)?;
    let seeds = &loaded.config.seeds;
    let mode = loaded.config.sampling.mode;
    let mut jobs = Vec::with_capacity(grid.len());
    for (i, p) in grid.iter().enumerate() {
        let mut s = loaded.config.sampling.clone();
        s.operation = p.operation;
        s.tau = p.tau;
        s.w_cfg = p.w_cfg;
        s.t_star = p.t_star;
        s.orthogonalize = p.orthogonalize;
        let sampler = s.sampler(mode, 0.0);
        sampler.rso.validate()?;
        sampler.tei.validate()?;
        let beta = match p.beta0 {
            Some(b) => BetaChoice::Fixed(b),
            None => BetaChoice::Pool { values: &loaded.config.sampling.beta0_pool, seed: seeds.phase(Phase::BetaDraws) },
        };
        jobs.push(SampleJob::plan(
            p.label(),
            mode,
            sampler,
            s.count,
            seeds.phase(Phase::Sampling),
            beta,
            format!("samples_{i:03}.csv"),
        ));
    }
    let records = run_jobs(&loaded, &mut jobs, out, trace)?;
    let world = &loaded.ckpt.world;
    let mut rows = Vec::with_capacity(grid.len());
    for (p, recs) in grid.iter().zip(&records) {
        let pts: Vec<_> = recs.iter().map(SampleRecord::point).collect();
        let rep = adherence(&pts, loaded.prompts.record.novel_attribute, loaded.prompts.record.target_concept, world)?;
        rows.push(AblationRow {
            point: p.clone(),
            label: p.label(),
            metric: rep.metric,
            mean_adherence: rep.mean_adherence,
            std_adherence: rep.std_adherence,
            mean_class_similarity: rep.mean_class_similarity,
            std_class_similarity: rep.std_class_similarity,
        });
    }
    write_records(&out.join("sweep.jsonl"), &rows)?;
    write_atomic(&out.join("sweep.tsv"), sweep_table(&rows).as_bytes())?;
    write_sweep_plots(&rows, config, out)?;
    let manifest = finish(loaded, "ablate", checkpoint, jobs, out)?;
    Ok(AblateOutcome { manifest_path: out.join(super::manifest::MANIFEST_FILE), manifest, rows })
}

fn sweep_table(rows: &[AblationRow]) -> String {
    let mut t = String::from(
        "operation\tbeta0\ttau\tw_cfg\tt_star\torthogonalize\tadherence_mean\tadherence_std\tclass_similarity_mean\tclass_similarity_std\n",
    );
    for r in rows {
        let p = &r.point;
        t.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\n",
            serde_json::to_value(p.operation).unwrap().as_str().unwrap(),
            p.beta0.map_or("pool".into(), |b| b.to_string()),
            p.tau,
            p.w_cfg,
            p.t_star,
            p.orthogonalize,
            r.mean_adherence,
            r.std_adherence,
            r.mean_class_similarity,
            r.std_class_similarity
        ));
    }
    t
}

/// `plot_<axis>_<metric>.dat` for every numeric axis with more than one value.
fn write_sweep_plots(rows: &[AblationRow], config: &RunConfig, out: &Path) -> Result<()> {
    let a = &config.ablate;
    type Axis<'a> = (&'a str, usize, fn(&GridPoint) -> f64);
    let axes: [Axis; 4] = [
        ("beta0", a.beta0.len(), |p| p.beta0.unwrap_or(f64::NAN)),
        ("tau", a.tau.len(), |p| p.tau),
        ("w_cfg", a.w_cfg.len(), |p| p.w_cfg),
        ("t_star", a.t_star.len(), |p| p.t_star),
    ];
    for (name, len, get) in axes {
        if len < 2 {
            continue;
        }
        let adh: Vec<(f64, f64)> = rows.iter().map(|r| (get(&r.point), r.mean_adherence)).collect();
        let cls: Vec<(f64, f64)> = rows.iter().map(|r| (get(&r.point), r.mean_class_similarity)).collect();
        write_plot(&out.join(format!("plot_{name}_adherence.dat")), name, "adherence", &adh)?;
        write_plot(&out.join(format!("plot_{name}_class_similarity.dat")), name, "class_similarity", &cls)?;
    }
    Ok(())
}

#[derive(Clone, Debug, Default)]
pub struct EvalOptions {
    /// Embedding file for Recall@K: header line, then `label, e0, e1, ...`.
    pub embeddings: Option<PathBuf>,
    pub k_values: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileReport {
    pub file: PathBuf,
    pub report: AdherenceReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetTable {
    pub baseline: PathBuf,
    pub method: PathBuf,
    pub metric: String,
    pub rows: Vec<SubsetImprovement>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOutcome {
    pub reports: Vec<FileReport>,
    pub subsets: Vec<SubsetTable>,
    pub recall: Option<BTreeMap<usize, f64>>,
}

fn single_target(records: &[SampleRecord], path: &Path) -> Result<(usize, usize)> {
    let first = records.first().ok_or(Error::Empty("samples file"))?;
    let t = (first.target_concept, first.target_attribute);
    if records.iter().any(|r| (r.target_concept, r.target_attribute) != t) {
        return Err(Error::format(path, "samples target more than one (concept, attribute) pair"));
    }
    Ok(t)
}

/// Adherence for every samples file. The first file is the baseline; every
/// further file is compared against it on seed-paired bottom subsets.
pub fn cmd_eval(samples: &[PathBuf], checkpoint: &Path, out: &Path, opts: &EvalOptions) -> Result<EvalOutcome> {
    if samples.is_empty() {
        return Err(Error::Config("eval needs at least one samples file".into()));
    }
    let world = Checkpoint::load(checkpoint)?.world;
    let mut loaded = Vec::new();
    let mut reports = Vec::new();
    for path in samples {
        let recs = read_samples(path)?;
        let (c, a) = single_target(&recs, path)?;
        let pts: Vec<_> = recs.iter().map(SampleRecord::point).collect();
        reports.push(FileReport { file: path.clone(), report: adherence(&pts, a, c, &world)? });
        loaded.push(recs);
    }
    let mut subsets = Vec::new();
    for (i, recs) in loaded.iter().enumerate().skip(1) {
        let base = &loaded[0];
        let paired = base.len() == recs.len()
            && base.iter().zip(recs).all(|(b, m)| {
                b.seed == m.seed && (b.target_concept, b.target_attribute) == (m.target_concept, m.target_attribute)
            });
        if !paired {
            return Err(Error::Config(format!(
                "{} is not seed-paired with {}",
                samples[i].display(),
                samples[0].display()
            )));
        }
        let rows = subset_improvement(&reports[0].report, &reports[i].report, &DEFAULT_FRACTIONS)?;
        let plot: Vec<(f64, f64)> = rows.iter().map(|r| (r.subset_fraction, r.relative_improvement_pct)).collect();
        write_plot(&out.join(format!("subsets_{i}.dat")), "subset_fraction", "relative_improvement_pct", &plot)?;
        subsets.push(SubsetTable {
            baseline: samples[0].clone(),
            method: samples[i].clone(),
            metric: reports[i].report.metric.clone(),
            rows,
        });
    }
    write_records(&out.join("adherence.jsonl"), &reports)?;
    if !subsets.is_empty() {
        write_records(&out.join("subsets.jsonl"), &subsets)?;
    }
    let recall = match &opts.embeddings {
        Some(path) => {
            let (labels, emb) = read_embeddings(path)?;
            let ks = if opts.k_values.is_empty() { vec![1, 2, 4] } else { opts.k_values.clone() };
            let r = recall_at_k(&emb, &labels, None, &ks)?;
            write_records(&out.join("recall.jsonl"), &[&r])?;
            Some(r)
        }
        None => None,
    };
    Ok(EvalOutcome { reports, subsets, recall })
}

/// Header line, then `label, e0, e1, ...` per line.
pub fn read_embeddings(path: &Path) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let text = read_text(path)?;
    let mut labels = Vec::new();
    let mut emb = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1).filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || Error::format(path, format!("line {}: expected 'label, e0, e1, ...'", i + 1));
        let mut f = line.split(',').map(str::trim);
        labels.push(f.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?);
        let v = f.map(|s| s.parse::<f64>().map_err(|_| bad())).collect::<Result<Vec<_>>>()?;
        if v.is_empty() {
            return Err(bad());
        }
        emb.push(v);
    }
    Ok((labels, emb))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayedJob {
    pub label: String,
    pub expected_sha256: String,
    pub actual_sha256: String,
}

/// Re-executes every job of a manifest into `out` and compares output hashes.
/// `checkpoint` overrides the manifest's checkpoint path (its hash must
/// still match).
pub fn cmd_replay(manifest_path: &Path, checkpoint: Option<&Path>, out: &Path) -> Result<Vec<ReplayedJob>> {
    let manifest = RunManifest::load(manifest_path)?;
    let ckpt_path = checkpoint.map_or_else(|| manifest.checkpoint.clone(), Path::to_path_buf);
    let sha = file_sha256(&ckpt_path)?;
    if sha != manifest.checkpoint_sha256 {
        return Err(Error::ReplayMismatch(format!(
            "checkpoint {} has hash {sha}, manifest expects {}",
            ckpt_path.display(),
            manifest.checkpoint_sha256
        )));
    }
    let ckpt = Checkpoint::load(&ckpt_path)?;
    let prompts = PromptSet::from_record(manifest.selection.clone(), &ckpt.model)?;
    let schedule = ckpt.noise.build()?;
    let ctx = JobContext { model: &ckpt.model, schedule: &schedule, prompts: &prompts };
    let mut results = Vec::new();
    for job in &manifest.jobs {
        let mut replay = job.clone();
        execute_job(&mut replay, &ctx, out, job.trace_file.is_some())?;
        results.push(ReplayedJob {
            label: job.label.clone(),
            expected_sha256: job.samples_sha256.clone(),
            actual_sha256: replay.samples_sha256,
        });
    }
    if let Some(bad) = results.iter().find(|r| r.expected_sha256 != r.actual_sha256) {
        return Err(Error::ReplayMismatch(format!(
            "job '{}' produced {} instead of {}",
            bad.label, bad.actual_sha256, bad.expected_sha256
        )));
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_expansion_counts_and_inherits() {
        let mut cfg = RunConfig::default();
        assert_eq!(expand_grid(&cfg).len(), 10);
        cfg.ablate.beta0 = vec![6.0];
        cfg.ablate.tau = vec![1.0, f64::INFINITY];
        cfg.ablate.orthogonalize = vec![true, false];
        let g = expand_grid(&cfg);
        assert_eq!(g.len(), 4);
        assert!(g.iter().all(|p| p.w_cfg == 4.0 && p.t_star == 0.2 && p.beta0 == Some(6.0)));
        cfg.ablate = Default::default();
        cfg.ablate.beta0.clear();
        let g = expand_grid(&cfg);
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].beta0, None);
    }

    #[test]
    fn labels_name_every_axis() {
        let p = GridPoint {
            operation: Operation::Union,
            beta0: Some(2.0),
            tau: f64::INFINITY,
            w_cfg: 4.0,
            t_star: 0.2,
            orthogonalize: false,
        };
        assert_eq!(p.label(), "op=union beta0=2 tau=inf w_cfg=4 t_star=0.2 orth=false");
    }

    #[test]
    fn embeddings_file_parses() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        std::fs::write(&p, "label, e0, e1\n0, 1.0, 2.0\n1, -1, 0.5\n").unwrap();
        let (l, e) = read_embeddings(&p).unwrap();
        assert_eq!(l, vec![0, 1]);
        assert_eq!(e[1], vec![-1.0, 0.5]);
        std::fs::write(&p, "label, e0\nx, 1\n").unwrap();
        assert!(read_embeddings(&p).is_err());
    }
}
