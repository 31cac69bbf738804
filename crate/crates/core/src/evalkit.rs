//! Evaluation at toy scale: target-attribute adherence and class similarity
//! from the reference embedder, paired bottom-subset analysis, Recall@K, and
//! configuration sweeps.
//!
//! Scores are softmax masses, not CLIP similarities. Only comparisons between
//! methods carry over; every report is tagged [`TOY_METRIC_TAG`].

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffusion::{sample_seed, sample_one, Denoiser, NoiseSchedule, PromptConditioning, SamplerConfig};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::toymodel::embedder::reference_embedder;
use crate::toymodel::world::{Point, ToyWorldSpec};

pub const TOY_METRIC_TAG: &str = "toy-metric";

/// Bottom-subset fractions reported by default (full set first).
pub const DEFAULT_FRACTIONS: [f64; 5] = [1.0, 0.5, 0.2, 0.1, 0.05];

/// Radius of a mode region, in units of `mode_std`.
pub const REGION_K_SIGMA: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub attribute: f64,
    pub concept: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdherenceReport {
    pub metric: String,
    pub target_concept: usize,
    pub target_attribute: usize,
    pub per_sample: Vec<SampleScore>,
    pub mean_adherence: f64,
    pub mean_class_similarity: f64,
    pub std_adherence: f64,
    pub std_class_similarity: f64,
}

impl AdherenceReport {
    pub fn len(&self) -> usize {
        self.per_sample.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_sample.is_empty()
    }

    pub fn attribute_scores(&self) -> Vec<f64> {
        self.per_sample.iter().map(|s| s.attribute).collect()
    }
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn adherence(
    samples: &[Point],
    target_attribute: usize,
    target_concept: usize,
    spec: &ToyWorldSpec,
) -> Result<AdherenceReport> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    if target_concept >= spec.n_concepts {
        return Err(Error::UnknownId { kind: "concept", id: target_concept });
    }
    if target_attribute >= spec.n_attributes {
        return Err(Error::UnknownId { kind: "attribute", id: target_attribute });
    }
    let per_sample: Vec<SampleScore> = samples
        .iter()
        .map(|&p| {
            let s = reference_embedder(p, spec);
            SampleScore { attribute: s.attribute[target_attribute], concept: s.concept[target_concept] }
        })
        .collect();
    let (mean_adherence, std_adherence) = mean_std(&per_sample.iter().map(|s| s.attribute).collect::<Vec<_>>());
    let (mean_class_similarity, std_class_similarity) =
        mean_std(&per_sample.iter().map(|s| s.concept).collect::<Vec<_>>());
    Ok(AdherenceReport {
        metric: TOY_METRIC_TAG.into(),
        target_concept,
        target_attribute,
        per_sample,
        mean_adherence,
        mean_class_similarity,
        std_adherence,
        std_class_similarity,
    })
}

/// Fraction of samples inside the `REGION_K_SIGMA` disc of a mode.
pub fn region_fraction(samples: &[Point], concept: usize, attribute: usize, spec: &ToyWorldSpec) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    let hits = samples.iter().filter(|&&p| spec.in_mode_region(p, concept, attribute, REGION_K_SIGMA)).count();
    Ok(hits as f64 / samples.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetImprovement {
    pub subset_fraction: f64,
    pub subset_size: usize,
    pub baseline_mean: f64,
    pub method_mean: f64,
    pub relative_improvement_pct: f64,
}

/// Indices of the `ceil(fraction * n)` lowest baseline scores (at least one),
/// ties broken by index.
pub fn bottom_subset(baseline_scores: &[f64], fraction: f64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::OutOfRange(format!("subset fraction {fraction} not in (0, 1]")));
    }
    let n = baseline_scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| baseline_scores[a].total_cmp(&baseline_scores[b]).then(a.cmp(&b)));
    let size = ((fraction * n as f64).ceil() as usize).clamp(1, n);
    order.truncate(size);
    Ok(order)
}

/// Paired comparison on the bottom subsets of the baseline's adherence.
pub fn subset_improvement(
    baseline: &AdherenceReport,
    method: &AdherenceReport,
    fractions: &[f64],
) -> Result<Vec<SubsetImprovement>> {
    if baseline.len() != method.len() {
        return Err(Error::DimensionMismatch { expected: baseline.len(), actual: method.len() });
    }
    if baseline.is_empty() {
        return Err(Error::Empty("adherence report"));
    }
    let base = baseline.attribute_scores();
    let meth = method.attribute_scores();
    fractions
        .iter()
        .map(|&f| {
            let idx = bottom_subset(&base, f)?;
            let k = idx.len() as f64;
            let baseline_mean = idx.iter().map(|&i| base[i]).sum::<f64>() / k;
            let method_mean = idx.iter().map(|&i| meth[i]).sum::<f64>() / k;
            let relative_improvement_pct = if method_mean == baseline_mean {
                0.0
            } else {
                (method_mean - baseline_mean) / baseline_mean * 100.0
            };
            Ok(SubsetImprovement {
                subset_fraction: f,
                subset_size: idx.len(),
                baseline_mean,
                method_mean,
                relative_improvement_pct,
            })
        })
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Recall@K with Euclidean neighbours. When `gallery` is `None` the queries
/// are their own gallery and each query is excluded from its neighbours.
pub fn recall_at_k(
    queries: &[Vec<f64>],
    query_labels: &[usize],
    gallery: Option<(&[Vec<f64>], &[usize])>,
    k_values: &[usize],
) -> Result<BTreeMap<usize, f64>> {
    if queries.is_empty() {
        return Err(Error::Empty("queries"));
    }
    if queries.len() != query_labels.len() {
        return Err(Error::DimensionMismatch { expected: queries.len(), actual: query_labels.len() });
    }
    let (g_emb, g_lab, self_gallery) = match gallery {
        Some((e, l)) => {
            if e.len() != l.len() {
                return Err(Error::DimensionMismatch { expected: e.len(), actual: l.len() });
            }
            (e, l, false)
        }
        None => (queries, query_labels, true),
    };
    if let Some(&k) = k_values.iter().find(|&&k| k == 0 || k >= g_emb.len()) {
        return Err(Error::OutOfRange(format!("k = {k} must lie in 1..{}", g_emb.len())));
    }
    if let Some(bad) = g_emb.iter().chain(queries).find(|v| v.len() != queries[0].len()) {
        return Err(Error::DimensionMismatch { expected: queries[0].len(), actual: bad.len() });
    }
    let max_k = k_values.iter().copied().max().unwrap_or(0);
    let mut hits = vec![0usize; k_values.len()];
    for (qi, q) in queries.iter().enumerate() {
        let mut order: Vec<(f64, usize)> = g_emb
            .iter()
            .enumerate()
            .filter(|(gi, _)| !(self_gallery && *gi == qi))
            .map(|(gi, g)| (sq_dist(q, g), gi))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let first_hit = order.iter().take(max_k).position(|&(_, gi)| g_lab[gi] == query_labels[qi]);
        for (slot, &k) in k_values.iter().enumerate() {
            if first_hit.is_some_and(|p| p < k) {
                hits[slot] += 1;
            }
        }
    }
    Ok(k_values.iter().zip(hits).map(|(&k, h)| (k, h as f64 / queries.len() as f64)).collect())
}

/// One sweep configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub label: String,
    pub config: SamplerConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub config: SamplerConfig,
    pub metric: String,
    pub mean_adherence: f64,
    pub mean_class_similarity: f64,
    pub std_adherence: f64,
    pub std_class_similarity: f64,
}

/// Samples every configuration on the same per-sample seeds and scores the
/// results against the target pair.
#[allow(clippy::too_many_arguments)]
pub fn ablation_sweep(
    model: &dyn Denoiser,
    world: &ToyWorldSpec,
    prompts: &PromptConditioning,
    target: (usize, usize),
    schedule: &NoiseSchedule,
    grid: &[SweepPoint],
    seed: u64,
    count: usize,
) -> Result<Vec<(SweepRow, Vec<Point>)>> {
    if grid.is_empty() {
        return Err(Error::Empty("sweep grid"));
    }
    if count == 0 {
        return Err(Error::Empty("sample count"));
    }
    grid.iter()
        .map(|pt| {
            let points = (0..count as u64)
                .map(|i| {
                    let s = sample_one(prompts, &pt.config, schedule, model, sample_seed(seed, i), None)?;
                    Ok([s.x[0], s.x[1]])
                })
                .collect::<Result<Vec<Point>>>()?;
            let rep = adherence(&points, target.1, target.0, world)?;
            let row = SweepRow {
                label: pt.label.clone(),
                config: pt.config.clone(),
                metric: rep.metric,
                mean_adherence: rep.mean_adherence,
                mean_class_similarity: rep.mean_class_similarity,
                std_adherence: rep.std_adherence,
                std_class_similarity: rep.std_class_similarity,
            };
            Ok((row, points))
        })
        .collect()
}

/// One JSON object per line.
pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).map_err(|e| Error::format(path, e.to_string()))?);
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Plot-ready two-column file with a header line.
pub fn write_plot(path: &Path, x_name: &str, y_name: &str, points: &[(f64, f64)]) -> Result<()> {
    let mut out = format!("{x_name} {y_name}\n");
    for (x, y) in points {
        out.push_str(&format!("{x} {y}\n"));
    }
    write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world() -> ToyWorldSpec {
        ToyWorldSpec::default()
    }

    fn report(attr: &[f64]) -> AdherenceReport {
        let per_sample: Vec<SampleScore> = attr.iter().map(|&a| SampleScore { attribute: a, concept: 1.0 - a }).collect();
        let (ma, sa) = mean_std(attr);
        let (mc, sc) = mean_std(&per_sample.iter().map(|s| s.concept).collect::<Vec<_>>());
        AdherenceReport {
            metric: TOY_METRIC_TAG.into(),
            target_concept: 0,
            target_attribute: 1,
            per_sample,
            mean_adherence: ma,
            mean_class_similarity: mc,
            std_adherence: sa,
            std_class_similarity: sc,
        }
    }

    #[test]
    fn samples_at_the_target_mode() {
        let w = world();
        let m = w.mode_center(0, 1);
        let r = adherence(&[m; 10], 1, 0, &w).unwrap();
        assert_eq!(r.metric, TOY_METRIC_TAG);
        assert!(r.mean_adherence > 0.99);
        assert!(r.mean_class_similarity > 0.99);
        assert!(r.std_adherence < 1e-12);
    }

    #[test]
    fn samples_at_the_other_attribute() {
        let w = world();
        let r = adherence(&[w.mode_center(0, 0); 4], 1, 0, &w).unwrap();
        assert!(r.per_sample.iter().all(|s| s.attribute < 0.5));
    }

    #[test]
    fn aggregates_match_recomputation() {
        let w = world();
        let pts = [[-4.0, 3.0], [-3.5, 4.4], [0.0, 0.0], [4.0, 2.0], [-4.2, 2.6]];
        let r = adherence(&pts, 1, 0, &w).unwrap();
        let a: Vec<f64> = pts.iter().map(|&p| reference_embedder(p, &w).attribute[1]).collect();
        let mean = a.iter().sum::<f64>() / 5.0;
        let std = (a.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 5.0).sqrt();
        assert!((r.mean_adherence - mean).abs() < 1e-12);
        assert!((r.std_adherence - std).abs() < 1e-12);
        assert!(adherence(&[], 1, 0, &w).is_err());
    }

    #[test]
    fn identical_reports_show_no_improvement() {
        let r = report(&[0.1, 0.5, 0.3, 0.9]);
        let rows = subset_improvement(&r, &r, &DEFAULT_FRACTIONS).unwrap();
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().all(|s| s.relative_improvement_pct == 0.0));
    }

    #[test]
    fn full_fraction_is_the_full_set() {
        let b = report(&[0.2, 0.4]);
        let m = report(&[0.3, 0.6]);
        let s = subset_improvement(&b, &m, &[1.0]).unwrap()[0];
        assert_eq!(s.subset_size, 2);
        assert!((s.baseline_mean - 0.3).abs() < 1e-12);
        assert!((s.relative_improvement_pct - 50.0).abs() < 1e-9);
    }

    #[test]
    fn bottom_subset_picks_lowest_baseline() {
        let b = report(&[0.9, 0.1, 0.5, 0.2]);
        let m = report(&[0.0, 0.4, 0.0, 0.4]);
        let s = subset_improvement(&b, &m, &[0.5]).unwrap()[0];
        assert_eq!(s.subset_size, 2);
        assert!((s.baseline_mean - 0.15).abs() < 1e-12);
        assert!((s.method_mean - 0.4).abs() < 1e-12);
        assert!(subset_improvement(&b, &report(&[0.1]), &[0.5]).is_err());
        assert!(bottom_subset(&[0.1], 0.0).is_err());
    }

    #[test]
    fn recall_trivial_cases() {
        let q: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let r = recall_at_k(&q, &[0, 1, 2, 3], None, &[1]).unwrap();
        assert_eq!(r[&1], 0.0);
        let q = vec![vec![0.0], vec![0.1], vec![10.0], vec![10.1], vec![20.0], vec![20.2]];
        let r = recall_at_k(&q, &[0, 0, 1, 1, 2, 2], None, &[1, 2, 4]).unwrap();
        assert_eq!(r.len(), 3);
        assert!(r.values().all(|&v| v == 1.0));
        assert!(recall_at_k(&q, &[0, 0, 1, 1, 2, 2], None, &[6]).is_err());
    }

    #[test]
    fn write_helpers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.jsonl");
        write_records(&p, &[report(&[0.5])]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.contains(TOY_METRIC_TAG));
        let p = dir.path().join("plot.dat");
        write_plot(&p, "beta0", "adherence", &[(0.5, 0.1), (2.0, 0.2)]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "beta0 adherence\n0.5 0.1\n2 0.2\n");
    }
}
