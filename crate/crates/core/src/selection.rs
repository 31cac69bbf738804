//! Attribute and donor selection: cosine ranking of attribute embeddings,
//! mining a novel attribute from the dissimilar half, clustering its nearest
//! neighbours into context priors, and picking a donor concept that already
//! co-occurs with the attribute.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffusion::PromptConditioning;
use crate::error::{Error, Result};
use crate::toymodel::conditioning::{encode_empty, encode_prompt, ConditioningVector, Subject};
use crate::toymodel::model::{DenoiserModel, Token};
use crate::toymodel::world::ToyWorldSpec;

/// Number of nearest neighbours added around the novel attribute.
pub const DEFAULT_NEIGHBORS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRanking {
    pub query_id: usize,
    /// `(attribute id, cosine similarity)`, most similar first.
    pub ranked: Vec<(usize, f64)>,
}

impl SimilarityRanking {
    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    pub fn ids(&self) -> Vec<usize> {
        self.ranked.iter().map(|(id, _)| *id).collect()
    }
}

fn unit(v: &[f64]) -> Result<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::ZeroDirection);
    }
    Ok(v.iter().map(|x| x / n).collect())
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), actual: b.len() });
    }
    let (ua, ub) = (unit(a)?, unit(b)?);
    Ok(ua.iter().zip(&ub).map(|(x, y)| x * y).sum::<f64>().clamp(-1.0, 1.0))
}

/// Every other attribute sorted by cosine similarity to `query`, descending,
/// ties broken by ascending id.
pub fn rank_attributes(query: usize, embeddings: &[Vec<f64>]) -> Result<SimilarityRanking> {
    if embeddings.len() < 2 {
        return Err(Error::OutOfRange(format!("need at least 2 attributes, got {}", embeddings.len())));
    }
    let q = embeddings.get(query).ok_or(Error::UnknownId { kind: "attribute", id: query })?;
    let mut ranked = embeddings
        .iter()
        .enumerate()
        .filter(|(id, _)| *id != query)
        .map(|(id, e)| Ok((id, cosine_similarity(q, e)?)))
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(SimilarityRanking { query_id: query, ranked })
}

/// Uniform draw from the least similar `max(1, floor(n/2))` entries.
pub fn mine_novel_attribute(ranking: &SimilarityRanking, seed: u64) -> Result<usize> {
    let n = ranking.len();
    if n == 0 {
        return Err(Error::Empty("similarity ranking"));
    }
    let bottom = (n / 2).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = n - bottom + rng.random_range(0..bottom);
    Ok(ranking.ranked[pick].0)
}

/// `center` followed by its `k` most similar attributes.
pub fn neighbor_cluster(center: usize, embeddings: &[Vec<f64>], k: usize) -> Result<Vec<usize>> {
    if embeddings.len() < k + 1 {
        return Err(Error::OutOfRange(format!(
            "neighbor cluster of size {} needs {} attributes, have {}",
            k + 1,
            k + 1,
            embeddings.len()
        )));
    }
    if k == 0 {
        if center >= embeddings.len() {
            return Err(Error::UnknownId { kind: "attribute", id: center });
        }
        return Ok(vec![center]);
    }
    let ranking = rank_attributes(center, embeddings)?;
    let mut out = vec![center];
    out.extend(ranking.ranked.iter().take(k).map(|(id, _)| *id));
    Ok(out)
}

/// Most similar concept (by embedding) that co-occurs with `attribute`,
/// excluding the target itself. Ties go to the lower id.
pub fn select_donor(
    target_concept: usize,
    attribute: usize,
    world: &ToyWorldSpec,
    concept_embeddings: &[Vec<f64>],
) -> Result<usize> {
    if target_concept >= world.n_concepts {
        return Err(Error::UnknownId { kind: "concept", id: target_concept });
    }
    if attribute >= world.n_attributes {
        return Err(Error::UnknownId { kind: "attribute", id: attribute });
    }
    if concept_embeddings.len() != world.n_concepts {
        return Err(Error::DimensionMismatch { expected: world.n_concepts, actual: concept_embeddings.len() });
    }
    let target = &concept_embeddings[target_concept];
    let mut best: Option<(usize, f64)> = None;
    for c in (0..world.n_concepts).filter(|&c| c != target_concept && world.cooccurs(c, attribute)) {
        let s = cosine_similarity(target, &concept_embeddings[c])?;
        if best.is_none_or(|(_, bs)| s > bs) {
            best = Some((c, s));
        }
    }
    best.map(|(c, _)| c).ok_or(Error::NoDonor { target: target_concept, attribute })
}

/// Every choice made while assembling a prompt set; enough to rebuild it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub target_concept: usize,
    /// Attribute the dissimilarity ranking is taken against.
    pub reference_attribute: usize,
    pub novel_attribute: usize,
    pub cluster: Vec<usize>,
    pub donor_concept: usize,
    pub seed: u64,
}

/// Anchor, donor and metaclass context priors with their conditioning.
#[derive(Clone, Debug, PartialEq)]
pub struct PromptSet {
    pub record: SelectionRecord,
    pub anchor: ConditioningVector,
    pub donor: ConditioningVector,
    pub context_priors: Vec<ConditioningVector>,
    pub empty: ConditioningVector,
}

impl PromptSet {
    /// Anchor, donor, then context priors.
    pub fn conditioning(&self) -> PromptConditioning {
        let mut prompts = vec![self.anchor.clone(), self.donor.clone()];
        prompts.extend(self.context_priors.iter().cloned());
        PromptConditioning { empty: self.empty.clone(), prompts }
    }

    /// Encodes the prompts a selection record describes.
    pub fn from_record(record: SelectionRecord, model: &DenoiserModel) -> Result<Self> {
        let anchor = encode_prompt(Subject::Concept(record.target_concept), record.novel_attribute, model)?;
        let donor = encode_prompt(Subject::Concept(record.donor_concept), record.novel_attribute, model)?;
        let context_priors =
            record.cluster.iter().map(|&a| encode_prompt(Subject::Metaclass, a, model)).collect::<Result<Vec<_>>>()?;
        Ok(Self { record, anchor, donor, context_priors, empty: encode_empty(model) })
    }
}

pub fn attribute_embeddings(model: &DenoiserModel) -> Result<Vec<Vec<f64>>> {
    (0..model.n_attributes).map(|a| model.embedding(Token::Attribute(a))).collect()
}

pub fn concept_embeddings(model: &DenoiserModel) -> Result<Vec<Vec<f64>>> {
    (0..model.n_concepts).map(|c| model.embedding(Token::Concept(c))).collect()
}

/// Selection logic over explicit embeddings (the model-free part of
/// [`build_prompt_set`]).
pub fn select_prompts(
    target_concept: usize,
    world: &ToyWorldSpec,
    attribute_embeddings: &[Vec<f64>],
    concept_embeddings: &[Vec<f64>],
    seed: u64,
) -> Result<SelectionRecord> {
    if target_concept >= world.n_concepts {
        return Err(Error::UnknownId { kind: "concept", id: target_concept });
    }
    if attribute_embeddings.len() != world.n_attributes {
        return Err(Error::DimensionMismatch { expected: world.n_attributes, actual: attribute_embeddings.len() });
    }
    // The representative attribute is the concept's first co-occurring one.
    let reference_attribute = (0..world.n_attributes)
        .find(|&a| world.cooccurs(target_concept, a))
        .ok_or(Error::UnknownId { kind: "concept without attributes", id: target_concept })?;

    let ranking = rank_attributes(reference_attribute, attribute_embeddings)?;
    // Only attributes that are novel for the target and that some other
    // concept can donate are eligible; keep their relative ranking order.
    let eligible = SimilarityRanking {
        query_id: reference_attribute,
        ranked: ranking
            .ranked
            .iter()
            .copied()
            .filter(|&(a, _)| {
                !world.cooccurs(target_concept, a)
                    && (0..world.n_concepts).any(|c| c != target_concept && world.cooccurs(c, a))
            })
            .collect(),
    };
    let novel_attribute = if eligible.is_empty() {
        return Err(Error::Config(format!("concept {target_concept} has no novel, donatable attribute")));
    } else {
        mine_novel_attribute(&eligible, seed)?
    };

    let available = world.n_attributes;
    let k = DEFAULT_NEIGHBORS.min(available - 1);
    if k < DEFAULT_NEIGHBORS {
        warn!("only {available} attributes; neighbor cluster reduced to k = {k}");
    }
    let cluster = neighbor_cluster(novel_attribute, attribute_embeddings, k)?;
    let donor_concept = select_donor(target_concept, novel_attribute, world, concept_embeddings)?;
    Ok(SelectionRecord { target_concept, reference_attribute, novel_attribute, cluster, donor_concept, seed })
}

/// Mines the novel attribute, builds its neighbour cluster, picks the donor,
/// and encodes every prompt with the model's learned embeddings.
pub fn build_prompt_set(target_concept: usize, world: &ToyWorldSpec, model: &DenoiserModel, seed: u64) -> Result<PromptSet> {
    let record =
        select_prompts(target_concept, world, &attribute_embeddings(model)?, &concept_embeddings(model)?, seed)?;
    PromptSet::from_record(record, model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn embs(v: &[&[f64]]) -> Vec<Vec<f64>> {
        v.iter().map(|x| x.to_vec()).collect()
    }

    #[test]
    fn ranking_extremes() {
        let e = embs(&[&[1.0, 0.0], &[0.0, 1.0], &[2.0, 0.0], &[-1.0, 0.0]]);
        let r = rank_attributes(0, &e).unwrap();
        assert_eq!(r.ranked[0], (2, 1.0));
        assert_eq!(*r.ranked.last().unwrap(), (3, -1.0));
        assert_eq!(r.ids(), vec![2, 1, 3]);
    }

    #[test]
    fn ranking_ties_break_by_id() {
        let e = embs(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, -1.0]]);
        assert_eq!(rank_attributes(0, &e).unwrap().ids(), vec![1, 2]);
    }

    #[test]
    fn ranking_errors() {
        assert!(rank_attributes(0, &embs(&[&[1.0]])).is_err());
        assert!(rank_attributes(0, &embs(&[&[1.0, 0.0], &[0.0, 0.0]])).is_err());
        assert!(rank_attributes(5, &embs(&[&[1.0], &[2.0]])).is_err());
    }

    #[test]
    fn mining_two_attributes_picks_the_other() {
        let e = embs(&[&[1.0, 0.0], &[0.0, 1.0], &[0.9, 0.1]]);
        let r = rank_attributes(0, &e).unwrap();
        for seed in 0..20 {
            assert_eq!(mine_novel_attribute(&r, seed).unwrap(), 1);
        }
    }

    #[test]
    fn mining_stays_in_bottom_half() {
        let e: Vec<Vec<f64>> = (0..11).map(|i| vec![(i as f64 * 0.3).cos(), (i as f64 * 0.3).sin()]).collect();
        let r = rank_attributes(0, &e).unwrap();
        let bottom: Vec<usize> = r.ids()[5..].to_vec();
        for seed in 0..500 {
            assert!(bottom.contains(&mine_novel_attribute(&r, seed).unwrap()));
        }
    }

    #[test]
    fn cluster_basics() {
        let e = embs(&[&[1.0, 0.0], &[0.0, 1.0], &[0.9, 0.1], &[-1.0, 0.0], &[0.7, 0.7], &[0.1, -1.0]]);
        assert_eq!(neighbor_cluster(0, &e, 0).unwrap(), vec![0]);
        let r = rank_attributes(0, &e).unwrap();
        let c = neighbor_cluster(0, &e, 4).unwrap();
        assert_eq!(c[0], 0);
        assert_eq!(&c[1..], &r.ids()[..4]);
        assert!(neighbor_cluster(0, &e, 6).is_err());
    }

    #[test]
    fn donor_examples() {
        let w = ToyWorldSpec::default();
        let centers: Vec<Vec<f64>> = w.concept_centers.iter().map(|c| c.to_vec()).collect();
        // concepts 1 and 2 are equally close to concept 0; lower id wins
        assert_eq!(select_donor(0, 1, &w, &centers).unwrap(), 1);
        // the target never donates to itself, even when it co-occurs
        for a in 0..2 {
            assert_ne!(select_donor(1, a, &w, &centers).unwrap(), 1);
        }
        let mut only = w.clone();
        only.cooccurrence = vec![vec![true, false], vec![true, false], vec![true, true], vec![true, false]];
        assert_eq!(select_donor(0, 1, &only, &centers).unwrap(), 2);
        only.cooccurrence[2][1] = false;
        only.cooccurrence[0][1] = true;
        assert!(matches!(select_donor(0, 1, &only, &centers), Err(Error::NoDonor { .. })));
    }

    #[test]
    fn two_attribute_world_selection() {
        let w = ToyWorldSpec::default();
        let attrs = embs(&[&[1.0, 0.2], &[-0.3, 1.0]]);
        let concepts: Vec<Vec<f64>> = w.concept_centers.iter().map(|c| c.to_vec()).collect();
        let rec = select_prompts(0, &w, &attrs, &concepts, 3).unwrap();
        assert_eq!(rec.novel_attribute, 1);
        assert_eq!(rec.reference_attribute, 0);
        assert_eq!(rec.cluster, vec![1, 0]);
        assert_eq!(rec.donor_concept, 1);
    }
}
