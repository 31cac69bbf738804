use serde::{Deserialize, Serialize};

use super::model::{DenoiserModel, Token};
use crate::error::{Error, Result};
use crate::schedule::TeiWeights;

/// What a prompt names in place of a specific concept.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subject {
    Concept(usize),
    Metaclass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionSource {
    Empty,
    ConceptAttribute { concept: usize, attribute: usize },
    MetaclassAttribute { attribute: usize },
    Interpolated,
}

/// Embedding of a prompt in the model's conditioning space.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditioningVector {
    pub data: Vec<f64>,
    pub source: ConditionSource,
}

impl ConditioningVector {
    pub fn dim(&self) -> usize {
        self.data.len()
    }
}

/// Concept (or metaclass) embedding plus attribute embedding.
pub fn encode_prompt(subject: Subject, attribute: usize, model: &DenoiserModel) -> Result<ConditioningVector> {
    let (head, source) = match subject {
        Subject::Concept(c) => {
            (model.embedding(Token::Concept(c))?, ConditionSource::ConceptAttribute { concept: c, attribute })
        }
        Subject::Metaclass => (model.embedding(Token::Metaclass)?, ConditionSource::MetaclassAttribute { attribute }),
    };
    let attr = model.embedding(Token::Attribute(attribute))?;
    let data = head.iter().zip(&attr).map(|(a, b)| a + b).collect();
    Ok(ConditioningVector { data, source })
}

pub fn encode_empty(model: &DenoiserModel) -> ConditioningVector {
    ConditioningVector { data: model.embedding(Token::Empty).expect("empty row exists"), source: ConditionSource::Empty }
}

/// `sum_i alpha_i h_i`. Accumulation starts from `alpha_0 h_0`, so weights
/// `[1, 0, ...]` reproduce `h_0` bit for bit.
pub fn interpolate(vectors: &[&ConditioningVector], weights: &TeiWeights) -> Result<ConditioningVector> {
    let alpha = weights.as_slice();
    if vectors.len() != alpha.len() {
        return Err(Error::DimensionMismatch { expected: alpha.len(), actual: vectors.len() });
    }
    let first = vectors.first().ok_or(Error::Empty("interpolation operands"))?;
    let dim = first.dim();
    let mut data: Vec<f64> = first.data.iter().map(|v| alpha[0] * v).collect();
    for (v, &a) in vectors.iter().zip(alpha).skip(1) {
        if v.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: v.dim() });
        }
        for (d, x) in data.iter_mut().zip(&v.data) {
            *d += a * x;
        }
    }
    Ok(ConditioningVector { data, source: ConditionSource::Interpolated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::tei_weights;
    use crate::toymodel::model::Architecture;

    fn model() -> DenoiserModel {
        DenoiserModel::new(Architecture { hidden_width: 8, hidden_layers: 1, time_dim: 4 }, 3, 2, 5).unwrap()
    }

    #[test]
    fn prompt_is_sum_of_rows() {
        let m = model();
        let h = encode_prompt(Subject::Concept(0), 1, &m).unwrap();
        let e = &m.params.embeddings;
        let expected: Vec<f64> = (&e.row(0) + &e.row(3 + 1)).to_vec();
        assert_eq!(h.data, expected);
        let meta = encode_prompt(Subject::Metaclass, 0, &m).unwrap();
        assert_eq!(meta.data, (&e.row(5) + &e.row(3)).to_vec());
    }

    #[test]
    fn empty_prompt_is_dedicated_row() {
        let m = model();
        let h = encode_empty(&m);
        assert_eq!(h.data, m.params.embeddings.row(6).to_vec());
        assert!(h.data.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn unknown_ids_are_rejected() {
        let m = model();
        assert!(encode_prompt(Subject::Concept(3), 0, &m).is_err());
        assert!(encode_prompt(Subject::Concept(0), 2, &m).is_err());
    }

    #[test]
    fn midpoint_interpolation() {
        let m = model();
        let a = encode_prompt(Subject::Concept(0), 0, &m).unwrap();
        let b = encode_prompt(Subject::Concept(1), 1, &m).unwrap();
        let mid = interpolate(&[&a, &b], &tei_weights(0.5, 2).unwrap()).unwrap();
        for ((x, y), z) in a.data.iter().zip(&b.data).zip(&mid.data) {
            assert!((0.5 * (x + y) - z).abs() < 1e-15);
        }
        let anchor_only = interpolate(&[&a, &b], &tei_weights(0.0, 2).unwrap()).unwrap();
        assert_eq!(anchor_only.data, a.data);
    }
}
