use super::world::{Point, ToyWorldSpec};

/// Soft concept/attribute identification of a point.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbedderScores {
    pub concept: Vec<f64>,
    pub attribute: Vec<f64>,
}

impl EmbedderScores {
    pub fn argmax_concept(&self) -> usize {
        argmax(&self.concept)
    }

    pub fn argmax_attribute(&self) -> usize {
        argmax(&self.attribute)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Analytic reference embedder: a joint softmax over every (concept,
/// attribute) mode with logits `-|p - m|^2 / (2 mode_std^2)`, marginalized
/// onto concepts and onto attributes. Every pair is scored, held out or not.
pub fn reference_embedder(point: Point, spec: &ToyWorldSpec) -> EmbedderScores {
    let inv = 1.0 / (2.0 * spec.mode_std * spec.mode_std);
    let mut logits = Vec::with_capacity(spec.n_concepts * spec.n_attributes);
    for c in 0..spec.n_concepts {
        for a in 0..spec.n_attributes {
            let m = spec.mode_center(c, a);
            let d2 = (point[0] - m[0]).powi(2) + (point[1] - m[1]).powi(2);
            logits.push(-d2 * inv);
        }
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut concept = vec![0.0; spec.n_concepts];
    let mut attribute = vec![0.0; spec.n_attributes];
    for c in 0..spec.n_concepts {
        for a in 0..spec.n_attributes {
            let p = weights[c * spec.n_attributes + a] / total;
            concept[c] += p;
            attribute[a] += p;
        }
    }
    // Summation order can push a marginal one ulp past 1.
    concept.iter_mut().chain(attribute.iter_mut()).for_each(|v| *v = v.min(1.0));
    EmbedderScores { concept, attribute }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_centers_are_recognized() {
        let w = ToyWorldSpec::default();
        for c in 0..w.n_concepts {
            for a in 0..w.n_attributes {
                let s = reference_embedder(w.mode_center(c, a), &w);
                assert_eq!(s.argmax_concept(), c);
                assert_eq!(s.argmax_attribute(), a);
            }
        }
    }

    #[test]
    fn equidistant_point_ties() {
        let w = ToyWorldSpec::default();
        // halfway between the two attribute modes of concept 0
        let s = reference_embedder([-4.0, 4.0], &w);
        assert!((s.attribute[0] - s.attribute[1]).abs() < 1e-12);
        // on the vertical symmetry axis between concepts 0 and 1
        let s = reference_embedder([0.0, 4.0], &w);
        assert!((s.concept[0] - s.concept[1]).abs() < 1e-12);
    }

    #[test]
    fn scores_are_distributions() {
        let w = ToyWorldSpec::default();
        let s = reference_embedder([1.3, -7.2], &w);
        assert!((s.concept.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((s.attribute.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn far_points_do_not_produce_nan() {
        let w = ToyWorldSpec::default();
        let s = reference_embedder([1e6, -1e6], &w);
        assert!(s.concept.iter().chain(&s.attribute).all(|v| v.is_finite()));
    }
}
