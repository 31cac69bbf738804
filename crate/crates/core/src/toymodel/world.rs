use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_text, write_atomic};

pub type Point = [f64; 2];

/// A 2-D mixture world: every (concept, attribute) pair that co-occurs is a
/// Gaussian mode at `concept_center + attribute_offset`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyWorldSpec {
    pub n_concepts: usize,
    pub n_attributes: usize,
    pub concept_centers: Vec<Point>,
    pub attribute_offsets: Vec<Point>,
    pub mode_std: f64,
    /// `cooccurrence[concept][attribute]`.
    pub cooccurrence: Vec<Vec<bool>>,
}

impl Default for ToyWorldSpec {
    /// Four concepts on the corners of a square, two vertical attribute
    /// offsets, and (concept 0, attribute 1) held out.
    fn default() -> Self {
        let mut cooccurrence = vec![vec![true; 2]; 4];
        cooccurrence[0][1] = false;
        Self {
            n_concepts: 4,
            n_attributes: 2,
            concept_centers: vec![[-4.0, 4.0], [4.0, 4.0], [-4.0, -4.0], [4.0, -4.0]],
            attribute_offsets: vec![[0.0, 1.5], [0.0, -1.5]],
            mode_std: 0.35,
            cooccurrence,
        }
    }
}

impl ToyWorldSpec {
    /// Full validation, including the requirement that some attribute is
    /// novel for some concept.
    pub fn validate(&self) -> Result<()> {
        self.validate_shape()?;
        if self.cooccurrence.iter().all(|row| row.iter().all(|&b| b)) {
            return Err(Error::Config("world: no held-out (concept, attribute) pair".into()));
        }
        Ok(())
    }

    /// Structural checks only (sizes, finiteness, every id has a partner).
    pub fn validate_shape(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("world: {m}")));
        if self.n_concepts < 2 || self.n_attributes < 2 {
            return bad("need at least 2 concepts and 2 attributes".into());
        }
        if self.concept_centers.len() != self.n_concepts {
            return bad(format!("{} centers for {} concepts", self.concept_centers.len(), self.n_concepts));
        }
        if self.attribute_offsets.len() != self.n_attributes {
            return bad(format!("{} offsets for {} attributes", self.attribute_offsets.len(), self.n_attributes));
        }
        if !(self.mode_std > 0.0) || !self.mode_std.is_finite() {
            return bad(format!("mode_std must be > 0, got {}", self.mode_std));
        }
        if self.concept_centers.iter().chain(&self.attribute_offsets).flatten().any(|v| !v.is_finite()) {
            return bad("non-finite center or offset".into());
        }
        if self.cooccurrence.len() != self.n_concepts || self.cooccurrence.iter().any(|r| r.len() != self.n_attributes) {
            return bad("cooccurrence must be n_concepts x n_attributes".into());
        }
        for c in 0..self.n_concepts {
            if !self.cooccurrence[c].iter().any(|&b| b) {
                return bad(format!("concept {c} has no attribute"));
            }
        }
        for a in 0..self.n_attributes {
            if !self.cooccurrence.iter().any(|row| row[a]) {
                return bad(format!("attribute {a} has no concept"));
            }
        }
        Ok(())
    }

    pub fn mode_center(&self, concept: usize, attribute: usize) -> Point {
        let c = self.concept_centers[concept];
        let o = self.attribute_offsets[attribute];
        [c[0] + o[0], c[1] + o[1]]
    }

    pub fn cooccurs(&self, concept: usize, attribute: usize) -> bool {
        self.cooccurrence[concept][attribute]
    }

    /// Within `k_sigma * mode_std` of the (concept, attribute) mode center.
    pub fn in_mode_region(&self, p: Point, concept: usize, attribute: usize, k_sigma: f64) -> bool {
        let m = self.mode_center(concept, attribute);
        let d2 = (p[0] - m[0]).powi(2) + (p[1] - m[1]).powi(2);
        d2 <= (k_sigma * self.mode_std).powi(2)
    }

    /// Attributes that never appear with `concept`.
    pub fn held_out_attributes(&self, concept: usize) -> Vec<usize> {
        (0..self.n_attributes).filter(|&a| !self.cooccurrence[concept][a]).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DataPoint {
    pub point: Point,
    pub concept: usize,
    pub attribute: usize,
}

pub fn generate_dataset(spec: &ToyWorldSpec, n_per_pair: usize, seed: u64) -> Result<Vec<DataPoint>> {
    spec.validate_shape()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spec.mode_std).expect("mode_std validated");
    let mut out = Vec::new();
    for concept in 0..spec.n_concepts {
        for attribute in 0..spec.n_attributes {
            if !spec.cooccurs(concept, attribute) {
                continue;
            }
            let m = spec.mode_center(concept, attribute);
            for _ in 0..n_per_pair {
                let point = [m[0] + noise.sample(&mut rng), m[1] + noise.sample(&mut rng)];
                out.push(DataPoint { point, concept, attribute });
            }
        }
    }
    Ok(out)
}

const DATASET_HEADER: &str = "x, y, concept_id, attribute_id";

pub fn write_dataset(path: &Path, data: &[DataPoint]) -> Result<()> {
    let mut s = String::with_capacity(data.len() * 48);
    s.push_str(DATASET_HEADER);
    s.push('\n');
    for d in data {
        let _ = writeln!(s, "{}, {}, {}, {}", d.point[0], d.point[1], d.concept, d.attribute);
    }
    write_atomic(path, s.as_bytes())
}

pub fn read_dataset(path: &Path) -> Result<Vec<DataPoint>> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(DATASET_HEADER) {
        return Err(Error::format(path, "missing dataset header"));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || Error::format(path, format!("line {}: expected `x, y, concept_id, attribute_id`", i + 2));
            if f.len() != 4 {
                return Err(bad());
            }
            Ok(DataPoint {
                point: [f[0].parse().map_err(|_| bad())?, f[1].parse().map_err(|_| bad())?],
                concept: f[2].parse().map_err(|_| bad())?,
                attribute: f[3].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_world_is_valid() {
        let w = ToyWorldSpec::default();
        w.validate().unwrap();
        assert_eq!(w.held_out_attributes(0), vec![1]);
        assert_eq!(w.mode_center(0, 1), [-4.0, 2.5]);
    }

    #[test]
    fn validation_catches_bad_worlds() {
        let mut w = ToyWorldSpec::default();
        w.cooccurrence[0][1] = true;
        assert!(w.validate().is_err(), "no novel attribute");
        let mut w = ToyWorldSpec::default();
        w.cooccurrence[2] = vec![false, false];
        assert!(w.validate().is_err(), "concept without attributes");
        let w = ToyWorldSpec { mode_std: 0.0, ..ToyWorldSpec::default() };
        assert!(w.validate().is_err());
    }

    #[test]
    fn dataset_counts() {
        let full = ToyWorldSpec { cooccurrence: vec![vec![true, true]; 4], ..ToyWorldSpec::default() };
        assert_eq!(generate_dataset(&full, 100, 1).unwrap().len(), 800);

        let mut held = full.clone();
        held.cooccurrence[3][0] = false;
        let data = generate_dataset(&held, 100, 1).unwrap();
        assert_eq!(data.len(), 700);
        assert!(!data.iter().any(|d| d.concept == 3 && d.attribute == 0));
    }

    #[test]
    fn held_out_region_is_empty() {
        let w = ToyWorldSpec::default();
        let data = generate_dataset(&w, 200, 7).unwrap();
        assert_eq!(data.iter().filter(|d| d.concept == 0 && d.attribute == 1).count(), 0);
        assert_eq!(data.iter().filter(|d| w.in_mode_region(d.point, 0, 1, 3.0)).count(), 0);
    }

    #[test]
    fn dataset_is_seed_deterministic() {
        let w = ToyWorldSpec::default();
        assert_eq!(generate_dataset(&w, 20, 3).unwrap(), generate_dataset(&w, 20, 3).unwrap());
        assert_ne!(generate_dataset(&w, 20, 3).unwrap(), generate_dataset(&w, 20, 4).unwrap());
    }

    #[test]
    fn mode_means_are_close_to_centers() {
        let w = ToyWorldSpec::default();
        let n = 1000;
        let data = generate_dataset(&w, n, 11).unwrap();
        let tol = 3.0 * w.mode_std / (n as f64).sqrt();
        for c in 0..w.n_concepts {
            for a in 0..w.n_attributes {
                if !w.cooccurs(c, a) {
                    continue;
                }
                let pts: Vec<_> = data.iter().filter(|d| d.concept == c && d.attribute == a).collect();
                let m = w.mode_center(c, a);
                for (axis, want) in m.iter().enumerate() {
                    let mean = pts.iter().map(|d| d.point[axis]).sum::<f64>() / pts.len() as f64;
                    assert!((mean - want).abs() < tol, "mode ({c},{a}) axis {axis}");
                }
            }
        }
    }

    #[test]
    fn dataset_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.txt");
        let data = generate_dataset(&ToyWorldSpec::default(), 5, 2).unwrap();
        write_dataset(&path, &data).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), data);
    }
}
