//! Small conditional noise predictor: an MLP on `[x_t, time features]` with
//! the conditioning vector added to the first hidden pre-activation.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diffusion::Denoiser;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub time_dim: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self { hidden_width: 128, hidden_layers: 3, time_dim: 32 }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_width == 0 || self.hidden_layers == 0 {
            return Err(Error::Config("model: hidden_width and hidden_layers must be positive".into()));
        }
        if self.time_dim == 0 || !self.time_dim.is_multiple_of(2) {
            return Err(Error::Config(format!("model: time_dim must be positive and even, got {}", self.time_dim)));
        }
        Ok(())
    }
}

pub const DATA_DIM: usize = 2;

/// Which embedding-table row a token refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Token {
    Concept(usize),
    Attribute(usize),
    Metaclass,
    Empty,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    /// `in x out`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    fn random(fan_in: usize, fan_out: usize, scale: f64, rng: &mut ChaCha8Rng) -> Self {
        let std = scale / (fan_in as f64).sqrt();
        let w = Array2::from_shape_simple_fn((fan_in, fan_out), || { let z: f64 = StandardNormal.sample(rng); std * z });
        Self { w, b: Array1::zeros(fan_out) }
    }

    fn zeros_like(&self) -> Self {
        Self { w: Array2::zeros(self.w.raw_dim()), b: Array1::zeros(self.b.raw_dim()) }
    }
}

/// All trainable tensors. Also used for gradients and optimizer moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub layers: Vec<Linear>,
    /// One row per concept, per attribute, then metaclass, then empty.
    pub embeddings: Array2<f64>,
}

impl Params {
    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(Linear::zeros_like).collect(),
            embeddings: Array2::zeros(self.embeddings.raw_dim()),
        }
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(2 * self.layers.len() + 1);
        for i in 0..self.layers.len() {
            names.push(format!("layer{i}.w"));
            names.push(format!("layer{i}.b"));
        }
        names.push("embeddings".into());
        names
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(2 * self.layers.len() + 1);
        for l in &self.layers {
            out.push(l.w.as_slice().expect("standard layout"));
            out.push(l.b.as_slice().expect("standard layout"));
        }
        out.push(self.embeddings.as_slice().expect("standard layout"));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(2 * self.layers.len() + 1);
        for l in &mut self.layers {
            out.push(l.w.as_slice_mut().expect("standard layout"));
            out.push(l.b.as_slice_mut().expect("standard layout"));
        }
        out.push(self.embeddings.as_slice_mut().expect("standard layout"));
        out
    }

    pub fn shapes(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.push(l.w.shape().to_vec());
            out.push(l.b.shape().to_vec());
        }
        out.push(self.embeddings.shape().to_vec());
        out
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Conditioning as a weighted sum of embedding rows.
pub type CondMix = Vec<(usize, f64)>;

#[derive(Clone, Debug, PartialEq)]
pub struct DenoiserModel {
    pub arch: Architecture,
    pub n_concepts: usize,
    pub n_attributes: usize,
    pub params: Params,
}

/// Intermediate activations of a batched forward pass.
pub struct ForwardCache {
    /// Input to each layer (`inputs[0]` is `[x, time features]`).
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

pub fn time_features(step: usize, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = vec![0.0; dim];
    for k in 0..half {
        let freq = (-(10_000f64.ln()) * k as f64 / half as f64).exp();
        let angle = step as f64 * freq;
        out[k] = angle.sin();
        out[half + k] = angle.cos();
    }
    out
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn silu(z: f64) -> f64 {
    z * sigmoid(z)
}

fn silu_grad(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 + z * (1.0 - s))
}

impl DenoiserModel {
    pub fn new(arch: Architecture, n_concepts: usize, n_attributes: usize, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let width = arch.hidden_width;
        let mut layers = Vec::with_capacity(arch.hidden_layers + 1);
        layers.push(Linear::random(DATA_DIM + arch.time_dim, width, 1.0, &mut rng));
        for _ in 1..arch.hidden_layers {
            layers.push(Linear::random(width, width, 1.0, &mut rng));
        }
        layers.push(Linear::random(width, DATA_DIM, 0.01, &mut rng));
        let rows = n_concepts + n_attributes + 2;
        let embeddings = Array2::from_shape_simple_fn((rows, width), || -> f64 { StandardNormal.sample(&mut rng) });
        Ok(Self { arch, n_concepts, n_attributes, params: Params { layers, embeddings } })
    }

    pub fn cond_dim(&self) -> usize {
        self.arch.hidden_width
    }

    pub fn token_row(&self, token: Token) -> Result<usize> {
        match token {
            Token::Concept(c) if c < self.n_concepts => Ok(c),
            Token::Concept(c) => Err(Error::UnknownId { kind: "concept", id: c }),
            Token::Attribute(a) if a < self.n_attributes => Ok(self.n_concepts + a),
            Token::Attribute(a) => Err(Error::UnknownId { kind: "attribute", id: a }),
            Token::Metaclass => Ok(self.n_concepts + self.n_attributes),
            Token::Empty => Ok(self.n_concepts + self.n_attributes + 1),
        }
    }

    pub fn embedding(&self, token: Token) -> Result<Vec<f64>> {
        Ok(self.params.embeddings.row(self.token_row(token)?).to_vec())
    }

    fn cond_matrix(&self, conds: &[CondMix]) -> Array2<f64> {
        let mut m = Array2::zeros((conds.len(), self.cond_dim()));
        for (i, mix) in conds.iter().enumerate() {
            let mut row = m.row_mut(i);
            for &(r, c) in mix {
                row.scaled_add(c, &self.params.embeddings.row(r));
            }
        }
        m
    }

    fn input_matrix(&self, x: ArrayView2<f64>, steps: &[usize]) -> Array2<f64> {
        let n = x.nrows();
        let mut input = Array2::zeros((n, DATA_DIM + self.arch.time_dim));
        input.slice_mut(s![.., ..DATA_DIM]).assign(&x);
        for (i, &t) in steps.iter().enumerate() {
            let tf = time_features(t, self.arch.time_dim);
            for (j, v) in tf.into_iter().enumerate() {
                input[[i, DATA_DIM + j]] = v;
            }
        }
        input
    }

    /// Batched forward pass with raw conditioning rows (`n x cond_dim`).
    pub fn forward_with_cond(&self, x: ArrayView2<f64>, steps: &[usize], cond: ArrayView2<f64>) -> ForwardCache {
        let mut inputs = Vec::with_capacity(self.params.layers.len());
        let mut pre = Vec::with_capacity(self.arch.hidden_layers);
        let mut h = self.input_matrix(x, steps);
        let last = self.params.layers.len() - 1;
        for (i, layer) in self.params.layers.iter().enumerate() {
            let mut z = h.dot(&layer.w) + &layer.b;
            if i == 0 {
                z += &cond;
            }
            inputs.push(h);
            if i == last {
                return ForwardCache { inputs, pre, output: z };
            }
            h = z.mapv(silu);
            pre.push(z);
        }
        unreachable!("network has an output layer")
    }

    pub fn forward(&self, x: ArrayView2<f64>, steps: &[usize], conds: &[CondMix]) -> ForwardCache {
        let cond = self.cond_matrix(conds);
        self.forward_with_cond(x, steps, cond.view())
    }

    /// Backpropagates `d_out` (gradient of the loss w.r.t. the output).
    pub fn backward(&self, cache: &ForwardCache, conds: &[CondMix], d_out: &Array2<f64>) -> Params {
        let mut grads = self.params.zeros_like();
        let last = self.params.layers.len() - 1;
        let mut g = d_out.clone();
        for i in (0..=last).rev() {
            if i < last {
                let z = &cache.pre[i];
                g.zip_mut_with(z, |gv, &zv| *gv *= silu_grad(zv));
            }
            grads.layers[i].w = cache.inputs[i].t().dot(&g);
            grads.layers[i].b = g.sum_axis(Axis(0));
            if i > 0 {
                g = g.dot(&self.params.layers[i].w.t());
            }
        }
        // `g` now holds the gradient w.r.t. the first pre-activation, which
        // is also the gradient w.r.t. the conditioning row.
        for (n, mix) in conds.iter().enumerate() {
            for &(r, c) in mix {
                grads.embeddings.row_mut(r).scaled_add(c, &g.row(n));
            }
        }
        grads
    }

    /// Single-point prediction.
    pub fn predict_point(&self, x: &[f64], step: usize, cond: &[f64]) -> Result<Vec<f64>> {
        if x.len() != DATA_DIM {
            return Err(Error::DimensionMismatch { expected: DATA_DIM, actual: x.len() });
        }
        if cond.len() != self.cond_dim() {
            return Err(Error::DimensionMismatch { expected: self.cond_dim(), actual: cond.len() });
        }
        let xv = ArrayView2::from_shape((1, DATA_DIM), x).expect("shape checked");
        let cv = ArrayView2::from_shape((1, cond.len()), cond).expect("shape checked");
        let out = self.forward_with_cond(xv, &[step], cv).output;
        Ok(out.row(0).to_vec())
    }
}

impl Denoiser for DenoiserModel {
    fn data_dim(&self) -> usize {
        DATA_DIM
    }

    fn predict(&self, x: &[f64], step: usize, cond: &[f64]) -> Result<Vec<f64>> {
        self.predict_point(x, step, cond)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_table_layout() {
        let m = DenoiserModel::new(Architecture::default(), 4, 2, 0).unwrap();
        assert_eq!(m.params.embeddings.nrows(), 4 + 2 + 2);
        assert_eq!(m.token_row(Token::Concept(3)).unwrap(), 3);
        assert_eq!(m.token_row(Token::Attribute(1)).unwrap(), 5);
        assert_eq!(m.token_row(Token::Metaclass).unwrap(), 6);
        assert_eq!(m.token_row(Token::Empty).unwrap(), 7);
        assert!(m.token_row(Token::Concept(4)).is_err());
        assert!(m.token_row(Token::Attribute(2)).is_err());
        assert!(m.params.all_finite());
    }

    #[test]
    fn batched_and_single_predictions_agree() {
        let m = DenoiserModel::new(Architecture { hidden_width: 16, hidden_layers: 2, time_dim: 8 }, 2, 2, 1).unwrap();
        let x = Array2::from_shape_vec((2, 2), vec![0.5, -1.0, 2.0, 0.1]).unwrap();
        let conds = vec![vec![(0, 1.0), (2, 1.0)], vec![(5, 1.0)]];
        let batch = m.forward(x.view(), &[3, 7], &conds).output;
        let c0: Vec<f64> = (&m.params.embeddings.row(0) + &m.params.embeddings.row(2)).to_vec();
        let single = m.predict_point(&[0.5, -1.0], 3, &c0).unwrap();
        for (a, b) in batch.row(0).iter().zip(&single) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn time_features_are_bounded() {
        let f = time_features(57, 32);
        assert_eq!(f.len(), 32);
        assert!(f.iter().all(|v| v.abs() <= 1.0));
        assert_eq!(time_features(0, 4), vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn rejects_bad_architecture() {
        assert!(Architecture { hidden_width: 8, hidden_layers: 1, time_dim: 3 }.validate().is_err());
        assert!(Architecture { hidden_width: 0, hidden_layers: 1, time_dim: 4 }.validate().is_err());
    }
}
