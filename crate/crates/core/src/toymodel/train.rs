//! Minibatch training of the toy denoiser on the noise-prediction objective,
//! with conditioning dropout so the same network serves as the unconditional
//! branch.

use log::info;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::model::{CondMix, DenoiserModel, Params, Token, DATA_DIM};
use super::world::DataPoint;
use crate::diffusion::NoiseSchedule;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Probability of replacing the prompt by the empty prompt.
    pub cond_dropout: f64,
    /// Probability of replacing the concept token by the metaclass token.
    pub metaclass_prob: f64,

    pub n_per_pair: usize,
    /// Exponential smoothing factor of the reported loss curve.
    pub loss_smoothing: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 20_000,
            batch_size: 256,
            learning_rate: 1e-3,
            cond_dropout: 0.1,
            metaclass_prob: 0.2,
            n_per_pair: 1000,
            loss_smoothing: 0.99,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.n_per_pair == 0 {
            return Err(Error::Config("train: batch_size and n_per_pair must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("train: learning_rate must be > 0".into()));
        }
        let p = self.cond_dropout + self.metaclass_prob;
        if self.cond_dropout < 0.0 || self.metaclass_prob < 0.0 || p > 1.0 {
            return Err(Error::Config("train: cond_dropout + metaclass_prob must lie in [0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.loss_smoothing) {
            return Err(Error::Config("train: loss_smoothing must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// One frozen minibatch: everything random about a training step.
#[derive(Clone, Debug)]
pub struct Minibatch {
    pub x_t: Array2<f64>,
    pub steps: Vec<usize>,
    pub noise: Array2<f64>,
    pub conds: Vec<CondMix>,
}

pub fn draw_minibatch(
    model: &DenoiserModel,
    data: &[DataPoint],
    schedule: &NoiseSchedule,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Minibatch> {
    let b = config.batch_size;
    let mut x_t = Array2::zeros((b, DATA_DIM));
    let mut noise = Array2::zeros((b, DATA_DIM));
    let mut steps = Vec::with_capacity(b);
    let mut conds = Vec::with_capacity(b);
    for i in 0..b {
        let d = &data[rng.random_range(0..data.len())];
        let t = rng.random_range(1..=schedule.total_steps());
        let ab = schedule.alpha_bar(t);
        for j in 0..DATA_DIM {
            let e: f64 = StandardNormal.sample(rng);
            noise[[i, j]] = e;
            x_t[[i, j]] = ab.sqrt() * d.point[j] + (1.0 - ab).sqrt() * e;
        }
        steps.push(t);
        let u: f64 = rng.random();
        let mix = if u < config.cond_dropout {
            vec![(model.token_row(Token::Empty)?, 1.0)]
        } else if u < config.cond_dropout + config.metaclass_prob {
            vec![(model.token_row(Token::Metaclass)?, 1.0), (model.token_row(Token::Attribute(d.attribute))?, 1.0)]
        } else {
            vec![
                (model.token_row(Token::Concept(d.concept))?, 1.0),
                (model.token_row(Token::Attribute(d.attribute))?, 1.0),
            ]
        };
        conds.push(mix);
    }
    Ok(Minibatch { x_t, steps, noise, conds })
}

/// Mean over the batch of `|eps - eps_theta|^2`, and its parameter gradient.
pub fn loss_and_grad(model: &DenoiserModel, batch: &Minibatch) -> (f64, Params) {
    let cache = model.forward(batch.x_t.view(), &batch.steps, &batch.conds);
    let n = batch.steps.len() as f64;
    let diff = &cache.output - &batch.noise;
    let loss = diff.iter().map(|v| v * v).sum::<f64>() / n;
    let d_out = diff * (2.0 / n);
    let grads = model.backward(&cache, &batch.conds, &d_out);
    (loss, grads)
}

pub fn batch_loss(model: &DenoiserModel, batch: &Minibatch) -> f64 {
    let out = model.forward(batch.x_t.view(), &batch.steps, &batch.conds).output;
    let n = batch.steps.len() as f64;
    (&out - &batch.noise).iter().map(|v| v * v).sum::<f64>() / n
}

struct Adam {
    m: Params,
    v: Params,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(params: &Params, lr: f64) -> Self {
        Self { m: params.zeros_like(), v: params.zeros_like(), t: 0, lr }
    }

    fn step(&mut self, params: &mut Params, grads: &Params) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        let lr = self.lr;
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            for i in 0..p.len() {
                m[i] = Self::BETA1 * m[i] + (1.0 - Self::BETA1) * g[i];
                v[i] = Self::BETA2 * v[i] + (1.0 - Self::BETA2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + Self::EPS);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Loss of the untrained model, averaged over a few held batches.
    pub initial_loss: f64,
    /// `(step, smoothed loss)` recorded periodically.
    pub loss_curve: Vec<(usize, f64)>,
    pub final_smoothed_loss: f64,
}

impl TrainReport {
    pub fn improvement_ratio(&self) -> f64 {
        self.initial_loss / self.final_smoothed_loss
    }
}

const CURVE_EVERY: usize = 100;
const BASELINE_BATCHES: usize = 8;

/// Adam on the minibatch objective. Deterministic given `seed`.
pub fn train(
    model: &mut DenoiserModel,
    data: &[DataPoint],
    schedule: &NoiseSchedule,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainReport> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_BA5E);
    let mut initial_loss = 0.0;
    for _ in 0..BASELINE_BATCHES {
        let b = draw_minibatch(model, data, schedule, config, &mut probe_rng)?;
        initial_loss += batch_loss(model, &b) / BASELINE_BATCHES as f64;
    }

    let mut adam = Adam::new(&model.params, config.learning_rate);
    let mut smoothed = initial_loss;
    let mut loss_curve = vec![(0, initial_loss)];
    for step in 1..=config.steps {
        let batch = draw_minibatch(model, data, schedule, config, &mut rng)?;
        let (loss, grads) = loss_and_grad(model, &batch);
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { step, loss });
        }
        adam.step(&mut model.params, &grads);
        smoothed = config.loss_smoothing * smoothed + (1.0 - config.loss_smoothing) * loss;
        if step % CURVE_EVERY == 0 || step == config.steps {
            loss_curve.push((step, smoothed));
        }
        if step % 2000 == 0 {
            info!("train step {step}: smoothed loss {smoothed:.4}");
        }
    }
    if !model.params.all_finite() {
        return Err(Error::TrainingDiverged { step: config.steps, loss: f64::NAN });
    }
    Ok(TrainReport { initial_loss, loss_curve, final_smoothed_loss: smoothed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toymodel::model::Architecture;
    use crate::toymodel::world::{generate_dataset, ToyWorldSpec};

    fn small() -> (DenoiserModel, Vec<DataPoint>, NoiseSchedule) {
        let arch = Architecture { hidden_width: 16, hidden_layers: 2, time_dim: 8 };
        let model = DenoiserModel::new(arch, 4, 2, 3).unwrap();
        let data = generate_dataset(&ToyWorldSpec::default(), 20, 1).unwrap();
        (model, data, NoiseSchedule::linear(100, 1e-3, 0.2).unwrap())
    }

    #[test]
    fn zero_steps_leave_parameters_unchanged() {
        let (mut model, data, sched) = small();
        let before = model.clone();
        let cfg = TrainConfig { steps: 0, ..TrainConfig::default() };
        train(&mut model, &data, &sched, &cfg, 1).unwrap();
        assert_eq!(model, before);
    }

    #[test]
    fn untrained_loss_is_about_data_dim() {
        let (model, data, sched) = small();
        let cfg = TrainConfig { batch_size: 4096, ..TrainConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = draw_minibatch(&model, &data, &sched, &cfg, &mut rng).unwrap();
        let loss = batch_loss(&model, &b);
        assert!((loss - 2.0).abs() < 0.15, "loss {loss}");
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let (model, data, sched) = small();
        let cfg = TrainConfig { steps: 300, batch_size: 64, ..TrainConfig::default() };
        let mut a = model.clone();
        let mut b = model.clone();
        let ra = train(&mut a, &data, &sched, &cfg, 7).unwrap();
        let rb = train(&mut b, &data, &sched, &cfg, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert!(ra.final_smoothed_loss < ra.initial_loss);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let (mut model, _, sched) = small();
        assert!(train(&mut model, &[], &sched, &TrainConfig::default(), 0).is_err());
    }
}
