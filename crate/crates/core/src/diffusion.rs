//! DDPM noise schedule, forward noising, the training objective, and the
//! guided reverse sampler in both its plain-CFG and composed-residual forms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rso::{blendr_residual, default_index_set, ResidualBundle, RsoConfig};
use crate::schedule::{tei_weights, GuidanceSchedule, TeiSchedule};
use crate::toymodel::conditioning::{interpolate, ConditioningVector};
use crate::vecspace::{norm2, Residual};

/// A noise predictor `eps(x_t, t, h)`. Implementations must be pure.
pub trait Denoiser: Sync {
    fn data_dim(&self) -> usize;
    fn predict(&self, x: &[f64], step: usize, cond: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseScheduleConfig {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for NoiseScheduleConfig {
    fn default() -> Self {
        Self { steps: 100, beta_start: 1e-3, beta_end: 0.2 }
    }
}

impl NoiseScheduleConfig {
    pub fn build(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::linear(self.steps, self.beta_start, self.beta_end)
    }
}

fn lerp_endpoints(total_steps: usize, start: f64, end: f64) -> Result<Vec<f64>> {
    if total_steps == 0 {
        return Err(Error::Config("noise schedule needs at least one step".into()));
    }
    if !(0.0 < start && start <= end && end < 1.0) {
        return Err(Error::Config(format!("noise schedule needs 0 < beta_start <= beta_end < 1, got {start}..{end}")));
    }
    Ok((0..total_steps)
        .map(|i| if total_steps == 1 { start } else { start + (end - start) * i as f64 / (total_steps - 1) as f64 })
        .collect())
}

/// Per-step retention `noise_alpha[t-1] = 1 - beta_t` and cumulative products.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule {
    noise_alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    /// `beta_t` linear in `t` from `beta_start` to `beta_end`.
    pub fn linear(total_steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        let betas = lerp_endpoints(total_steps, beta_start, beta_end)?;
        Self::from_betas(&betas)
    }

    pub fn from_betas(betas: &[f64]) -> Result<Self> {
        if betas.is_empty() || betas.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
            return Err(Error::Config("every beta must lie in (0, 1)".into()));
        }
        let noise_alpha: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bar = Vec::with_capacity(noise_alpha.len());
        let mut acc = 1.0;
        for a in &noise_alpha {
            acc *= a;
            alpha_bar.push(acc);
        }
        Ok(Self { noise_alpha, alpha_bar })
    }

    pub fn total_steps(&self) -> usize {
        self.noise_alpha.len()
    }

    /// `alpha_t` for `t in 1..=T`.
    pub fn noise_alpha(&self, t: usize) -> f64 {
        self.noise_alpha[t - 1]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t - 1]
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.total_steps() {
            return Err(Error::OutOfRange(format!("timestep {t} not in 1..={}", self.total_steps())));
        }
        Ok(())
    }

    /// Normalized denoising progress; the first reverse step (`t = T`) is 0.
    pub fn progress(&self, t: usize) -> f64 {
        (self.total_steps() - t) as f64 / self.total_steps() as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatentState {
    pub x: Vec<f64>,
    pub step: usize,
}

impl LatentState {
    pub fn clean(x: Vec<f64>) -> Self {
        Self { x, step: 0 }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite())
    }
}

/// Closed form `x_t = sqrt(abar_t) x_0 + sqrt(1 - abar_t) eps`.
pub fn forward_noise(x0: &LatentState, t: usize, schedule: &NoiseSchedule, noise: &[f64]) -> Result<LatentState> {
    schedule.check_step(t)?;
    if noise.len() != x0.x.len() {
        return Err(Error::DimensionMismatch { expected: x0.x.len(), actual: noise.len() });
    }
    let ab = schedule.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(LatentState { x: x0.x.iter().zip(noise).map(|(x, e)| a * x + b * e).collect(), step: t })
}

/// `|eps - eps_theta(x_t, t, h)|^2` for one draw.
pub fn training_loss(
    model: &dyn Denoiser,
    x0: &LatentState,
    condition: &[f64],
    t: usize,
    noise: &[f64],
    schedule: &NoiseSchedule,
) -> Result<f64> {
    let xt = forward_noise(x0, t, schedule, noise)?;
    let pred = model.predict(&xt.x, t, condition)?;
    Ok(noise.iter().zip(&pred).map(|(e, p)| (e - p).powi(2)).sum())
}

/// `eps_uncond + w (eps_cond - eps_uncond)`.
pub fn cfg_output(eps_uncond: &Residual, eps_cond: &Residual, w_cfg: f64) -> Result<Residual> {
    let r_cfg = eps_cond.checked_sub(eps_uncond)?;
    eps_uncond.add_scaled(w_cfg, &r_cfg)
}

/// Ancestral DDPM update from the guided noise estimate. `noise` is ignored at
/// the final step (`t = 1`).
pub fn posterior_step(x_t: &LatentState, eps_hat: &Residual, schedule: &NoiseSchedule, noise: &[f64]) -> Result<LatentState> {
    let t = x_t.step;
    schedule.check_step(t)?;
    let alpha = schedule.noise_alpha(t);
    let coef = (1.0 - alpha) / (1.0 - schedule.alpha_bar(t)).sqrt();
    let inv_sqrt_alpha = 1.0 / alpha.sqrt();
    let sigma = if t > 1 { (1.0 - alpha).sqrt() } else { 0.0 };
    let x: Vec<f64> = x_t
        .x
        .iter()
        .zip(eps_hat.as_slice())
        .enumerate()
        .map(|(i, (x, e))| {
            let mean = inv_sqrt_alpha * (x - coef * e);
            if t > 1 {
                mean + sigma * noise[i]
            } else {
                mean
            }
        })
        .collect();
    Ok(LatentState { x, step: t - 1 })
}

/// Conditioning for one generation: the empty prompt and the ordered prompt
/// list (anchor, donor, context priors...).
#[derive(Clone, Debug, PartialEq)]
pub struct PromptConditioning {
    pub empty: ConditioningVector,
    pub prompts: Vec<ConditioningVector>,
}

impl PromptConditioning {
    pub fn validate(&self) -> Result<()> {
        if self.prompts.len() < 2 {
            return Err(Error::Config("need at least an anchor and a donor prompt".into()));
        }
        let dim = self.empty.dim();
        if let Some(p) = self.prompts.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: p.dim() });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub tei: TeiSchedule,
    pub rso: RsoConfig,
}

impl SamplerConfig {
    /// No donor ramp, no residual composition: plain CFG on the anchor.
    pub fn baseline(guidance: GuidanceSchedule) -> Self {
        Self { tei: TeiSchedule::disabled(), rso: RsoConfig { guidance, ..RsoConfig::disabled() } }
    }
}

/// Per-step diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: usize,
    pub t_progress: f64,
    pub gamma: f64,
    pub w_cfg: f64,
    pub beta_union: f64,
    pub beta_intersection: f64,
    pub r_cfg_norm: f64,
    pub union_norm: Option<f64>,
    pub intersection_norm: Option<f64>,
    pub blendr_pre_clamp_norm: f64,
    pub blendr_post_clamp_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub state: LatentState,
    pub eps_hat: Residual,
    pub trace: StepTrace,
}

fn eval(model: &dyn Denoiser, x: &LatentState, cond: &[f64]) -> Result<Residual> {
    let out = model.predict(&x.x, x.step, cond)?;
    Residual::new(out).map_err(|_| Error::Diverged { step: x.step })
}

/// One reverse step: interpolate the anchor/donor embeddings, evaluate the
/// denoiser on the empty, mixed and per-prompt conditions, compose the
/// steering residual, assemble the guided estimate, and take the DDPM update.
pub fn blendr_step(
    x_t: &LatentState,
    prompts: &PromptConditioning,
    config: &SamplerConfig,
    schedule: &NoiseSchedule,
    model: &dyn Denoiser,
    noise: &[f64],
) -> Result<StepOutput> {
    if x_t.step == 0 {
        return Err(Error::OutOfRange("cannot denoise past step 0".into()));
    }
    schedule.check_step(x_t.step)?;
    prompts.validate()?;
    let n = prompts.prompts.len();
    let t_progress = schedule.progress(x_t.step);

    let gamma = config.tei.gamma(t_progress)?;
    let alpha = tei_weights(gamma, n)?;
    let refs: Vec<&ConditioningVector> = prompts.prompts.iter().collect();
    let h_mix = interpolate(&refs, &alpha)?;

    let eps_uncond = eval(model, x_t, &prompts.empty.data)?;
    let eps_mix = eval(model, x_t, &h_mix.data)?;
    let r_cfg = eps_mix.checked_sub(&eps_uncond)?;

    // The per-prompt evaluations only matter while a residual weight is live.
    let rso_live = config.rso.operation.uses_union() && crate::schedule::beta_schedule(config.rso.beta_union_0, t_progress)? > 0.0
        || config.rso.operation.uses_intersection()
            && crate::schedule::beta_schedule(config.rso.beta_intersection_0, t_progress)? > 0.0;
    let per_prompt = if rso_live {
        prompts
            .prompts
            .iter()
            .map(|h| eval(model, x_t, &h.data)?.checked_sub(&eps_mix))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let index_set = default_index_set(n, config.rso.include_anchor);
    let bundle = ResidualBundle {
        r_cfg: r_cfg.clone(),
        per_prompt,
        union_set: if rso_live { index_set.clone() } else { Vec::new() },
        intersection_set: if rso_live { index_set } else { Vec::new() },
    };
    let composition = blendr_residual(&bundle, &config.rso, t_progress)?;

    let w_cfg = config.rso.guidance.at(t_progress)?;
    let mut eps_hat = eps_uncond.add_scaled(w_cfg, &r_cfg)?;
    if composition.beta_union != 0.0 || composition.beta_intersection != 0.0 {
        eps_hat = eps_hat.checked_add(&composition.residual)?;
    }

    let state = posterior_step(x_t, &eps_hat, schedule, noise)?;
    if !state.is_finite() {
        return Err(Error::Diverged { step: x_t.step });
    }
    let trace = StepTrace {
        step: x_t.step,
        t_progress,
        gamma,
        w_cfg,
        beta_union: composition.beta_union,
        beta_intersection: composition.beta_intersection,
        r_cfg_norm: norm2(&r_cfg)?,
        union_norm: composition.union_norm,
        intersection_norm: composition.intersection_norm,
        blendr_pre_clamp_norm: composition.pre_clamp_norm,
        blendr_post_clamp_norm: composition.post_clamp_norm,
    };
    Ok(StepOutput { state, eps_hat, trace })
}

/// Plain classifier-free-guided step on the anchor prompt.
pub fn cfg_step(
    x_t: &LatentState,
    prompts: &PromptConditioning,
    guidance: &GuidanceSchedule,
    schedule: &NoiseSchedule,
    model: &dyn Denoiser,
    noise: &[f64],
) -> Result<LatentState> {
    schedule.check_step(x_t.step)?;
    let t_progress = schedule.progress(x_t.step);
    let eps_uncond = eval(model, x_t, &prompts.empty.data)?;
    let eps_cond = eval(model, x_t, &prompts.prompts[0].data)?;
    let eps_hat = cfg_output(&eps_uncond, &eps_cond, guidance.at(t_progress)?)?;
    let state = posterior_step(x_t, &eps_hat, schedule, noise)?;
    if !state.is_finite() {
        return Err(Error::Diverged { step: x_t.step });
    }
    Ok(state)
}

/// Per-sample seed derived from a run seed and sample index (splitmix64).
pub fn sample_seed(run_seed: u64, index: u64) -> u64 {
    let mut z = run_seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Runs `T` reverse steps from seeded Gaussian noise. The random stream is
/// the same for every step function, so trajectories pair across methods.
fn run_trajectory<F>(dim: usize, schedule: &NoiseSchedule, seed: u64, mut step_fn: F) -> Result<LatentState>
where
    F: FnMut(&LatentState, &[f64]) -> Result<LatentState>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = LatentState { x: gaussian(&mut rng, dim), step: schedule.total_steps() };
    let zeros = vec![0.0; dim];
    while state.step > 0 {
        let noise = if state.step > 1 { gaussian(&mut rng, dim) } else { zeros.clone() };
        state = step_fn(&state, &noise)?;
    }
    Ok(state)
}

/// One trajectory with the composed sampler. Step traces are appended to
/// `trace` when given.
pub fn sample_one(
    prompts: &PromptConditioning,
    config: &SamplerConfig,
    schedule: &NoiseSchedule,
    model: &dyn Denoiser,
    seed: u64,
    mut trace: Option<&mut Vec<StepTrace>>,
) -> Result<LatentState> {
    run_trajectory(model.data_dim(), schedule, seed, |x, noise| {
        let out = blendr_step(x, prompts, config, schedule, model, noise)?;
        if let Some(t) = trace.as_deref_mut() {
            t.push(out.trace);
        }
        Ok(out.state)
    })
}

/// `count` trajectories with per-sample seeds `sample_seed(seed, i)`.
pub fn sample(
    prompts: &PromptConditioning,
    config: &SamplerConfig,
    schedule: &NoiseSchedule,
    model: &dyn Denoiser,
    seed: u64,
    count: usize,
) -> Result<Vec<LatentState>> {
    if count == 0 {
        return Err(Error::Empty("sample count"));
    }
    (0..count as u64).map(|i| sample_one(prompts, config, schedule, model, sample_seed(seed, i), None)).collect()
}

/// Plain CFG DDPM sampler on the anchor prompt.
pub fn sample_cfg_one(
    prompts: &PromptConditioning,
    guidance: &GuidanceSchedule,
    schedule: &NoiseSchedule,
    model: &dyn Denoiser,
    seed: u64,
) -> Result<LatentState> {
    run_trajectory(model.data_dim(), schedule, seed, |x, noise| cfg_step(x, prompts, guidance, schedule, model, noise))
}
