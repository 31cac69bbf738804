//! Time-varying scalar schedules over normalized denoising progress
//! `t in [0, 1]`, where `t = 0` is the first (noisiest) step.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cut time of the residual-weight ramps.
pub const BETA_CUT_TIME: f64 = 0.8;

/// Cosine decay from `start_value` to `end_value`, reached at `cut_time` and
/// held afterwards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosineRampSpec {
    pub start_value: f64,
    pub end_value: f64,
    pub cut_time: f64,
}

impl CosineRampSpec {
    pub fn new(start_value: f64, end_value: f64, cut_time: f64) -> Result<Self> {
        let spec = Self { start_value, end_value, cut_time };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cut_time > 0.0 && self.cut_time <= 1.0) {
            return Err(Error::OutOfRange(format!("cut_time {} not in (0, 1]", self.cut_time)));
        }
        for v in [self.start_value, self.end_value] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::OutOfRange(format!("ramp value {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

fn check_progress(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange(format!("t_progress {t} not in [0, 1]")));
    }
    Ok(())
}

pub fn cosine_ramp(spec: &CosineRampSpec, t_progress: f64) -> Result<f64> {
    check_progress(t_progress)?;
    if t_progress >= spec.cut_time {
        return Ok(spec.end_value);
    }
    let shape = 0.5 * (1.0 + (PI * (t_progress / spec.cut_time)).cos());
    Ok(spec.end_value + (spec.start_value - spec.end_value) * shape)
}

/// Convex interpolation weights over the prompt list.
#[derive(Clone, Debug, PartialEq)]
pub struct TeiWeights(Vec<f64>);

impl TeiWeights {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Anchor gets `1 - gamma`, donor gets `gamma`, everything else zero.
pub fn tei_weights(gamma: f64, n_prompts: usize) -> Result<TeiWeights> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::OutOfRange(format!("gamma {gamma} not in [0, 1]")));
    }
    if n_prompts < 2 {
        return Err(Error::OutOfRange(format!("need at least 2 prompts, got {n_prompts}")));
    }
    let mut alpha = vec![0.0; n_prompts];
    alpha[0] = 1.0 - gamma;
    alpha[1] = gamma;
    Ok(TeiWeights(alpha))
}

pub fn beta_schedule(beta0: f64, t_progress: f64) -> Result<f64> {
    if !beta0.is_finite() || beta0 < 0.0 {
        return Err(Error::OutOfRange(format!("beta0 {beta0} must be finite and >= 0")));
    }
    cosine_ramp(&CosineRampSpec { start_value: beta0, end_value: 0.0, cut_time: BETA_CUT_TIME }, t_progress)
}

/// Donor ramp `gamma(t)`; disabled means `gamma == 0` everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeiSchedule {
    pub enabled: bool,
    pub t_star: f64,
    pub donor_start: f64,
}

impl Default for TeiSchedule {
    fn default() -> Self {
        Self { enabled: true, t_star: 0.2, donor_start: 1.0 }
    }
}

impl TeiSchedule {
    pub fn disabled() -> Self {
        Self { enabled: false, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.ramp().validate()?;
        if self.donor_start > 1.0 {
            return Err(Error::OutOfRange(format!("donor_start {} exceeds 1", self.donor_start)));
        }
        Ok(())
    }

    fn ramp(&self) -> CosineRampSpec {
        CosineRampSpec { start_value: self.donor_start, end_value: 0.0, cut_time: self.t_star }
    }

    pub fn gamma(&self, t_progress: f64) -> Result<f64> {
        check_progress(t_progress)?;
        if !self.enabled {
            return Ok(0.0);
        }
        cosine_ramp(&self.ramp(), t_progress)
    }
}

/// Guidance scale `w_cfg(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GuidanceSchedule {
    Constant(f64),
    Ramp(CosineRampSpec),
}

impl Default for GuidanceSchedule {
    fn default() -> Self {
        GuidanceSchedule::Constant(4.0)
    }
}

impl GuidanceSchedule {
    pub fn initial(&self) -> f64 {
        match self {
            GuidanceSchedule::Constant(w) => *w,
            GuidanceSchedule::Ramp(spec) => spec.start_value,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            GuidanceSchedule::Constant(w) if !w.is_finite() || *w < 0.0 => {
                Err(Error::OutOfRange(format!("w_cfg {w} must be finite and >= 0")))
            }
            GuidanceSchedule::Constant(_) => Ok(()),
            GuidanceSchedule::Ramp(spec) => spec.validate(),
        }
    }

    pub fn at(&self, t_progress: f64) -> Result<f64> {
        match self {
            GuidanceSchedule::Constant(w) => {
                check_progress(t_progress)?;
                Ok(*w)
            }
            GuidanceSchedule::Ramp(spec) => cosine_ramp(spec, t_progress),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn donor_ramp() -> CosineRampSpec {
        CosineRampSpec::new(1.0, 0.0, 0.2).unwrap()
    }

    #[test]
    fn cosine_ramp_examples() {
        let s = donor_ramp();
        assert_eq!(cosine_ramp(&s, 0.0).unwrap(), 1.0);
        assert_eq!(cosine_ramp(&s, 0.1).unwrap(), 0.5);
        assert_eq!(cosine_ramp(&s, 0.2).unwrap(), 0.0);
        assert_eq!(cosine_ramp(&s, 0.9).unwrap(), 0.0);
    }

    #[test]
    fn cosine_ramp_rejects_out_of_range_progress() {
        let s = donor_ramp();
        assert!(cosine_ramp(&s, -0.01).is_err());
        assert!(cosine_ramp(&s, 1.01).is_err());
        assert!(cosine_ramp(&s, f64::NAN).is_err());
    }

    #[test]
    fn ramp_spec_validation() {
        assert!(CosineRampSpec::new(1.0, 0.0, 0.0).is_err());
        assert!(CosineRampSpec::new(1.0, 0.0, 1.5).is_err());
        assert!(CosineRampSpec::new(-1.0, 0.0, 0.5).is_err());
        assert!(CosineRampSpec::new(1.0, 0.0, 1.0).is_ok());
    }

    #[test]
    fn tei_weight_examples() {
        assert_eq!(tei_weights(1.0, 3).unwrap().as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(tei_weights(0.0, 3).unwrap().as_slice(), &[1.0, 0.0, 0.0]);
        assert_eq!(tei_weights(0.25, 5).unwrap().as_slice(), &[0.75, 0.25, 0.0, 0.0, 0.0]);
        assert!(tei_weights(1.5, 3).is_err());
        assert!(tei_weights(0.5, 1).is_err());
    }

    #[test]
    fn beta_schedule_examples() {
        assert_eq!(beta_schedule(6.0, 0.0).unwrap(), 6.0);
        assert_eq!(beta_schedule(6.0, 0.8).unwrap(), 0.0);
        assert_eq!(beta_schedule(6.0, 0.95).unwrap(), 0.0);
        assert_eq!(beta_schedule(4.0, 0.4).unwrap(), 2.0);
        assert!(beta_schedule(-1.0, 0.4).is_err());
    }

    #[test]
    fn disabled_tei_is_anchor_only() {
        let s = TeiSchedule::disabled();
        assert_eq!(s.gamma(0.0).unwrap(), 0.0);
        assert_eq!(TeiSchedule::default().gamma(0.0).unwrap(), 1.0);
    }

    #[test]
    fn guidance_constant() {
        let g = GuidanceSchedule::default();
        assert_eq!(g.at(0.3).unwrap(), 4.0);
        assert!(GuidanceSchedule::Constant(-1.0).validate().is_err());
    }
}
