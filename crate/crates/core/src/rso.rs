//! Residual set operations and the composed steering residual added on top of
//! classifier-free guidance.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::{beta_schedule, GuidanceSchedule};
use crate::vecspace::{dot, norm2, top_principal_direction, Residual, ResidualStack, EPS_ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    Union,
    Intersection,
    Both,
}

impl Operation {
    pub fn uses_union(self) -> bool {
        matches!(self, Operation::Union | Operation::Both)
    }

    pub fn uses_intersection(self) -> bool {
        matches!(self, Operation::Intersection | Operation::Both)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RsoConfig {
    pub operation: Operation,
    pub beta_union_0: f64,
    pub beta_intersection_0: f64,
    /// Clamp ratio; `inf` disables the clamp.
    #[serde(with = "crate::io::extended_float")]
    pub tau: f64,
    pub delta: f64,
    pub orthogonalize: bool,
    pub guidance: GuidanceSchedule,
    /// Whether the anchor residual joins the union/intersection index sets.
    pub include_anchor: bool,
}

impl Default for RsoConfig {
    fn default() -> Self {
        Self {
            operation: Operation::Union,
            beta_union_0: 4.0,
            beta_intersection_0: 0.0,
            tau: 3.0,
            delta: 1e-8,
            orthogonalize: true,
            guidance: GuidanceSchedule::default(),
            include_anchor: false,
        }
    }
}

impl RsoConfig {
    /// Config whose residual weights are identically zero (plain guidance).
    pub fn disabled() -> Self {
        Self { beta_union_0: 0.0, beta_intersection_0: 0.0, ..Self::default() }
    }

    /// Sets `beta0` on the active operation(s) and zero elsewhere.
    pub fn with_beta0(mut self, beta0: f64) -> Self {
        self.beta_union_0 = if self.operation.uses_union() { beta0 } else { 0.0 };
        self.beta_intersection_0 = if self.operation.uses_intersection() { beta0 } else { 0.0 };
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!("tau must be > 0, got {}", self.tau)));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::Config(format!("delta must be finite and > 0, got {}", self.delta)));
        }
        for (name, b) in [("beta_union_0", self.beta_union_0), ("beta_intersection_0", self.beta_intersection_0)] {
            if !b.is_finite() || b < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {b}")));
            }
        }
        if self.operation == Operation::Union && self.beta_intersection_0 != 0.0 {
            return Err(Error::Config("beta_intersection_0 must be 0 for operation = union".into()));
        }
        if self.operation == Operation::Intersection && self.beta_union_0 != 0.0 {
            return Err(Error::Config("beta_union_0 must be 0 for operation = intersection".into()));
        }
        self.guidance.validate()
    }

    pub fn is_active(&self) -> bool {
        self.beta_union_0 > 0.0 || self.beta_intersection_0 > 0.0
    }
}

/// Residuals of one denoising step together with the index sets the set
/// operations act on (0-based into `per_prompt`).
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualBundle {
    pub r_cfg: Residual,
    pub per_prompt: Vec<Residual>,
    pub union_set: Vec<usize>,
    pub intersection_set: Vec<usize>,
}

impl ResidualBundle {
    pub fn validate(&self) -> Result<()> {
        let dim = self.r_cfg.dim();
        for r in &self.per_prompt {
            if r.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: r.dim() });
            }
        }
        for &i in self.union_set.iter().chain(&self.intersection_set) {
            if i >= self.per_prompt.len() {
                return Err(Error::UnknownId { kind: "prompt residual", id: i });
            }
        }
        Ok(())
    }

    fn select(&self, set: &[usize]) -> Vec<Residual> {
        set.iter().map(|&i| self.per_prompt[i].clone()).collect()
    }
}

/// Default index sets: every prompt except the anchor (index 0), unless the
/// anchor is explicitly included.
pub fn default_index_set(n_prompts: usize, include_anchor: bool) -> Vec<usize> {
    let first = if include_anchor { 0 } else { 1 };
    (first..n_prompts).collect()
}

/// `sum_i r_i / (|r_i| + delta)`.
pub fn union(residuals: &[Residual], delta: f64) -> Result<Residual> {
    let first = residuals.first().ok_or(Error::Empty("union operands"))?;
    if !(delta > 0.0) {
        return Err(Error::OutOfRange(format!("delta must be > 0, got {delta}")));
    }
    let mut acc = Residual::zeros(first.dim());
    for r in residuals {
        let w = 1.0 / (norm2(r)? + delta);
        acc = acc.add_scaled(w, r)?;
    }
    Ok(acc)
}

/// Mean residual projected onto the first principal direction of the
/// uncentered stack.
pub fn intersection(residuals: &[Residual]) -> Result<Residual> {
    let stack = ResidualStack::new(residuals.to_vec())?;
    let pc = top_principal_direction(&stack)?;
    let mean = mean(&stack)?;
    Ok(pc.direction.scale(dot(&mean, &pc.direction)?))
}

fn mean(stack: &ResidualStack) -> Result<Residual> {
    let mut acc = Residual::zeros(stack.dim());
    for r in stack.rows() {
        acc = acc.checked_add(r)?;
    }
    Ok(acc.scale(1.0 / stack.count() as f64))
}

pub fn combine(
    r_union: Option<&Residual>,
    r_intersection: Option<&Residual>,
    beta_union: f64,
    beta_intersection: f64,
) -> Result<Residual> {
    match (r_union, r_intersection) {
        (None, None) => Err(Error::Empty("combine operands")),
        (Some(u), None) => Ok(u.scale(beta_union)),
        (None, Some(i)) => Ok(i.scale(beta_intersection)),
        (Some(u), Some(i)) => u.scale(beta_union).add_scaled(beta_intersection, i),
    }
}

/// Removes the component along `r_cfg`; passes through when the guidance
/// residual is effectively zero.
pub fn orthogonalize_against_guidance(r_blendr: &Residual, r_cfg: &Residual) -> Result<Residual> {
    if r_blendr.dim() != r_cfg.dim() {
        return Err(Error::DimensionMismatch { expected: r_cfg.dim(), actual: r_blendr.dim() });
    }
    let n = norm2(r_cfg)?;
    if n <= EPS_ZERO {
        return Ok(r_blendr.clone());
    }
    let coef = dot(r_blendr, r_cfg)? / (n * n);
    r_blendr.add_scaled(-coef, r_cfg)
}

/// Caps `|r_blendr|` at `tau * |r_cfg|`.
pub fn clamp_norm(r_blendr: &Residual, r_cfg: &Residual, tau: f64) -> Result<Residual> {
    if !(tau > 0.0) {
        return Err(Error::OutOfRange(format!("tau must be > 0, got {tau}")));
    }
    if r_blendr.dim() != r_cfg.dim() {
        return Err(Error::DimensionMismatch { expected: r_cfg.dim(), actual: r_blendr.dim() });
    }
    let bound = tau * norm2(r_cfg)?;
    let n = norm2(r_blendr)?;
    if n <= bound {
        return Ok(r_blendr.clone());
    }
    Ok(r_blendr.scale(bound / n))
}

/// The composed residual plus the intermediate norms that go into step traces.
#[derive(Clone, Debug, PartialEq)]
pub struct Composition {
    pub residual: Residual,
    pub beta_union: f64,
    pub beta_intersection: f64,
    pub union_norm: Option<f64>,
    pub intersection_norm: Option<f64>,
    pub pre_clamp_norm: f64,
    pub post_clamp_norm: f64,
    /// Guidance residual was ~0, so orthogonalization and clamp were skipped.
    pub guidance_degenerate: bool,
}

/// Union and/or intersection, weighting, optional orthogonalization and clamp,
/// in that order.
pub fn blendr_residual(bundle: &ResidualBundle, config: &RsoConfig, t_progress: f64) -> Result<Composition> {
    bundle.validate()?;
    let dim = bundle.r_cfg.dim();
    let beta_union = if config.operation.uses_union() { beta_schedule(config.beta_union_0, t_progress)? } else { 0.0 };
    let beta_intersection = if config.operation.uses_intersection() {
        beta_schedule(config.beta_intersection_0, t_progress)?
    } else {
        0.0
    };

    if beta_union == 0.0 && beta_intersection == 0.0 {
        return Ok(Composition {
            residual: Residual::zeros(dim),
            beta_union,
            beta_intersection,
            union_norm: None,
            intersection_norm: None,
            pre_clamp_norm: 0.0,
            post_clamp_norm: 0.0,
            guidance_degenerate: false,
        });
    }

    let r_union = if beta_union != 0.0 {
        if bundle.union_set.is_empty() {
            return Err(Error::Empty("union index set"));
        }
        Some(union(&bundle.select(&bundle.union_set), config.delta)?)
    } else {
        None
    };
    let r_intersection = if beta_intersection != 0.0 {
        if bundle.intersection_set.is_empty() {
            return Err(Error::Empty("intersection index set"));
        }
        Some(intersection(&bundle.select(&bundle.intersection_set))?)
    } else {
        None
    };

    let mut residual = combine(r_union.as_ref(), r_intersection.as_ref(), beta_union, beta_intersection)?;

    let guidance_degenerate = norm2(&bundle.r_cfg)? <= EPS_ZERO;
    if guidance_degenerate {
        warn!("guidance residual is ~0 at t = {t_progress}; skipping orthogonalization and clamp");
    } else if config.orthogonalize {
        residual = orthogonalize_against_guidance(&residual, &bundle.r_cfg)?;
    }
    let pre_clamp_norm = norm2(&residual)?;
    if !guidance_degenerate {
        residual = clamp_norm(&residual, &bundle.r_cfg, config.tau)?;
    }
    let post_clamp_norm = norm2(&residual)?;

    Ok(Composition {
        residual,
        beta_union,
        beta_intersection,
        union_norm: r_union.as_ref().map(norm2).transpose()?,
        intersection_norm: r_intersection.as_ref().map(norm2).transpose()?,
        pre_clamp_norm,
        post_clamp_norm,
        guidance_degenerate,
    })
}
