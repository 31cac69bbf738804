//! Run configuration file (TOML). Every field has a default; unknown keys
//! are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diffusion::{sample_seed, NoiseScheduleConfig, SamplerConfig};
use crate::error::{Error, Result};
use crate::io::read_text;
use crate::rso::{Operation, RsoConfig};
use crate::schedule::{GuidanceSchedule, TeiSchedule};
use crate::toymodel::model::Architecture;
use crate::toymodel::train::TrainConfig;
use crate::toymodel::world::ToyWorldSpec;

/// Generation strategy: anchor only, donor ramp only, residual operations
/// only, or both.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Baseline,
    Tei,
    Rso,
    Full,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Tei => "tei",
            Mode::Rso => "rso",
            Mode::Full => "full",
        }
    }

    pub fn uses_tei(self) -> bool {
        matches!(self, Mode::Tei | Mode::Full)
    }

    pub fn uses_rso(self) -> bool {
        matches!(self, Mode::Rso | Mode::Full)
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Mode::Baseline),
            "tei" => Ok(Mode::Tei),
            "rso" => Ok(Mode::Rso),
            "full" => Ok(Mode::Full),
            other => Err(Error::Config(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub mode: Mode,
    pub target_concept: usize,
    pub count: usize,
    pub w_cfg: f64,
    pub t_star: f64,
    pub donor_start: f64,
    pub operation: Operation,
    /// `beta(0)` is drawn uniformly from this pool for every sample.
    pub beta0_pool: Vec<f64>,
    /// Clamp ratio; `inf` disables clamping.
    #[serde(with = "crate::io::extended_float")]
    pub tau: f64,
    pub delta: f64,
    pub orthogonalize: bool,
    pub include_anchor: bool,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Full,
            target_concept: 0,
            count: 150,
            w_cfg: 4.0,
            t_star: 0.2,
            donor_start: 1.0,
            operation: Operation::Union,
            beta0_pool: vec![3.0, 4.0, 5.0, 6.0],
            tau: 3.0,
            delta: 1e-8,
            orthogonalize: true,
            include_anchor: false,
        }
    }
}

impl SamplingConfig {
    /// Sampler for `mode` with residual weight `beta0` (ignored unless the
    /// mode uses residual operations).
    pub fn sampler(&self, mode: Mode, beta0: f64) -> SamplerConfig {
        let tei = if mode.uses_tei() {
            TeiSchedule { enabled: true, t_star: self.t_star, donor_start: self.donor_start }
        } else {
            TeiSchedule { enabled: false, t_star: self.t_star, donor_start: self.donor_start }
        };
        let rso = RsoConfig {
            operation: self.operation,
            beta_union_0: 0.0,
            beta_intersection_0: 0.0,
            tau: self.tau,
            delta: self.delta,
            orthogonalize: self.orthogonalize,
            guidance: GuidanceSchedule::Constant(self.w_cfg),
            include_anchor: self.include_anchor,
        };
        let rso = if mode.uses_rso() { rso.with_beta0(beta0) } else { rso };
        SamplerConfig { tei, rso }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config("sampling.count must be >= 1".into()));
        }
        if self.beta0_pool.is_empty() || self.beta0_pool.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::Config("sampling.beta0_pool must be non-empty, finite and >= 0".into()));
        }
        let probe = self.sampler(Mode::Full, self.beta0_pool[0]);
        probe.tei.validate()?;
        probe.rso.validate()
    }
}

/// Sweep axes. An empty list means "the value from `[sampling]`".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateConfig {
    pub beta0: Vec<f64>,
    #[serde(with = "crate::io::extended_float::vec")]
    pub tau: Vec<f64>,
    pub w_cfg: Vec<f64>,
    pub t_star: Vec<f64>,
    pub orthogonalize: Vec<bool>,
    pub operation: Vec<Operation>,
}

impl Default for AblateConfig {
    fn default() -> Self {
        Self {
            beta0: vec![0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0],
            tau: Vec::new(),
            w_cfg: Vec::new(),
            t_star: Vec::new(),
            orthogonalize: Vec::new(),
            operation: Vec::new(),
        }
    }
}

/// Explicit per-phase seeds; any left unset derives from `master`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedConfig {
    pub master: u64,
    pub data: Option<u64>,
    pub init: Option<u64>,
    pub train: Option<u64>,
    pub selection: Option<u64>,
    pub sampling: Option<u64>,
    pub beta_draws: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Data,
    Init,
    Train,
    Selection,
    Sampling,
    BetaDraws,
}

impl SeedConfig {
    pub fn phase(&self, phase: Phase) -> u64 {
        let (explicit, index) = match phase {
            Phase::Data => (self.data, 1),
            Phase::Init => (self.init, 2),
            Phase::Train => (self.train, 3),
            Phase::Selection => (self.selection, 4),
            Phase::Sampling => (self.sampling, 5),
            Phase::BetaDraws => (self.beta_draws, 6),
        };
        explicit.unwrap_or_else(|| sample_seed(self.master, index))
    }

    /// Copy with every phase seed written out.
    pub fn resolved(&self) -> Self {
        Self {
            master: self.master,
            data: Some(self.phase(Phase::Data)),
            init: Some(self.phase(Phase::Init)),
            train: Some(self.phase(Phase::Train)),
            selection: Some(self.phase(Phase::Selection)),
            sampling: Some(self.phase(Phase::Sampling)),
            beta_draws: Some(self.phase(Phase::BetaDraws)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub world: ToyWorldSpec,
    pub model: Architecture,
    pub noise: NoiseScheduleConfig,
    pub train: TrainConfig,
    pub sampling: SamplingConfig,
    pub ablate: AblateConfig,
    pub seeds: SeedConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("runs/default"),
            world: ToyWorldSpec::default(),
            model: Architecture::default(),
            noise: NoiseScheduleConfig::default(),
            train: TrainConfig::default(),
            sampling: SamplingConfig::default(),
            ablate: AblateConfig::default(),
            seeds: SeedConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::format(origin, e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, path)
    }

    /// Defaults when no file is given.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.model.validate()?;
        self.noise.build()?;
        self.train.validate()?;
        self.sampling.validate()?;
        if self.sampling.target_concept >= self.world.n_concepts {
            return Err(Error::Config(format!(
                "sampling.target_concept {} out of range for {} concepts",
                self.sampling.target_concept, self.world.n_concepts
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::parse("", Path::new("x.toml")).unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.sampling.w_cfg, 4.0);
        assert_eq!(cfg.sampling.tau, 3.0);
        assert_eq!(cfg.sampling.t_star, 0.2);
        assert_eq!(cfg.sampling.beta0_pool, vec![3.0, 4.0, 5.0, 6.0]);
        assert!(cfg.sampling.orthogonalize);
    }

    #[test]
    fn round_trip_materializes_defaults() {
        let cfg = RunConfig::parse("[sampling]\nmode = \"tei\"\ntau = inf\n", Path::new("x.toml")).unwrap();
        assert_eq!(cfg.sampling.mode, Mode::Tei);
        assert!(cfg.sampling.tau.is_infinite());
        let text = cfg.to_toml();
        assert!(text.contains("beta0_pool"));
        assert_eq!(RunConfig::parse(&text, Path::new("y.toml")).unwrap(), cfg);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::parse("[sampling]\nw_cgf = 3.0\n", Path::new("x.toml")).unwrap_err();
        assert!(err.to_string().contains("w_cgf"), "{err}");
        assert_eq!(err.exit_code(), 2);
        let err = RunConfig::parse("tyop = 1\n", Path::new("x.toml")).unwrap_err();
        assert!(err.to_string().contains("tyop"), "{err}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::parse("[sampling]\ncount = 0\n", Path::new("x")).is_err());
        assert!(RunConfig::parse("[sampling]\nbeta0_pool = []\n", Path::new("x")).is_err());
        assert!(RunConfig::parse("[sampling]\ntarget_concept = 9\n", Path::new("x")).is_err());
    }

    #[test]
    fn modes_select_components() {
        let s = SamplingConfig::default();
        let b = s.sampler(Mode::Baseline, 5.0);
        assert!(!b.tei.enabled && !b.rso.is_active());
        let t = s.sampler(Mode::Tei, 5.0);
        assert!(t.tei.enabled && !t.rso.is_active());
        let r = s.sampler(Mode::Rso, 5.0);
        assert!(!r.tei.enabled && r.rso.beta_union_0 == 5.0);
        let f = s.sampler(Mode::Full, 5.0);
        assert!(f.tei.enabled && f.rso.beta_union_0 == 5.0 && f.rso.beta_intersection_0 == 0.0);
    }

    #[test]
    fn seeds_derive_and_resolve() {
        let s = SeedConfig { master: 7, train: Some(99), ..SeedConfig::default() };
        assert_eq!(s.phase(Phase::Train), 99);
        assert_ne!(s.phase(Phase::Data), s.phase(Phase::Init));
        let r = s.resolved();
        for p in [Phase::Data, Phase::Init, Phase::Train, Phase::Selection, Phase::Sampling, Phase::BetaDraws] {
            assert_eq!(r.phase(p), s.phase(p));
        }
    }
}
