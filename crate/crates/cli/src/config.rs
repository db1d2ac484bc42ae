//! Experiment configuration: a TOML file with `[offspring]`, `[env]` and
//! `[run]` sections, parsed strictly (unknown keys are errors) and validated
//! into the core law types before anything runs.

use brwre::{EnvironmentLaw, OffspringLaw, RegimeKind};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

/// Anything wrong with a configuration: unreadable file, bad syntax, or a
/// value the law constructors reject. Always maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<brwre::Error> for ConfigError {
    fn from(e: brwre::Error) -> Self {
        ConfigError(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Exact per-particle tree; exponential cost, small horizons only.
    Tree,
    /// Hybrid per-site counts with log-scale saturation; large horizons.
    Counts,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Tree => write!(f, "tree"),
            Mode::Counts => write!(f, "counts"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegimeExpectation {
    Supercritical,
    Critical,
    Subcritical,
}

impl RegimeExpectation {
    pub fn matches(&self, kind: RegimeKind) -> bool {
        matches!(
            (self, kind),
            (RegimeExpectation::Supercritical, RegimeKind::Supercritical)
                | (RegimeExpectation::Critical, RegimeKind::Critical)
                | (RegimeExpectation::Subcritical, RegimeKind::Subcritical)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffspringSection {
    /// Offspring law as (k, p_k) pairs.
    pub probs: Vec<(u32, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    pub support: Vec<f64>,
    pub weights: Vec<f64>,
    /// Margin keeping the support away from 0 and 1; defaults to half the
    /// distance from the support to the nearer endpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Master seed for the environment stream; defaults to `run.seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub mode: Mode,
    /// Horizon: number of generations to simulate.
    pub n: u32,
    /// Checkpoints at which M_n is recorded; defaults to the geometric set
    /// {n/8, n/4, n/2, n}.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<u32>>,
    pub replicas: u32,
    /// Master seed; every replica derives its generators from it by hashing.
    pub seed: u64,
    /// Count-mode saturation threshold C.
    pub threshold: u64,
    /// One shared environment realization for all replicas (quenched) or a
    /// fresh one per replica (annealed, the default).
    pub quenched: bool,
    /// Optional assertion on the regime; a mismatch is a check failure.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expect_regime: Option<RegimeExpectation>,
    /// Tree-mode population ceiling.
    pub population_cap: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            mode: Mode::Counts,
            n: 1000,
            checkpoints: None,
            replicas: 1,
            seed: 0,
            threshold: 1 << 20,
            quenched: false,
            expect_regime: None,
            population_cap: 1 << 23,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub offspring: OffspringSection,
    pub env: EnvSection,
    #[serde(default)]
    pub run: RunSection,
}

impl ExperimentConfig {
    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    pub fn offspring_law(&self) -> Result<OffspringLaw, ConfigError> {
        Ok(OffspringLaw::from_pairs(&self.offspring.probs)?)
    }

    pub fn environment_law(&self) -> Result<EnvironmentLaw, ConfigError> {
        let delta = match self.env.delta {
            Some(d) => d,
            None => {
                let lo = self.env.support.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = self
                    .env
                    .support
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
                0.5 * lo.min(1.0 - hi)
            }
        };
        Ok(EnvironmentLaw::new(
            self.env.support.clone(),
            self.env.weights.clone(),
            delta,
        )?)
    }

    /// Master seed for the environment stream.
    pub fn env_seed(&self) -> u64 {
        self.env.seed.unwrap_or(self.run.seed)
    }

    /// Checkpoint list: explicit, or geometric {n/8, n/4, n/2, n}.
    pub fn checkpoints(&self) -> Vec<u32> {
        match &self.run.checkpoints {
            Some(c) => c.clone(),
            None => {
                let n = self.run.n;
                let mut c: Vec<u32> = [n / 8, n / 4, n / 2, n]
                    .into_iter()
                    .filter(|&x| x >= 1)
                    .collect();
                c.dedup();
                c
            }
        }
    }

    /// Apply command-line overrides on top of the file values, then
    /// re-validate (an explicit checkpoint list can stop fitting a new n).
    pub fn override_run(
        mut self,
        mode: Option<Mode>,
        n: Option<u32>,
        replicas: Option<u32>,
        seed: Option<u64>,
    ) -> Result<Self, ConfigError> {
        if let Some(m) = mode {
            self.run.mode = m;
        }
        if let Some(v) = n {
            self.run.n = v;
        }
        if let Some(r) = replicas {
            self.run.replicas = r;
        }
        if let Some(s) = seed {
            self.run.seed = s;
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        self.offspring_law()?;
        self.environment_law()?;
        let r = &self.run;
        if r.n < 1 {
            return Err(ConfigError("run.n must be >= 1".into()));
        }
        if r.replicas < 1 {
            return Err(ConfigError("run.replicas must be >= 1".into()));
        }
        if r.threshold < 2 {
            return Err(ConfigError("run.threshold must be >= 2".into()));
        }
        if r.population_cap < 1 {
            return Err(ConfigError("run.population_cap must be >= 1".into()));
        }
        if let Some(cps) = &r.checkpoints {
            if cps.is_empty() {
                return Err(ConfigError("run.checkpoints must not be empty".into()));
            }
            if !cps.windows(2).all(|w| w[0] < w[1]) {
                return Err(ConfigError(
                    "run.checkpoints must be strictly increasing".into(),
                ));
            }
            if cps[0] < 1 || *cps.last().expect("nonempty") > r.n {
                return Err(ConfigError(format!(
                    "run.checkpoints must lie in [1, {}]",
                    r.n
                )));
            }
        }
        Ok(())
    }
}
