//! Run configurations. Every table rejects unknown keys so a typo fails
//! loudly instead of silently falling back to a default.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use segtrade_core::{EconomyParams, SolverOptions};
use segtrade_econometrics::{McConfig, Outcome, OutcomeSpec};
use segtrade_panel::SimConfig;

use crate::error::{CliError, Result};

/// `segtrade solve`
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    /// Recorded in output headers; the solve itself is deterministic.
    #[serde(default)]
    pub seed: u64,
    pub economy: EconomyParams<f64>,
    #[serde(default)]
    pub solver: SolverOptions<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl GridAxis {
    pub fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        (0..self.steps).map(|k| self.min + (self.max - self.min) * k as f64 / (self.steps - 1) as f64).collect()
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.steps == 0 || !self.min.is_finite() || !self.max.is_finite() || self.min > self.max {
            return Err(CliError::Config(format!("sweep.{name}: need finite min <= max and steps >= 1")));
        }
        Ok(())
    }
}

fn default_delta() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub origin: usize,
    pub dest: usize,
    /// Values of the destination's spending share on the male-intensive good.
    pub alpha: GridAxis,
    /// Values of the symmetric origin-destination trade cost.
    pub trade_cost: GridAxis,
    /// Endowment shock used for the realized sign.
    #[serde(default = "default_delta")]
    pub delta: f64,
}

/// `segtrade prop1-sweep`
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub seed: u64,
    pub economy: EconomyParams<f64>,
    #[serde(default)]
    pub solver: SolverOptions<f64>,
    pub sweep: SweepSpec,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.sweep;
        let n = self.economy.n();
        if s.origin >= n || s.dest >= n || s.origin == s.dest {
            return Err(CliError::Config(format!("sweep: origin and dest must be distinct regions below {n}")));
        }
        s.alpha.validate("alpha")?;
        s.trade_cost.validate("trade_cost")?;
        if !(s.alpha.min > 0.0 && s.alpha.max < 1.0) {
            return Err(CliError::Config("sweep.alpha must lie inside (0, 1)".into()));
        }
        if !(s.delta > 0.0) || !s.delta.is_finite() {
            return Err(CliError::Config("sweep.delta must be positive".into()));
        }
        // Every grid corner must be a valid economy, which includes the
        // triangle inequality on trade costs.
        for alpha in [s.alpha.min, s.alpha.max] {
            for tau in [s.trade_cost.min, s.trade_cost.max] {
                self.point(alpha, tau).validate().map_err(|e| {
                    CliError::Config(format!("sweep grid point alpha={alpha}, trade_cost={tau} is invalid: {e}"))
                })?;
            }
        }
        Ok(())
    }

    pub fn point(&self, alpha: f64, tau: f64) -> EconomyParams<f64> {
        let mut p = self.economy.clone();
        let (o, d) = (self.sweep.origin, self.sweep.dest);
        p.alpha[d] = alpha;
        p.tau[o][d] = tau;
        p.tau[d][o] = tau;
        p
    }
}

/// `segtrade simulate`
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub simulation: SimConfig,
}

/// `segtrade estimate`
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub panel_dir: Option<PathBuf>,
    pub simulation: Option<SimConfig>,
    #[serde(default)]
    pub estimation: OutcomeSpec,
}

fn default_outcome() -> Outcome {
    Outcome::Ratio
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McTemplate {
    #[serde(default = "default_outcome")]
    pub outcome: Outcome,
    #[serde(default = "yes")]
    pub controls: bool,
}

impl Default for McTemplate {
    fn default() -> Self {
        Self { outcome: default_outcome(), controls: true }
    }
}

/// `segtrade mc`
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McRunConfig {
    pub panel_dir: Option<PathBuf>,
    pub simulation: Option<SimConfig>,
    #[serde(default)]
    pub template: McTemplate,
    #[serde(default)]
    pub mc: McConfig,
}

/// Raw config text with its digest.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub path: PathBuf,
    pub text: String,
    pub sha256: String,
}

impl LoadedConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|source| CliError::Io { path: path.to_owned(), source })?;
        let sha256 = hex::encode(Sha256::digest(&bytes));
        let text = String::from_utf8(bytes)
            .map_err(|_| CliError::Config(format!("{} is not valid UTF-8", path.display())))?;
        Ok(Self { path: path.to_owned(), text, sha256 })
    }

    pub fn parse<T: for<'de> Deserialize<'de>>(&self) -> Result<T> {
        toml::from_str(&self.text).map_err(|e| CliError::Config(format!("{}: {}", self.path.display(), e.to_string().trim_end())))
    }

    /// Resolves a path from the config relative to the config's directory.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_owned()
        } else {
            self.path.parent().unwrap_or(Path::new(".")).join(p)
        }
    }
}
