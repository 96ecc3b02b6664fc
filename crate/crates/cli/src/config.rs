use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use serde::{Deserialize, Serialize};

use ruinsim_core::{Mode, ModelSpec, Overrides};

/// One experiment: a model, a parameter mode, barriers and replication counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub model: ModelSpec,
    #[serde(default = "default_mode")]
    pub mode: ModeSpec,
    pub b: Vec<f64>,
    pub n: u64,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads. Never serialized, so artifacts cannot depend on it.
    #[serde(default = "default_shards", skip_serializing)]
    pub shards: usize,
    /// Per-replication step cap; censored replications score zero.
    #[serde(default)]
    pub step_cap: Option<u64>,
    /// Censored fraction above which a run exits non-zero.
    #[serde(default = "default_max_censored")]
    pub max_censored_frac: f64,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default)]
    pub baselines: Baselines,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Config form of [`Mode`]. Every variant is a struct so that stray keys are
/// rejected even for the parameterless modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModeSpec {
    StrongEfficiency {},
    TerminationControlled {},
    GammaMoment { gamma: f64 },
    TotalVariation { epsilon: f64 },
}

impl From<ModeSpec> for Mode {
    fn from(m: ModeSpec) -> Self {
        match m {
            ModeSpec::StrongEfficiency {} => Mode::StrongEfficiency,
            ModeSpec::TerminationControlled {} => Mode::TerminationControlled,
            ModeSpec::GammaMoment { gamma } => Mode::GammaMoment { gamma },
            ModeSpec::TotalVariation { epsilon } => Mode::TotalVariation { epsilon },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Baselines {
    #[serde(default)]
    pub crude: bool,
    /// Crude replications; defaults to `n`.
    #[serde(default)]
    pub crude_n: Option<u64>,
    #[serde(default)]
    pub ak: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    #[serde(default)]
    pub conditional: bool,
    #[serde(default)]
    pub coupling: Option<CouplingConfig>,
    /// s-grid size for the Lyapunov and drift verifiers.
    #[serde(default = "default_verify_points")]
    pub verify_points: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { conditional: false, coupling: None, verify_points: default_verify_points() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub epsilon: f64,
    pub a_star_star: f64,
    /// Coupled replications; defaults to `n`.
    #[serde(default)]
    pub n: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// File stem for artifacts; defaults to `name`.
    #[serde(default)]
    pub stem: Option<String>,
}

fn default_name() -> String {
    "experiment".into()
}
fn default_mode() -> ModeSpec {
    ModeSpec::StrongEfficiency {}
}
fn default_shards() -> usize {
    1
}
fn default_max_censored() -> f64 {
    1e-4
}
fn default_verify_points() -> usize {
    50
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let c: Self = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        ensure!(!self.b.is_empty(), "b must list at least one barrier");
        for &b in &self.b {
            ensure!(b.is_finite() && b > 0.0, "barrier {b} must be positive and finite");
        }
        ensure!(self.n >= 2, "n = {} (need at least 2 replications)", self.n);
        ensure!(self.shards >= 1, "shards must be at least 1");
        ensure!((0.0..=1.0).contains(&self.max_censored_frac), "max_censored_frac = {} outside [0, 1]", self.max_censored_frac);
        ensure!(self.diagnostics.verify_points >= 2, "verify_points must be at least 2");
        if let Some(c) = self.baselines.crude_n {
            ensure!(c >= 2, "crude_n = {c} (need at least 2)");
        }
        if self.baselines.ak && !matches!(self.model, ModelSpec::Mg1Pareto { .. }) {
            bail!("the ak baseline needs the mg1-pareto model");
        }
        if let Some(cp) = &self.diagnostics.coupling {
            ensure!(cp.epsilon > 0.0 && cp.epsilon < 1.0, "coupling epsilon {} outside (0, 1)", cp.epsilon);
            ensure!(cp.a_star_star > 0.0, "coupling a_star_star must be positive");
        }
        if let Some(stem) = &self.output.stem {
            ensure!(!stem.is_empty() && !stem.contains(['/', '\\']), "output stem {stem:?} must be a plain file name");
        }
        Ok(())
    }

    pub fn stem(&self) -> &str {
        self.output.stem.as_deref().unwrap_or(&self.name)
    }

    pub fn artifact(&self, dir: &Path, suffix: &str) -> PathBuf {
        dir.join(format!("{}{suffix}", self.stem()))
    }
}

pub const TABLE1: &str = include_str!("../configs/table1.toml");
pub const TABLE2: &str = include_str!("../configs/table2.toml");
