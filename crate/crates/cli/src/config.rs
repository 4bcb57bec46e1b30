//! Experiment and sweep configuration files (TOML).
//!
//! A run config has the sections `kernel`, `grid`, `reaction`, `solver`,
//! `initial` and `outputs`; only the first three are mandatory. A sweep plan
//! lists `kernels` and `p` and shares the remaining sections.

use std::path::{Path, PathBuf};

use fujita_core::kernels::{KernelConfig, DEFAULT_FIT_WINDOW};
use fujita_core::{Field, Grid, KernelSpec, Reaction, SolverConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub points: usize,
    pub half_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactionKind {
    PureGrowth,
    AlleeLogistic,
    Bernoulli,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionConfig {
    pub kind: ReactionKind,
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
}

impl ReactionConfig {
    pub fn build(&self) -> Result<Reaction, ConfigError> {
        let r = match self.kind {
            ReactionKind::PureGrowth => Reaction::pure_growth(self.p),
            ReactionKind::AlleeLogistic => Reaction::allee_logistic(self.p),
            ReactionKind::Bernoulli => Reaction::bernoulli(self.a.unwrap_or(1.0), self.b.unwrap_or(1.0), self.p),
        };
        r.map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// `amplitude (1 − r²/R²)²` on `r < R`.
    Bump,
    /// `amplitude e^{−r²/R²}`.
    Gaussian,
    /// `amplitude 1_{r ≤ R}`.
    Indicator,
    Constant,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub shape: Shape,
    pub amplitude: f64,
    pub radius: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            shape: Shape::Bump,
            amplitude: 0.1,
            radius: 2.0,
        }
    }
}

impl InitialConfig {
    pub fn sample(&self, grid: &Grid) -> Result<Field, ConfigError> {
        if !(self.amplitude >= 0.0 && self.radius > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "initial datum needs amplitude >= 0 and radius > 0, got {} and {}",
                self.amplitude, self.radius
            )));
        }
        let (a, r0) = (self.amplitude, self.radius);
        let shape = self.shape;
        grid.sample_radial(move |r| match shape {
            Shape::Bump if r < r0 => a * (1.0 - (r / r0).powi(2)).powi(2),
            Shape::Bump => 0.0,
            Shape::Gaussian => a * (-(r / r0).powi(2)).exp(),
            Shape::Indicator if r <= r0 => a,
            Shape::Indicator => 0.0,
            Shape::Constant => a,
            Shape::Zero => 0.0,
        })
        .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputsConfig {
    /// Write binary snapshots every `solver.snapshot_stride` steps.
    pub snapshots: bool,
    /// Write the final field as CSV.
    pub final_csv: bool,
}

impl Default for OutputsConfig {
    fn default() -> Self {
        Self {
            snapshots: true,
            final_csv: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub xi_min: f64,
    pub xi_max: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            xi_min: DEFAULT_FIT_WINDOW.0,
            xi_max: DEFAULT_FIT_WINDOW.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KaplanConfig {
    pub times: Vec<f64>,
}

impl Default for KaplanConfig {
    fn default() -> Self {
        Self {
            times: vec![0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    pub radii: Vec<f64>,
    pub p: Vec<f64>,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            radii: vec![0.5, 1.0, 2.0, 5.0, 10.0],
            p: vec![0.5, 1.0, 2.0, 3.0, 5.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kernel: KernelConfig,
    pub grid: GridConfig,
    pub reaction: ReactionConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub kaplan: KaplanConfig,
    #[serde(default)]
    pub threshold: ThresholdConfig,
}

/// Only the kernel (and optional fit window) is needed to classify.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelOnlyConfig {
    pub kernel: KernelConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub threshold: ThresholdConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub kernels: Vec<KernelConfig>,
    pub p: Vec<f64>,
    pub grid: GridConfig,
    #[serde(default = "default_reaction")]
    pub reaction: ReactionKind,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    /// Amplitudes tried per cell, largest first: a cell is systematic
    /// blow-up when all of them blow up, extinction-capable when one decays.
    #[serde(default = "default_amplitudes")]
    pub amplitudes: Vec<f64>,
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub fit: FitConfig,
}

fn default_reaction() -> ReactionKind {
    ReactionKind::PureGrowth
}

fn default_amplitudes() -> Vec<f64> {
    vec![1.0, 0.1]
}

impl SweepPlan {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.kernels.is_empty() {
            return Err(ConfigError::Invalid("sweep needs at least one kernel".into()));
        }
        if self.p.is_empty() {
            return Err(ConfigError::Invalid("sweep needs at least one p".into()));
        }
        if let Some(p) = self.p.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
            return Err(ConfigError::Invalid(format!("every p must be positive, got {p}")));
        }
        if self.amplitudes.is_empty() || self.amplitudes.iter().any(|a| !(*a > 0.0)) {
            return Err(ConfigError::Invalid("amplitudes must be a nonempty list of positive numbers".into()));
        }
        self.solver.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    /// The run config of one `(kernel, p, amplitude)` cell.
    pub fn cell(&self, kernel: usize, p: f64, amplitude: f64) -> ExperimentConfig {
        ExperimentConfig {
            kernel: self.kernels[kernel].clone(),
            grid: self.grid,
            reaction: ReactionConfig {
                kind: self.reaction,
                p,
                a: None,
                b: None,
            },
            solver: self.solver.clone(),
            initial: InitialConfig {
                amplitude,
                ..self.initial
            },
            outputs: OutputsConfig {
                snapshots: false,
                final_csv: false,
            },
            fit: self.fit,
            kaplan: KaplanConfig::default(),
            threshold: ThresholdConfig::default(),
        }
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ConfigError> {
    toml::from_str(&read(path)?).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn load_experiment(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = load(path)?;
    cfg.solver.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(cfg)
}

pub fn load_sweep(path: &Path) -> Result<SweepPlan, ConfigError> {
    let plan: SweepPlan = load(path)?;
    plan.validate()?;
    Ok(plan)
}

pub fn build_kernel(cfg: &KernelConfig, base: Option<&Path>) -> Result<KernelSpec, ConfigError> {
    cfg.build_relative_to(base).map_err(|e| ConfigError::Invalid(e.to_string()))
}

pub fn build_grid(cfg: &GridConfig, dim: usize) -> Result<Grid, ConfigError> {
    Grid::new(dim, cfg.points, cfg.half_width).map_err(|e| ConfigError::Invalid(e.to_string()))
}

/// SHA-256 of the canonical JSON form: object keys sorted, so the hash
/// depends on content only.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let value = serde_json::to_value(cfg).expect("config serializes");
    let text = serde_json::to_string(&value).expect("value serializes");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const RUN: &str = r#"
[kernel]
family = "gaussian"
dim = 1
params = { sigma = 1.0 }

[grid]
points = 256
half_width = 20.0

[reaction]
kind = "pure_growth"
p = 3.0

[solver]
t_max = 50.0
"#;

    const RUN_REORDERED: &str = r#"
[reaction]
p = 3.0
kind = "pure_growth"

[solver]
t_max = 50.0

[grid]
half_width = 20.0
points = 256

[kernel]
params = { sigma = 1.0 }
dim = 1
family = "gaussian"
"#;

    #[test]
    fn hash_ignores_key_order() {
        let a: ExperimentConfig = toml::from_str(RUN).unwrap();
        let b: ExperimentConfig = toml::from_str(RUN_REORDERED).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        let mut c = a.clone();
        c.reaction.p = 2.0;
        assert_ne!(config_hash(&a), config_hash(&c));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn defaults_fill_optional_sections() {
        let a: ExperimentConfig = toml::from_str(RUN).unwrap();
        assert_eq!(a.solver.t_max, 50.0);
        assert_eq!(a.solver.dt_init, SolverConfig::default().dt_init);
        assert_eq!(a.initial, InitialConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = RUN.replace("p = 3.0", "p = 3.0\nq = 1.0");
        assert!(toml::from_str::<ExperimentConfig>(&bad).is_err());
    }

    #[test]
    fn sweep_validation() {
        let text = r#"
p = []
kernels = [{ family = "cauchy", dim = 1 }]
[grid]
points = 64
half_width = 10.0
"#;
        let plan: SweepPlan = toml::from_str(text).unwrap();
        assert!(matches!(plan.validate(), Err(ConfigError::Invalid(_))));
        let plan: SweepPlan = toml::from_str(&text.replace("p = []", "p = [1.0, -2.0]")).unwrap();
        assert!(plan.validate().is_err());
        let plan: SweepPlan = toml::from_str(&text.replace("p = []", "p = [1.0]")).unwrap();
        assert!(plan.validate().is_ok());
        assert_eq!(plan.cell(0, 1.0, 0.5).initial.amplitude, 0.5);
    }

    #[test]
    fn initial_shapes() {
        let grid = Grid::new(1, 64, 8.0).unwrap();
        for shape in [Shape::Bump, Shape::Gaussian, Shape::Indicator, Shape::Constant] {
            let f = InitialConfig { shape, amplitude: 0.5, radius: 2.0 }.sample(&grid).unwrap();
            assert_eq!(f.at_origin(), 0.5);
        }
        let z = InitialConfig { shape: Shape::Zero, ..InitialConfig::default() }.sample(&grid).unwrap();
        assert_eq!(z.norms().linf, 0.0);
    }
}
