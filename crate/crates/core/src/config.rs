//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::PerturbIndex;
use crate::engine::{Schedule, Side};
use crate::topology::TopologyKind;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{}: key `{key}`: {reason}", path.display())]
pub struct ConfigError {
    pub path: PathBuf,
    pub key: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(path: impl Into<PathBuf>, key: impl Into<String>, reason: impl Into<String>) -> Self {
        Self { path: path.into(), key: key.into(), reason: reason.into() }
    }
}

fn default_seeds() -> usize {
    5
}

fn default_stride() -> usize {
    1
}

fn default_output_dir() -> String {
    "out".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "T")]
    pub iterations: usize,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    pub problem: ProblemConfig,
    pub data: DataConfig,
    #[serde(default)]
    pub topology: TopologyConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(default)]
    pub sweep: SweepAxes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ProblemConfig {
    Quadratic(QuadraticConfig),
    Auc(AucConfig),
    Sine(SineConfig),
}

impl ProblemConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemConfig::Quadratic(_) => "quadratic",
            ProblemConfig::Auc(_) => "auc",
            ProblemConfig::Sine(_) => "sine",
        }
    }
}

/// Per-agent quadratics with Gaussian `[b; c]` around per-agent means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadraticConfig {
    pub d_x: usize,
    pub d_y: usize,
    pub mu_x: f64,
    pub mu_y: f64,
    pub coupling_scale: f64,
    pub noise: f64,
    pub mean_scale: f64,
    pub radius_x: f64,
    pub radius_y: f64,
}

impl Default for QuadraticConfig {
    fn default() -> Self {
        Self {
            d_x: 2,
            d_y: 2,
            mu_x: 1.0,
            mu_y: 1.0,
            coupling_scale: 0.5,
            noise: 1.0,
            mean_scale: 1.0,
            radius_x: 5.0,
            radius_y: 5.0,
        }
    }
}

/// Pairwise AUC objective; synthetic two-class pool unless `data.path` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AucConfig {
    pub dim: usize,
    pub pool_size: usize,
    pub positive_fraction: f64,
    pub separation: f64,
    pub radius_x: f64,
    pub radius_y: f64,
}

impl Default for AucConfig {
    fn default() -> Self {
        Self { dim: 10, pool_size: 5000, positive_fraction: 0.5, separation: 2.0, radius_x: 2.0, radius_y: 4.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SineConfig {
    pub d_x: usize,
    pub d_y: usize,
    pub amplitude: f64,
    pub phase_spread: f64,
    pub noise: f64,
    pub radius_x: f64,
    pub radius_y: f64,
}

impl Default for SineConfig {
    fn default() -> Self {
        Self { d_x: 1, d_y: 1, amplitude: 1.0, phase_spread: 1.0, noise: 0.5, radius_x: 3.0, radius_y: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub m: usize,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    /// LIBSVM file for the AUC family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub perturb_index: PerturbIndex,
    /// Draw a fresh dataset and neighbor per seed instead of fixing `S`.
    #[serde(default)]
    pub resample: bool,
    /// Fresh samples per agent kept for neighbor construction.
    #[serde(default = "default_reservoir")]
    pub reservoir: usize,
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_reservoir() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub kind: TopologyKind,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self { kind: TopologyKind::FullyConnected }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    /// `eta` sets both sides; `eta_x` / `eta_y` override it.
    Fixed {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta_x: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta_y: Option<f64>,
    },
    Decaying {
        mu: f64,
        c: f64,
        #[serde(default)]
        max_side: Side,
    },
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig::Fixed { eta: Some(0.01), eta_x: None, eta_y: None }
    }
}

impl ScheduleConfig {
    pub fn resolve(&self) -> Result<Schedule, String> {
        match *self {
            ScheduleConfig::Fixed { eta, eta_x, eta_y } => {
                let ex = eta_x.or(eta).ok_or("fixed schedule needs `eta` or `eta_x`")?;
                let ey = eta_y.or(eta).ok_or("fixed schedule needs `eta` or `eta_y`")?;
                Ok(Schedule::Fixed { eta_x: ex, eta_y: ey })
            }
            ScheduleConfig::Decaying { mu, c, max_side } => Ok(Schedule::Decaying { mu, c, max_side }),
        }
    }
}

/// Probe sizes for the weak stability estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub grid_x: usize,
    pub grid_y: usize,
    /// Fresh sample tuples in the supremum pool.
    pub pool: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { grid_x: 101, grid_y: 101, pool: 1000 }
    }
}

/// Factor lists; empty lists keep the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    pub eta: Vec<f64>,
    pub topology: Vec<TopologyKind>,
    pub n: Vec<usize>,
    pub m: Vec<usize>,
}

impl SweepAxes {
    pub fn is_empty(&self) -> bool {
        self.eta.is_empty() && self.topology.is_empty() && self.n.is_empty() && self.m.is_empty()
    }
}

/// Extracts the offending key from a deserializer message.
fn key_of(msg: &str) -> String {
    for marker in ["unknown field `", "missing field `", "unknown variant `"] {
        if let Some(pos) = msg.find(marker) {
            let rest = &msg[pos + marker.len()..];
            if let Some(end) = rest.find('`') {
                return rest[..end].to_string();
            }
        }
    }
    String::new()
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            ConfigError::new(path, key_of(&msg), msg)
        })?;
        cfg.validate(path)?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self, path: &Path) -> Result<(), ConfigError> {
        let err = |k: &str, r: &str| Err(ConfigError::new(path, k, r));
        if self.iterations == 0 {
            return err("T", "must be at least 1");
        }
        if self.seeds < 2 {
            return err("seeds", "need at least 2 seeds");
        }
        if self.stride == 0 {
            return err("stride", "must be at least 1");
        }
        let ms = if self.sweep.m.is_empty() { vec![self.data.m] } else { self.sweep.m.clone() };
        let ns = if self.sweep.n.is_empty() { vec![self.data.n] } else { self.sweep.n.clone() };
        if ms.contains(&0) {
            return err("m", "must be positive");
        }
        if ns.contains(&0) {
            return err("n", "must be positive");
        }
        if !(0.0..1.0).contains(&self.data.test_fraction) {
            return err("test_fraction", "must lie in [0, 1)");
        }
        if self.data.reservoir == 0 {
            return err("reservoir", "must be positive");
        }
        if self.data.path.is_some() && !matches!(self.problem, ProblemConfig::Auc(_)) {
            return err("path", "data files are only read by the auc family");
        }
        if self.sweep.eta.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return err("eta", "sweep rates must be positive");
        }
        if let Err(r) = self.schedule.resolve().and_then(|s| s.validate().map_err(|e| e.to_string())) {
            return err("schedule", &r);
        }
        let probe = &self.probe;
        if probe.grid_x == 0 || probe.grid_y == 0 || probe.pool == 0 {
            return err("probe", "grid sizes and pool must be positive");
        }
        Ok(())
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new(path, "", e.to_string()))?;
    ExperimentConfig::from_toml_str(&text, path)
}

const PRESETS: [(&str, &str); 3] = [
    ("scsc_quadratic", include_str!("../presets/scsc_quadratic.toml")),
    ("auc_cc", include_str!("../presets/auc_cc.toml")),
    ("ncnc_sine", include_str!("../presets/ncnc_sine.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn load_preset(name: &str) -> Result<ExperimentConfig, ConfigError> {
    let text = preset_text(name).ok_or_else(|| ConfigError::new(name, "preset", "no such preset"))?;
    ExperimentConfig::from_toml_str(text, Path::new(name))
}
