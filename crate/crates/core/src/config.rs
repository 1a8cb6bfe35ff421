//! Experiment configuration: one flat JSON object per run.
//!
//! Every key is optional except `name`, `model`, the lattice size and
//! `cell`; unknown keys are rejected. Units: couplings and fields in units of
//! the energy scale of the Hamiltonian, learning rates per optimizer step,
//! `lr_decay_steps` in optimizer steps, `curvature` as the ball constant `c`.

use crate::ansatz::{AnsatzConfig, CellKind, Lattice};
use crate::hamiltonian::{HamiltonianSpec, ModelKind};
use crate::vmc::{AdamConfig, ClipMode, TrainConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Environment variable that replaces `output_dir` for every run.
pub const OUTPUT_ROOT_ENV: &str = "HYPVMC_OUTPUT_ROOT";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
}

pub type Result<T> = std::result::Result<T, ConfigError>;

fn invalid<T>(key: &'static str, message: impl Into<String>) -> Result<T> {
    Err(ConfigError::Invalid {
        key,
        message: message.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Free text kept with the config, e.g. a description or units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,

    pub model: ModelKind,
    /// Chain length (TFIM1D, J1J2, J1J2J3).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Grid shape (TFIM2D).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    #[serde(default = "one")]
    pub j: f64,
    #[serde(default = "one")]
    pub b: f64,
    #[serde(default = "one")]
    pub j1: f64,
    #[serde(default)]
    pub j2: f64,
    #[serde(default)]
    pub j3: f64,

    pub cell: CellKind,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    /// Defaults to true for the Heisenberg models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complex: Option<bool>,
    #[serde(default = "one")]
    pub curvature: f64,
    /// Defaults to true for the Heisenberg models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marshall_sign: Option<bool>,

    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_steps")]
    pub steps_per_epoch: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_adam_eps")]
    pub adam_eps: f64,
    #[serde(default = "default_decay")]
    pub lr_decay: f64,
    #[serde(default = "default_decay_steps")]
    pub lr_decay_steps: f64,
    #[serde(default = "default_rsgd_lr")]
    pub rsgd_lr: f64,
    /// `none`, `value:<v>` or `norm:<m>`; defaults to `none` for TFIM and
    /// `norm:1` for the Heisenberg models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<String>,
    /// Defaults to 1 for TFIM and 10 for the Heisenberg models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance_tolerance: Option<f64>,
    #[serde(default = "default_inference")]
    pub inference_samples: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn one() -> f64 {
    1.0
}
fn default_hidden() -> usize {
    50
}
fn default_epochs() -> usize {
    120
}
fn default_steps() -> usize {
    10
}
fn default_batch() -> usize {
    50
}
fn default_lr() -> f64 {
    AdamConfig::default().lr
}
fn default_beta1() -> f64 {
    AdamConfig::default().beta1
}
fn default_beta2() -> f64 {
    AdamConfig::default().beta2
}
fn default_adam_eps() -> f64 {
    AdamConfig::default().eps
}
fn default_decay() -> f64 {
    AdamConfig::default().decay
}
fn default_decay_steps() -> f64 {
    AdamConfig::default().decay_steps
}
fn default_rsgd_lr() -> f64 {
    1e-2
}
fn default_inference() -> usize {
    10_000
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

/// A config whose every field has been checked and turned into engine types.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub name: String,
    pub spec: HamiltonianSpec,
    pub ansatz: AnsatzConfig,
    pub train: TrainConfig,
    pub inference_samples: usize,
    pub output_dir: PathBuf,
}

impl Experiment {
    /// `<output root>/<name>`, where the root may be overridden from the
    /// environment.
    pub fn run_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if !root.is_empty() => PathBuf::from(root).join(&self.name),
            _ => self.output_dir.join(&self.name),
        }
    }
}

impl ExperimentConfig {
    /// Minimal config with every optional key at its default.
    pub fn new(name: &str, model: ModelKind, cell: CellKind) -> Self {
        serde_json::from_value(serde_json::json!({
            "name": name,
            "model": model,
            "cell": cell,
        }))
        .expect("defaults deserialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn is_heisenberg(&self) -> bool {
        !self.model.is_ising()
    }

    pub fn lattice(&self) -> Result<Lattice> {
        let positive = |key, v: Option<usize>| match v {
            Some(v) if v >= 1 => Ok(v),
            Some(_) => invalid(key, "must be positive"),
            None => invalid(key, format!("required for {}", self.model)),
        };
        match self.model {
            ModelKind::Tfim2D => {
                if self.n.is_some() {
                    return invalid("n", "TFIM2D takes `rows` and `cols`");
                }
                Ok(Lattice::Grid(positive("rows", self.rows)?, positive("cols", self.cols)?))
            }
            _ => {
                if self.rows.is_some() || self.cols.is_some() {
                    return invalid("rows", format!("{} takes `n`", self.model));
                }
                Ok(Lattice::Chain(positive("n", self.n)?))
            }
        }
    }

    pub fn spec(&self) -> Result<HamiltonianSpec> {
        let lattice = self.lattice()?;
        let spec = match (self.model, lattice) {
            (ModelKind::Tfim1D, Lattice::Chain(n)) => HamiltonianSpec::tfim1d(n, self.j, self.b),
            (ModelKind::Tfim2D, Lattice::Grid(r, c)) => HamiltonianSpec::tfim2d(r, c, self.j, self.b),
            (ModelKind::J1J2, Lattice::Chain(n)) => {
                if self.j3 != 0.0 {
                    return invalid("j3", "J1J2 has no third-neighbour coupling; use J1J2J3");
                }
                HamiltonianSpec::j1j2(n, self.j1, self.j2)
            }
            (ModelKind::J1J2J3, Lattice::Chain(n)) => HamiltonianSpec::j1j2j3(n, self.j1, self.j2, self.j3),
            _ => unreachable!("lattice() matches the model"),
        };
        spec.validate().or_else(|e| invalid("model", e.to_string()))?;
        Ok(spec)
    }

    pub fn ansatz(&self) -> Result<AnsatzConfig> {
        let lattice = self.lattice()?;
        let cfg = AnsatzConfig::new(self.cell, self.hidden, lattice)
            .complex(self.complex.unwrap_or(self.is_heisenberg()))
            .curvature(self.curvature)
            .marshall(self.marshall_sign.unwrap_or(self.is_heisenberg()));
        cfg.validate().or_else(|e| invalid("cell", e.to_string()))?;
        Ok(cfg)
    }

    pub fn clip_mode(&self) -> Result<ClipMode> {
        match &self.clip {
            Some(s) => s.parse().or_else(|e: String| invalid("clip", e)),
            None if self.is_heisenberg() => Ok(ClipMode::Norm(1.0)),
            None => Ok(ClipMode::None),
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let mut t = TrainConfig::new(self.epochs, self.seed);
        t.steps_per_epoch = self.steps_per_epoch;
        t.batch_size = self.batch_size;
        t.adam = AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
            decay: self.lr_decay,
            decay_steps: self.lr_decay_steps,
        };
        t.rsgd_lr = self.rsgd_lr;
        t.clip = self.clip_mode()?;
        t.variance_tolerance = self
            .variance_tolerance
            .unwrap_or(if self.is_heisenberg() { 10.0 } else { 1.0 });
        t.validate().or_else(|e| invalid("epochs", e.to_string()))?;
        Ok(t)
    }

    /// Check every field and build the engine-side types.
    pub fn validate(&self) -> Result<Experiment> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
            || self.name.starts_with('.')
        {
            return invalid("name", format!("`{}` must be non-empty [A-Za-z0-9._-]", self.name));
        }
        if self.inference_samples == 0 {
            return invalid("inference_samples", "must be positive");
        }
        Ok(Experiment {
            name: self.name.clone(),
            spec: self.spec()?,
            ansatz: self.ansatz()?,
            train: self.train_config()?,
            inference_samples: self.inference_samples,
            output_dir: self.output_dir.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_tfim_config_gets_defaults() {
        let c = ExperimentConfig::from_json(r#"{"name":"t","model":"TFIM1D","n":20,"cell":"eGRU"}"#).unwrap();
        let e = c.validate().unwrap();
        assert_eq!(e.spec, HamiltonianSpec::tfim1d(20, 1.0, 1.0));
        assert_eq!(e.ansatz.hidden, 50);
        assert!(!e.ansatz.complex && !e.ansatz.marshall_sign);
        assert_eq!(e.train.batch_size, 50);
        assert_eq!(e.train.epochs, 120);
        assert_eq!(e.train.clip, ClipMode::None);
        assert_eq!(e.train.variance_tolerance, 1.0);
        assert_eq!(e.inference_samples, 10_000);
    }

    #[test]
    fn heisenberg_defaults() {
        let c = ExperimentConfig::from_json(
            r#"{"name":"h","model":"J1J2","n":10,"j2":0.5,"cell":"hGRU","hidden":8}"#,
        )
        .unwrap();
        let e = c.validate().unwrap();
        assert!(e.ansatz.complex && e.ansatz.marshall_sign);
        assert_eq!(e.train.clip, ClipMode::Norm(1.0));
        assert_eq!(e.train.variance_tolerance, 10.0);
    }

    #[test]
    fn unknown_and_malformed_keys_are_rejected() {
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"name":"t","model":"TFIM1D","n":4,"cell":"eGRU","hiden":4}"#),
            Err(ConfigError::Parse(_))
        ));
        assert!(ExperimentConfig::from_json(r#"{"name":"t","model":"TFIM3D","n":4,"cell":"eGRU"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"name":"t","model":"TFIM1D","n":-4,"cell":"eGRU"}"#).is_err());
    }

    #[test]
    fn semantic_validation() {
        let base = ExperimentConfig::new("t", ModelKind::Tfim1D, CellKind::EGru);
        assert!(matches!(base.validate(), Err(ConfigError::Invalid { key: "n", .. })));
        let mut c = base.clone();
        c.n = Some(4);
        assert!(c.validate().is_ok());
        c.clip = Some("norm:0".into());
        assert!(matches!(c.validate(), Err(ConfigError::Invalid { key: "clip", .. })));
        let mut c = base.clone();
        c.n = Some(4);
        c.cell = CellKind::ERnn2D;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.n = Some(4);
        c.name = "../escape".into();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::new("g", ModelKind::Tfim2D, CellKind::ERnn2D);
        c.rows = Some(3);
        c.cols = Some(2);
        assert_eq!(c.validate().unwrap().ansatz.lattice, Lattice::Grid(3, 2));
        c.n = Some(6);
        assert!(c.validate().is_err());
    }

    #[test]
    fn json_roundtrip() {
        let mut c = ExperimentConfig::new("t", ModelKind::J1J2J3, CellKind::HGru);
        c.n = Some(30);
        c.j2 = 0.2;
        c.j3 = 0.5;
        c.clip = Some("value:2".into());
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
    }
}
