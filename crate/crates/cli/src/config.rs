//! The run configuration file: one TOML document with the sections
//! `model`, `method`, `train`, `data` and `eval`. Unknown keys are errors.

use std::path::Path;

use asa_core::data::{builtin_domains, DomainSpec, TARGET_SIZE, TRAIN_SIZE};
use asa_core::metrics::{config_hash, ADistanceConfig};
use asa_core::nn::{Backbone, MethodConfig, ModelSpec};
use asa_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fsio;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub seed: u64,
    pub train_size: usize,
    pub target_size: usize,
    /// Source domain first, then the targets.
    pub domains: Vec<DomainSpec>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            train_size: TRAIN_SIZE,
            target_size: TARGET_SIZE,
            domains: builtin_domains(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub batch_size: usize,
    /// Compute 𝒜-distances between the source and every evaluated target.
    pub a_distance: bool,
    pub a_distance_epochs: usize,
    pub a_distance_lr: f64,
    pub pca_dim: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let a = ADistanceConfig::default();
        Self {
            batch_size: 256,
            a_distance: true,
            a_distance_epochs: a.epochs,
            a_distance_lr: a.lr,
            pca_dim: 2,
        }
    }
}

impl EvalConfig {
    pub fn a_distance_config(&self) -> ADistanceConfig {
        ADistanceConfig {
            epochs: self.a_distance_epochs,
            lr: self.a_distance_lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(invalid("eval.batch_size", "must be ≥ 1"));
        }
        if self.a_distance_epochs == 0 {
            return Err(invalid("eval.a_distance_epochs", "must be ≥ 1"));
        }
        if !(self.a_distance_lr > 0.0 && self.a_distance_lr.is_finite()) {
            return Err(invalid("eval.a_distance_lr", format!("{} (need > 0)", self.a_distance_lr)));
        }
        if self.pca_dim == 0 {
            return Err(invalid("eval.pca_dim", "must be ≥ 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: Backbone,
    pub method: MethodConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    /// Parses and validates. Errors name the offending key.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| invalid("config", e.message().to_string() + &span(text, e.span())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fsio::read_text(path, "--config")?;
        Self::from_toml(&text).map_err(|e| match e {
            crate::CliError::Invalid { key, msg } => invalid(format!("{}: {key}", path.display()), msg),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            backbone: self.model.clone(),
            method: self.method.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model_spec().validate()?;
        self.train.validate()?;
        self.eval.validate()?;
        if self.data.train_size == 0 {
            return Err(invalid("data.train_size", "must be ≥ 1"));
        }
        if self.data.target_size == 0 {
            return Err(invalid("data.target_size", "must be ≥ 1"));
        }
        for d in &self.data.domains {
            d.validate()?;
        }
        Ok(())
    }

    /// Short digest of the canonical serialization.
    pub fn hash(&self) -> String {
        config_hash(&self.to_toml())
    }
}

fn span(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) => {
            let line = text[..r.start.min(text.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use asa_core::nn::{InsertionPoint, Method};
    use asa_core::train::AsaMode;

    #[test]
    fn default_round_trips() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn edited_config_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.method.kind = Method::AdvStyle;
        cfg.method.points = InsertionPoint::ALL.to_vec();
        cfg.method.lambda = 0.1;
        cfg.train.asa_mode = AsaMode::Iterative;
        cfg.train.lr = 0.003;
        cfg.data.domains[1].gain_jitter = 0.07;
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = RunConfig::from_toml("[method]\nkind = \"dsu\"\n").unwrap();
        assert_eq!(cfg.method.kind, Method::Dsu);
        assert_eq!(cfg.train, TrainConfig::default());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_toml("[train]\nepochz = 3\n").unwrap_err();
        assert!(err.to_string().contains("epochz"), "{err}");
        assert_eq!(err.exit_code(), 1);
        let err = RunConfig::from_toml("[optim]\nlr = 3\n").unwrap_err();
        assert!(err.to_string().contains("optim"), "{err}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        let err = RunConfig::from_toml("[train]\nlr = -1.0\n").unwrap_err();
        assert!(err.to_string().contains("lr"), "{err}");
        let err = RunConfig::from_toml("[eval]\npca_dim = 0\n").unwrap_err();
        assert!(err.to_string().contains("eval.pca_dim"), "{err}");
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.train.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }
}
