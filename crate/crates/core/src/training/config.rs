use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::schedule::TrainHyper;
use crate::audio::TaskProfile;
use crate::error::{Error, Result};
use crate::model::ModelConfig;

fn d_val_fraction() -> f64 {
    0.25
}
fn d_rate() -> u32 {
    22050
}

/// Training config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    #[serde(flatten)]
    pub hyper: TrainHyper,
    #[serde(default)]
    pub dataset_dir: Option<PathBuf>,
    #[serde(default = "d_val_fraction")]
    pub val_fraction: f64,
    #[serde(default = "d_rate")]
    pub sample_rate: u32,
    /// Source names in output order; defaults to the task profile implied
    /// by the source count.
    #[serde(default)]
    pub source_names: Option<Vec<String>>,
}

impl TrainConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg: TrainConfig = serde_json::from_value(raw.clone()).map_err(|e| Error::Config(e.to_string()))?;
        // Flattening disables serde's unknown-field check; a misspelt key
        // would otherwise fall back to its default silently.
        let known = serde_json::to_value(&cfg)?;
        if let (Some(given), Some(known)) = (raw.as_object(), known.as_object()) {
            if let Some(key) = given.keys().find(|k| !known.contains_key(*k)) {
                return Err(Error::Config(format!("unknown field `{key}`")));
            }
        }
        cfg.model.validate()?;
        if !(0.0..1.0).contains(&cfg.val_fraction) {
            return Err(Error::Config("val_fraction must be in [0, 1)".into()));
        }
        if cfg.hyper.batch == 0 || cfg.hyper.iterations_per_epoch == 0 {
            return Err(Error::Config("batch and iterations_per_epoch must be >= 1".into()));
        }
        if cfg.sources().len() != cfg.model.sources {
            return Err(Error::Config(format!(
                "{} source names for a {}-source model",
                cfg.sources().len(),
                cfg.model.sources
            )));
        }
        Ok(cfg)
    }

    pub fn sources(&self) -> Vec<String> {
        match &self.source_names {
            Some(names) => names.clone(),
            None => TaskProfile::for_sources(self.model.sources)
                .map(|p| p.source_names())
                .unwrap_or_else(|| (0..self.model.sources).map(|k| format!("source{k}")).collect()),
        }
    }
}
