//! One structured config file drives every subcommand, with command-line
//! overrides layered on top. Unknown keys are rejected; every run writes the
//! fully-resolved config next to its outputs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::SynthSpec;
use crate::error::{Error, Result};
use crate::model::ModelDims;
use crate::train::TrainConfig;

/// Network widths. The published architecture uses hidden = 1024 and
/// inter_hidden = 512; the default here is desk-scale so the synthetic
/// benchmark trains in minutes on a CPU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hidden: usize,
    pub inter_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: 32,
            inter_hidden: 32,
        }
    }
}

impl ModelConfig {
    pub fn dims(&self, d_img: usize, d_txt: usize, classes: usize) -> ModelDims {
        ModelDims::new(d_img, d_txt, classes).with_hidden(self.hidden, self.inter_hidden)
    }
}

/// Retrieval protocol switches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Drop the query instance itself from the all-modal candidate pool; its
    /// paired instance in the other modality remains a legitimate target.
    pub exclude_query: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { exclude_query: true }
    }
}

/// Train/validation/test fractions for `synth`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train: 0.8,
            val: 0.1,
            test: 0.1,
            seed: 0,
        }
    }
}

impl SplitConfig {
    pub fn fractions(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }
}

/// Everything a run needs, serialized as TOML with full defaulting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub synth: SynthSpec,
    pub split: SplitConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn from_toml_str(body: &str) -> Result<Self> {
        toml::from_str(body).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml_str(&body)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Writes the fully-resolved config beside a run's outputs.
    pub fn write_resolved(&self, dir: &Path, name: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let path = dir.join(format!("{name}.resolved.toml"));
        std::fs::write(&path, self.to_toml())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.train.validate()?;
        if self.model.hidden == 0 || self.model.inter_hidden == 0 {
            return Err(Error::Config("model widths must be >= 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_yields_defaults() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.train.batch_size, 64);
        assert_eq!(cfg.train.epochs, 200);
        assert_eq!(cfg.split.fractions(), [0.8, 0.1, 0.1]);
        assert!(cfg.eval.exclude_query);
        cfg.validate().unwrap();
    }

    #[test]
    fn partial_sections_keep_remaining_defaults() {
        let cfg = RunConfig::from_toml_str(
            "[train]\nepochs = 5\n\n[model]\nhidden = 16\n",
        )
        .unwrap();
        assert_eq!(cfg.train.epochs, 5);
        assert_eq!(cfg.train.batch_size, 64);
        assert_eq!(cfg.model.hidden, 16);
        assert_eq!(cfg.model.inter_hidden, ModelConfig::default().inter_hidden);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for body in [
            "[train]\nlearningrate = 0.1\n",
            "[synth]\nclases = 5\n",
            "[nonsense]\nx = 1\n",
        ] {
            assert!(matches!(
                RunConfig::from_toml_str(body),
                Err(Error::Config(_))
            ));
        }
    }

    #[test]
    fn serialization_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.train.epochs = 7;
        cfg.synth.classes = 4;
        cfg.model.hidden = 48;
        let body = cfg.to_toml();
        let back = RunConfig::from_toml_str(&body).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn resolved_config_is_written_next_to_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::default();
        cfg.write_resolved(dir.path(), "train").unwrap();
        let body = std::fs::read_to_string(dir.path().join("train.resolved.toml")).unwrap();
        assert_eq!(RunConfig::from_toml_str(&body).unwrap(), cfg);
    }

    #[test]
    fn validation_flags_zero_widths() {
        let mut cfg = RunConfig::default();
        cfg.model.hidden = 0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn dims_carry_config_widths() {
        let mc = ModelConfig { hidden: 20, inter_hidden: 10 };
        let dims = mc.dims(64, 50, 10);
        assert_eq!(
            (dims.d_img, dims.d_txt, dims.classes, dims.hidden, dims.inter_hidden),
            (64, 50, 10, 20, 10)
        );
    }
}
