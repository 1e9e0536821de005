//! Run configuration. Precedence: command-line flags, then the JSON config
//! file, then these defaults.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use hint_core::graph::HintConfig;
use hint_core::protocol::SentenceEncoderSpec;
use serde::{Deserialize, Serialize};

use crate::data::Phase;
use crate::error::{Error, Result};
use crate::formats::{read_text, write_text};

pub const CONFIG_FILE: &str = "config.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub trials: Option<PathBuf>,
    pub ontology: Option<PathBuf>,
    /// Directory holding `<property>.tsv` for the five ADMET properties.
    pub pk_dir: Option<PathBuf>,
    pub risk: Option<PathBuf>,
    pub pretrain_dir: Option<PathBuf>,
    pub model_dir: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub baseline_scores: Option<PathBuf>,
    pub output_dir: PathBuf,

    pub seed: u64,
    pub lr: f64,
    pub admet_lr: f64,
    pub risk_lr: f64,
    pub epochs: usize,
    pub pretrain_epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    /// `hashing:<seed>` or `precomputed:<path>`; unset means `hashing:0`
    /// for training and "whatever the model used" for prediction.
    pub encoder: Option<String>,
    pub split_date: NaiveDate,
    pub validation_fraction: f64,
    pub phase: Option<Phase>,
    pub no_pretrain: bool,
    pub use_gnn: bool,
    pub bootstrap: usize,

    pub synth_n: usize,
    pub synth_missing_fraction: f64,
    pub synth_noise: f64,
    pub synth_aux_n: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            trials: None,
            ontology: None,
            pk_dir: None,
            risk: None,
            pretrain_dir: None,
            model_dir: None,
            scores: None,
            baseline_scores: None,
            output_dir: PathBuf::from("out"),
            seed: 0,
            lr: 5e-4,
            admet_lr: 5e-4,
            risk_lr: 1e-3,
            epochs: 10,
            pretrain_epochs: 10,
            batch_size: 8,
            dropout: 0.6,
            encoder: None,
            split_date: NaiveDate::from_ymd_opt(2014, 8, 13).expect("valid date"),
            validation_fraction: 0.15,
            phase: None,
            no_pretrain: false,
            use_gnn: true,
            bootstrap: 1000,
            synth_n: 2000,
            synth_missing_fraction: 0.0,
            synth_noise: 0.05,
            synth_aux_n: 400,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        serde_json::from_str(&read_text(path)?).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn write_resolved(&self, dir: &Path) -> Result<()> {
        write_text(&dir.join(CONFIG_FILE), &self.to_json())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Input(format!("{name} must be positive, got {v}")))
            }
        };
        positive("lr", self.lr)?;
        positive("admet_lr", self.admet_lr)?;
        positive("risk_lr", self.risk_lr)?;
        if self.epochs == 0 || self.pretrain_epochs == 0 {
            return Err(Error::Input("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Input("batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Input(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if self.bootstrap < 2 {
            return Err(Error::Input("bootstrap must be at least 2".into()));
        }
        self.encoder_spec()?;
        Ok(())
    }

    pub fn encoder_spec(&self) -> Result<SentenceEncoderSpec> {
        match &self.encoder {
            None => Ok(SentenceEncoderSpec::default()),
            Some(s) => s.parse().map_err(|e: hint_core::Error| Error::Input(e.to_string())),
        }
    }

    pub fn model_config(&self) -> HintConfig {
        HintConfig {
            dropout: self.dropout,
            use_gnn: self.use_gnn,
            ..HintConfig::default()
        }
    }

    pub fn require<'a>(&self, field: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
        let p = field.as_deref().ok_or_else(|| Error::Input(format!("`{name}` is required for this command")))?;
        if !p.exists() {
            return Err(Error::Input(format!("{name} path does not exist: {}", p.display())));
        }
        Ok(p)
    }
}
