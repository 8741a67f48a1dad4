//! Pipeline configuration file (TOML).
//!
//! ```toml
//! seed = 7
//!
//! [data]
//! csv = "frappe.csv"          # or a [data.synthetic] table
//! label = "label"
//! delimiter = ","
//! ratios = [0.7, 0.2, 0.1]
//!
//! [model]
//! embedding_dim = 16
//! hidden = [64, 64]
//! learning_rate = 0.001
//! batch_size = 1024
//! max_epochs = 100
//! patience = 2
//!
//! [scorer]
//! batch_size = 1024
//! target = "loss"             # or "logit"
//! expansion = "record_mean"   # or "table_mean"
//! fraction = 1.0
//!
//! [selection]
//! k = 5
//! window_size = 10
//! max_iterations = 1
//! max_order = 3
//! tau = 5000000
//!
//! [selection.surrogate]
//! learning_rate = 0.01
//! epochs = 5
//! batch_size = 256
//! l2 = 1e-6
//! ```
//!
//! Every section and key is optional except the data source.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tayfcs_core::data::{PlantedCombo, SyntheticSpec};
use tayfcs_core::hash::derive_seed;
use tayfcs_core::lre::SelectionConfig;
use tayfcs_core::models::{DnnConfig, LrConfig};
use tayfcs_core::nn::{AdamConfig, SignalTarget, TrainConfig};
use tayfcs_core::tayscorer::{ExpansionMode, ScorerConfig};

use crate::error::{Error, Result};
use crate::formats::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    pub data: DataSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub scorer: ScorerSection,
    #[serde(default)]
    pub selection: SelectionSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default = "default_label")]
    pub label: String,
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
    #[serde(default = "default_ratios")]
    pub ratios: [f64; 3],
    #[serde(default)]
    pub synthetic: Option<SyntheticSection>,
}

/// Synthetic source; records are drawn with the pipeline seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub cardinalities: Vec<u32>,
    #[serde(default)]
    pub planted: Vec<PlantedCombo>,
    #[serde(default)]
    pub bias: f64,
    #[serde(default)]
    pub noise: f64,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub embedding_dim: usize,
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            embedding_dim: 16,
            hidden: vec![64, 64],
            learning_rate: 1e-3,
            batch_size: 1024,
            max_epochs: 100,
            patience: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScorerSection {
    pub batch_size: usize,
    pub target: SignalTarget,
    pub expansion: ExpansionMode,
    pub fraction: f64,
}

impl Default for ScorerSection {
    fn default() -> Self {
        Self {
            batch_size: 1024,
            target: SignalTarget::Loss,
            expansion: ExpansionMode::RecordMean,
            fraction: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionSection {
    pub k: usize,
    pub window_size: usize,
    pub max_iterations: usize,
    pub max_order: usize,
    pub tau: u32,
    pub surrogate: SurrogateSection,
}

impl Default for SelectionSection {
    fn default() -> Self {
        let d = SelectionConfig::default();
        Self {
            k: d.k,
            window_size: d.window_size,
            max_iterations: d.max_iterations,
            max_order: d.max_order,
            tau: d.tau,
            surrogate: SurrogateSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateSection {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
}

impl Default for SurrogateSection {
    fn default() -> Self {
        let d = LrConfig::default();
        Self {
            learning_rate: d.learning_rate,
            epochs: d.epochs,
            batch_size: d.batch_size,
            l2: d.l2,
        }
    }
}

fn default_label() -> String {
    "label".into()
}

fn default_delimiter() -> String {
    ",".into()
}

fn default_ratios() -> [f64; 3] {
    [0.7, 0.2, 0.1]
}

/// Streams of the master seed.
const STREAM_MODEL_INIT: u64 = 1;
const STREAM_TRAIN: u64 = 2;
const STREAM_SCORER: u64 = 3;
const STREAM_SELECTION: u64 = 4;
const STREAM_SYNTHETIC: u64 = 5;

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(csv) = &cfg.data.csv {
            if csv.is_relative() {
                cfg.data.csv = Some(path.parent().unwrap_or(Path::new(".")).join(csv));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.data.csv, &self.data.synthetic) {
            (Some(_), Some(_)) => return Err(Error::Config("data.csv and data.synthetic are exclusive".into())),
            (None, None) => return Err(Error::Config("set data.csv or data.synthetic".into())),
            _ => {}
        }
        if self.data.delimiter.len() != 1 {
            return Err(Error::Config("data.delimiter must be a single byte".into()));
        }
        tayfcs_core::data::split_sizes(0, self.data.ratios)?;
        if let Some(spec) = self.synthetic_spec() {
            spec.validate()?;
        }
        if self.model.embedding_dim == 0 || self.model.batch_size == 0 || self.model.max_epochs == 0 {
            return Err(Error::Config("model dims, batch size and epochs must be positive".into()));
        }
        if !(self.model.learning_rate >= 0.0) {
            return Err(Error::Config("model.learning_rate must be >= 0".into()));
        }
        self.scorer_config().validate()?;
        let selection = self.selection_config();
        // k = 0 disables augmentation; the remaining bounds still apply
        tayfcs_core::lre::SelectionConfig {
            k: selection.k.max(1),
            ..selection
        }
        .validate()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }

    pub fn delimiter(&self) -> u8 {
        self.data.delimiter.as_bytes()[0]
    }

    pub fn synthetic_spec(&self) -> Option<SyntheticSpec> {
        self.data.synthetic.as_ref().map(|s| SyntheticSpec {
            cardinalities: s.cardinalities.clone(),
            planted: s.planted.clone(),
            bias: s.bias,
            noise: s.noise,
            records: s.records,
            seed: derive_seed(self.seed, STREAM_SYNTHETIC),
        })
    }

    pub fn dnn_config(&self) -> DnnConfig {
        DnnConfig {
            embedding_dim: self.model.embedding_dim,
            hidden: self.model.hidden.clone(),
            seed: derive_seed(self.seed, STREAM_MODEL_INIT),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            max_epochs: self.model.max_epochs,
            batch_size: self.model.batch_size,
            adam: AdamConfig {
                lr: self.model.learning_rate,
                ..AdamConfig::default()
            },
            patience: self.model.patience,
            seed: derive_seed(self.seed, STREAM_TRAIN),
        }
    }

    pub fn scorer_config(&self) -> ScorerConfig {
        ScorerConfig {
            max_order: self.selection.max_order,
            batch_size: self.scorer.batch_size,
            target: self.scorer.target,
            expansion: self.scorer.expansion,
            fraction: self.scorer.fraction,
            seed: derive_seed(self.seed, STREAM_SCORER),
        }
    }

    pub fn selection_config(&self) -> SelectionConfig {
        let s = &self.selection;
        SelectionConfig {
            k: s.k,
            window_size: s.window_size,
            max_iterations: s.max_iterations,
            max_order: s.max_order,
            scoring_fraction: self.scorer.fraction,
            tau: s.tau,
            seed: derive_seed(self.seed, STREAM_SELECTION),
            surrogate: LrConfig {
                learning_rate: s.surrogate.learning_rate,
                epochs: s.surrogate.epochs,
                batch_size: s.surrogate.batch_size,
                l2: s.surrogate.l2,
                seed: 0,
            },
        }
    }
}
