//! Versioned checkpoint document: the fitted feature pipeline, the model
//! tensors (or LDA statistics), training configuration and history, and the
//! fold's audit entries.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::audit::AuditEntry;
use super::prep::FeaturePipeline;
use super::Scheme;
use crate::augment::AugmentConfig;
use crate::error::{Error, Result};
use crate::lda::LdaModel;
use crate::neural::model::{Backbone, Head, Model, ModelConfig};
use crate::neural::{History, ParamSet, Tensor, TrainConfig};
use crate::synthgen::dataset::TrialId;
use crate::vicreg::VicregConfig;

pub const FORMAT: &str = "dynamyo-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StoredModel {
    Lda {
        lda: serde_json::Value,
    },
    Lstm {
        config: ModelConfig,
        /// `backbone.*` and `head.*` tensors, row-major.
        tensors: Vec<Tensor>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedHistory {
    pub stage: String,
    pub history: History,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub scheme: Scheme,
    pub subject: usize,
    pub fold: usize,
    pub dataset: PathBuf,
    pub seed: u64,
    pub train_trials: Vec<TrialId>,
    pub validation_trials: Vec<TrialId>,
    pub test_trials: Vec<TrialId>,
    pub sequence_length: usize,
    pub pipeline: FeaturePipeline,
    pub model: StoredModel,
    pub train_config: Option<TrainConfig>,
    pub vicreg: Option<VicregConfig>,
    pub augment: Option<AugmentConfig>,
    pub histories: Vec<NamedHistory>,
    /// Per-dimension std of the pre-trained embeddings on validation windows.
    pub validation_embedding_std: Option<Vec<f64>>,
    pub audit: Vec<AuditEntry>,
}

/// A checkpoint's model, ready to classify.
pub enum LoadedModel {
    Lda(LdaModel),
    Lstm(Model),
}

pub fn lstm_model(model: &Model, cfg: &ModelConfig) -> StoredModel {
    StoredModel::Lstm {
        config: cfg.clone(),
        tensors: model.to_tensors(),
    }
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        super::results::write_atomic(path, |tmp| {
            serde_json::to_writer(BufWriter::new(File::create(tmp)?), self)?;
            Ok(())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::data(path, e))?;
        let c: Checkpoint = serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::data(path, e))?;
        if c.format != FORMAT || c.version != VERSION {
            return Err(Error::data(path, format!("unsupported checkpoint {} v{}", c.format, c.version)));
        }
        Ok(c)
    }

    pub fn model(&self) -> Result<LoadedModel> {
        match &self.model {
            StoredModel::Lda { lda } => Ok(LoadedModel::Lda(LdaModel::from_value(lda.clone())?)),
            StoredModel::Lstm { config, tensors } => {
                config.validate()?;
                // Shapes come from the config; values are overwritten below.
                let mut r = crate::rng::stream(0, &[]);
                let mut m = Model {
                    backbone: Backbone::new(config, &mut r),
                    head: Head::new(config.embedding_dim, config.num_classes, &mut r),
                };
                m.load_tensors(tensors)?;
                Ok(LoadedModel::Lstm(m))
            }
        }
    }
}
