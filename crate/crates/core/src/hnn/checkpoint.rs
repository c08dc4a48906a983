use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, TrainConfig};
use crate::{Error, Result};

const CHECKPOINT_VERSION: u32 = 1;

/// A trained model with what is needed to reproduce it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub model: Model,
    pub train_config: TrainConfig,
    /// Hex SHA-256 of the dataset meta the model was trained on.
    pub dataset_meta_hash: String,
}

impl Checkpoint {
    pub fn new(model: Model, train_config: TrainConfig, dataset_meta_hash: String) -> Self {
        Self {
            schema_version: CHECKPOINT_VERSION,
            model,
            train_config,
            dataset_meta_hash,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        fs::write(path, text).map_err(|e| Error::io(format!("write {}", path.display()), e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("read {}", path.display()), e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        if ckpt.schema_version != CHECKPOINT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "{}: unsupported checkpoint version {}",
                path.display(),
                ckpt.schema_version
            )));
        }
        Ok(ckpt)
    }
}
