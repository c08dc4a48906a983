use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::data::{DatasetConfig, Task};
use crate::hash::sha256_hex;
use crate::hnn::{ModelKind, TrainConfig};
use crate::pixels::{PixelConfig, PixelTrainConfig};
use crate::{Error, Result};

/// Task name of the pixel pendulum experiment.
pub const PIXEL_TASK: &str = "pixel_pendulum";

/// Dataset and training settings of an experiment.
#[derive(Clone, Debug, PartialEq)]
pub enum Setup {
    Phase {
        dataset: DatasetConfig,
        train: TrainConfig,
    },
    Pixel {
        dataset: PixelConfig,
        train: PixelTrainConfig,
    },
}

/// One experiment: a task with its dataset and training settings, the
/// models to compare and the seeds to run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Document", into = "Document")]
pub struct ExperimentConfig {
    pub setup: Setup,
    pub models: Vec<ModelKind>,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
}

/// On-disk form; `dataset` and `train` are read according to `task`.
#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    task: String,
    dataset: Value,
    train: Value,
    models: Vec<ModelKind>,
    seeds: Vec<u64>,
    output: PathBuf,
}

fn section<T: serde::de::DeserializeOwned>(name: &str, v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::InvalidConfig(format!("{name}: {e}")))
}

impl TryFrom<Document> for ExperimentConfig {
    type Error = Error;

    fn try_from(d: Document) -> Result<Self> {
        let setup = if d.task == PIXEL_TASK {
            Setup::Pixel {
                dataset: section("dataset", d.dataset)?,
                train: section("train", d.train)?,
            }
        } else {
            let task: Task = section("task", Value::String(d.task.clone()))?;
            let dataset: DatasetConfig = section("dataset", d.dataset)?;
            if dataset.task != task {
                return Err(Error::InvalidConfig(format!(
                    "experiment task {} but dataset task {}",
                    task.name(),
                    dataset.task.name()
                )));
            }
            Setup::Phase {
                dataset,
                train: section("train", d.train)?,
            }
        };
        Ok(Self {
            setup,
            models: d.models,
            seeds: d.seeds,
            output: d.output,
        })
    }
}

impl From<ExperimentConfig> for Document {
    fn from(c: ExperimentConfig) -> Self {
        let task = c.task_name().to_string();
        let (dataset, train) = match c.setup {
            Setup::Phase { dataset, train } => {
                (serde_json::to_value(dataset), serde_json::to_value(train))
            }
            Setup::Pixel { dataset, train } => {
                (serde_json::to_value(dataset), serde_json::to_value(train))
            }
        };
        Document {
            task,
            dataset: dataset.expect("configs serialize"),
            train: train.expect("configs serialize"),
            models: c.models,
            seeds: c.seeds,
            output: c.output,
        }
    }
}

impl ExperimentConfig {
    /// Defaults for a task name (`mass_spring`, ..., `pixel_pendulum`),
    /// both models, seeds 0..3 and output `runs/<task>`.
    pub fn default_for(task: &str) -> Result<Self> {
        let setup = if task == PIXEL_TASK {
            Setup::Pixel {
                dataset: PixelConfig::default(),
                train: PixelTrainConfig::default(),
            }
        } else {
            let t: Task = section("task", Value::String(task.to_string()))?;
            Setup::Phase {
                dataset: DatasetConfig::for_task(t),
                train: TrainConfig::for_task(t),
            }
        };
        Ok(Self {
            setup,
            models: vec![ModelKind::Baseline, ModelKind::Hnn],
            seeds: vec![0, 1, 2],
            output: PathBuf::from("runs").join(task),
        })
    }

    pub fn task_name(&self) -> &str {
        match &self.setup {
            Setup::Phase { dataset, .. } => dataset.task.name(),
            Setup::Pixel { .. } => PIXEL_TASK,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidConfig(
                "models and seeds must be non-empty".into(),
            ));
        }
        let mut seen = Vec::new();
        for m in &self.models {
            if seen.contains(m) {
                return Err(Error::InvalidConfig(format!(
                    "model {} listed twice",
                    m.name()
                )));
            }
            seen.push(*m);
        }
        match &self.setup {
            Setup::Phase { dataset, train } => {
                dataset.validate()?;
                train.validate()
            }
            Setup::Pixel { dataset, train } => {
                dataset.validate()?;
                train.validate()
            }
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("read {}", path.display()), e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the compact serialization.
    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(serde_json::to_string(self)?.as_bytes()))
    }
}
