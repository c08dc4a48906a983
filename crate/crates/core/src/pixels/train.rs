use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{PixelDataset, TupleIndex};
use super::model::{LossWeights, PixelLoss, PixelModel};
use crate::diffcore::{AdamConfig, AdamState};
use crate::dynamics::fmt_f64;
use crate::hnn::ModelKind;
use crate::{Error, Result};

/// Tuples per forward pass when scoring a whole split.
const EVAL_CHUNK: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PixelTrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub eval_every: usize,
    /// Width of the autoencoder's hidden layers.
    pub ae_hidden: usize,
    /// Hidden widths of the latent dynamics net.
    pub dynamics_hidden: Vec<usize>,
    pub loss_weights: LossWeights,
    /// Initial steps that train on the reconstruction term alone.
    #[serde(default)]
    pub warmup_steps: usize,
}

impl Default for PixelTrainConfig {
    fn default() -> Self {
        Self {
            steps: 10_000,
            batch_size: 200,
            learning_rate: 1e-3,
            weight_decay: 1e-5,
            seed: 0,
            eval_every: 200,
            ae_hidden: 200,
            dynamics_hidden: vec![200, 200],
            // Unit weights collapse the latent to a constant within a few
            // hundred steps; these keep it alive.
            loss_weights: LossWeights {
                ae: 1.0,
                hnn: 1e-3,
                cc: 1e-2,
            },
            warmup_steps: 500,
        }
    }
}

impl PixelTrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.adam().validate()?;
        if self.batch_size == 0 || self.eval_every == 0 || self.ae_hidden == 0 {
            return Err(Error::InvalidConfig(
                "batch_size, eval_every and ae_hidden must be positive".into(),
            ));
        }
        if self.dynamics_hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidConfig(
                "hidden layer widths must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelEvalRecord {
    pub step: usize,
    pub train: PixelLoss,
    pub test: PixelLoss,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PixelHistory {
    pub records: Vec<PixelEvalRecord>,
}

impl PixelHistory {
    pub fn first(&self) -> Option<&PixelEvalRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&PixelEvalRecord> {
        self.records.last()
    }

    /// One row per evaluation with every loss component of both splits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "step,train_total,train_ae,train_hnn,train_cc,test_total,test_ae,test_hnn,test_cc"
        )?;
        for r in &self.records {
            let cols = [r.train, r.test]
                .iter()
                .flat_map(|l| [l.total, l.ae, l.hnn, l.cc])
                .map(fmt_f64)
                .collect::<Vec<_>>();
            writeln!(out, "{},{}", r.step, cols.join(","))?;
        }
        Ok(())
    }
}

const CHECKPOINT_VERSION: u32 = 1;

/// A trained pixel model with its training config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelCheckpoint {
    pub schema_version: u32,
    pub model: PixelModel,
    pub train_config: PixelTrainConfig,
    /// Hex SHA-256 of the pixel dataset config.
    pub dataset_hash: String,
}

impl PixelCheckpoint {
    pub fn new(model: PixelModel, train_config: PixelTrainConfig, dataset_hash: String) -> Self {
        Self {
            schema_version: CHECKPOINT_VERSION,
            model,
            train_config,
            dataset_hash,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)? + "\n";
        fs::write(path, text).map_err(|e| Error::io(format!("write {}", path.display()), e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("read {}", path.display()), e))?;
        let ckpt: PixelCheckpoint = serde_json::from_str(&text)?;
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

/// Mean loss over every tuple, in chunks.
pub fn evaluate_pixel_loss(
    model: &PixelModel,
    data: &PixelDataset,
    tuples: &[TupleIndex],
    w: LossWeights,
) -> Result<PixelLoss> {
    if tuples.is_empty() {
        return Err(Error::Contract("no tuples to evaluate".into()));
    }
    let mut acc = PixelLoss::default();
    for chunk in tuples.chunks(EVAL_CHUNK) {
        let (x0, x1) = data.tuple_batch(chunk);
        let l = model.loss(x0.view(), x1.view(), data.config.dt, w)?;
        let f = chunk.len() as f64 / tuples.len() as f64;
        acc.total += f * l.total;
        acc.ae += f * l.ae;
        acc.hnn += f * l.hnn;
        acc.cc += f * l.cc;
    }
    Ok(acc)
}

/// Joint Adam training of the autoencoder and the latent dynamics net on
/// tuples drawn with replacement from the training trajectories.
pub fn train_pixel(
    kind: ModelKind,
    data: &PixelDataset,
    cfg: &PixelTrainConfig,
) -> Result<(PixelModel, PixelHistory)> {
    cfg.validate()?;
    data.config.validate()?;
    let mut model = PixelModel::init(
        kind,
        data.config.pair_len(),
        cfg.ae_hidden,
        &cfg.dynamics_hidden,
        cfg.seed,
    )?;
    let adam = cfg.adam();
    let mut opt_enc = AdamState::new(&model.encoder.params, adam)?;
    let mut opt_dec = AdamState::new(&model.decoder.params, adam)?;
    let mut opt_dyn = AdamState::new(&model.dynamics, adam)?;
    let train_tuples = data.tuples(data.train_ids());
    let test_tuples = data.tuples(data.test_ids());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let w = cfg.loss_weights;
    let mut history = PixelHistory::default();
    let record = |model: &PixelModel, step: usize, history: &mut PixelHistory| -> Result<()> {
        let train = evaluate_pixel_loss(model, data, &train_tuples, w)?;
        let test = evaluate_pixel_loss(model, data, &test_tuples, w)?;
        if !train.total.is_finite() || !test.total.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite pixel loss at step {step}"
            )));
        }
        history.records.push(PixelEvalRecord { step, train, test });
        Ok(())
    };
    record(&model, 0, &mut history)?;
    let mut idx = Vec::with_capacity(cfg.batch_size);
    for step in 1..=cfg.steps {
        idx.clear();
        idx.extend(
            (0..cfg.batch_size).map(|_| train_tuples[rng.random_range(0..train_tuples.len())]),
        );
        let (x0, x1) = data.tuple_batch(&idx);
        let dt = data.config.dt;
        let g = if step <= cfg.warmup_steps {
            // The autoencoder sees only reconstruction while the dynamics net fits its latents.
            let ae_only = LossWeights {
                hnn: 0.0,
                cc: 0.0,
                ..w
            };
            let dyn_only = LossWeights {
                ae: 0.0,
                cc: 0.0,
                ..w
            };
            let mut g = model.loss_and_gradient(x0.view(), x1.view(), dt, ae_only)?;
            g.dynamics = model
                .loss_and_gradient(x0.view(), x1.view(), dt, dyn_only)?
                .dynamics;
            g
        } else {
            model.loss_and_gradient(x0.view(), x1.view(), dt, w)?
        };
        if !g.loss.total.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite pixel loss at step {step}"
            )));
        }
        let numeric = |e: Error| match e {
            Error::NonFinite { layer, what } => {
                Error::Numeric(format!("non-finite {what} in layer {layer} at step {step}"))
            }
            other => other,
        };
        opt_enc
            .step(&mut model.encoder.params, &g.encoder)
            .map_err(numeric)?;
        opt_dec
            .step(&mut model.decoder.params, &g.decoder)
            .map_err(numeric)?;
        opt_dyn
            .step(&mut model.dynamics, &g.dynamics)
            .map_err(numeric)?;
        if step % cfg.eval_every == 0 || step == cfg.steps {
            record(&model, step, &mut history)?;
        }
    }
    Ok((model, history))
}
