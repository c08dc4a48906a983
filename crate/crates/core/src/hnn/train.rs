use std::fmt;
use std::io::Write;

use ndarray::Axis;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Model, ModelKind};
use crate::data::{DatasetSplit, Task};
use crate::diffcore::{self, Activation, AdamConfig, AdamState, DatasetBatch};
use crate::dynamics::fmt_f64;
use crate::{Error, Result};

/// Whole training set per step, or a fixed number of records drawn with
/// replacement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchSize {
    Full,
    Size(usize),
}

impl fmt::Display for BatchSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BatchSize::Full => f.write_str("full"),
            BatchSize::Size(n) => write!(f, "{n}"),
        }
    }
}

impl Serialize for BatchSize {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BatchSize::Full => s.serialize_str("full"),
            BatchSize::Size(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for BatchSize {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Size(usize),
            Word(String),
        }
        match Repr::deserialize(d)? {
            Repr::Size(0) => Err(serde::de::Error::custom("batch size must be positive")),
            Repr::Size(n) => Ok(BatchSize::Size(n)),
            Repr::Word(w) if w == "full" => Ok(BatchSize::Full),
            Repr::Word(w) => Err(serde::de::Error::custom(format!(
                "batch size must be an integer or \"full\", got {w:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: BatchSize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Seeds both the initial weights and minibatch sampling.
    pub seed: u64,
    pub eval_every: usize,
    pub hidden_sizes: Vec<usize>,
    pub activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: BatchSize::Full,
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            seed: 0,
            eval_every: 200,
            hidden_sizes: vec![200, 200],
            activation: Activation::Tanh,
        }
    }
}

impl TrainConfig {
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::MassSpring | Task::Pendulum | Task::RealPendulum => Self::default(),
            Task::TwoBody | Task::ThreeBody => Self {
                steps: 10_000,
                batch_size: BatchSize::Size(200),
                weight_decay: 0.0,
                ..Self::default()
            },
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.adam().validate()?;
        if self.eval_every == 0 {
            return Err(Error::InvalidConfig("eval_every must be positive".into()));
        }
        if self.hidden_sizes.iter().any(|&h| h == 0) {
            return Err(Error::InvalidConfig(
                "hidden layer widths must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub step: usize,
    pub train_loss: f64,
    pub test_loss: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EvalRecord>,
}

impl TrainHistory {
    pub fn last(&self) -> Option<&EvalRecord> {
        self.records.last()
    }

    /// `step,train_loss,test_loss`
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "step,train_loss,test_loss")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{}",
                r.step,
                fmt_f64(r.train_loss),
                fmt_f64(r.test_loss)
            )?;
        }
        Ok(())
    }
}

/// Trains a fresh model of `kind` on the dataset's train split, scoring the
/// test split along the way.
pub fn train(
    kind: ModelKind,
    dataset: &DatasetSplit,
    cfg: &TrainConfig,
) -> Result<(Model, TrainHistory)> {
    let train = dataset.train_batch()?;
    let test = dataset.test_batch()?;
    train_on_batches(kind, &train, &test, cfg)
}

/// Adam on the mean squared derivative error. Losses are recorded at step 0,
/// every `eval_every` steps and after the last step, always on the full
/// train and test sets.
pub fn train_on_batches(
    kind: ModelKind,
    train: &DatasetBatch,
    test: &DatasetBatch,
    cfg: &TrainConfig,
) -> Result<(Model, TrainHistory)> {
    cfg.validate()?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::Contract(
            "training needs non-empty train and test sets".into(),
        ));
    }
    let dim = train.states.ncols();
    let mut model = Model::init(kind, dim, &cfg.hidden_sizes, cfg.activation, cfg.seed)?;
    let loss_kind = kind.loss_kind();
    let mut adam = AdamState::new(&model.params, cfg.adam())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut history = TrainHistory::default();
    let n = train.len();

    for step in 0..=cfg.steps {
        let record_now = step % cfg.eval_every == 0 || step == cfg.steps;
        let full = matches!(cfg.batch_size, BatchSize::Full);
        let lg = if step < cfg.steps {
            let lg = match cfg.batch_size {
                BatchSize::Full => diffcore::loss_and_gradient(
                    &model.params,
                    train.states.view(),
                    train.targets.view(),
                    loss_kind,
                )?,
                BatchSize::Size(b) => {
                    let idx: Vec<usize> = (0..b).map(|_| rng.random_range(0..n)).collect();
                    let states = train.states.select(Axis(0), &idx);
                    let targets = train.targets.select(Axis(0), &idx);
                    diffcore::loss_and_gradient(
                        &model.params,
                        states.view(),
                        targets.view(),
                        loss_kind,
                    )?
                }
            };
            if !lg.loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "{} training loss became {} at step {step}",
                    kind.name(),
                    lg.loss
                )));
            }
            Some(lg)
        } else {
            None
        };
        if record_now {
            let train_loss = match (&lg, full) {
                (Some(lg), true) => lg.loss,
                _ => model.loss(train)?,
            };
            let test_loss = model.loss(test)?;
            if !train_loss.is_finite() || !test_loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "{} loss became non-finite at step {step} (train {train_loss}, test {test_loss})",
                    kind.name()
                )));
            }
            log::debug!(
                "{} step {step}: train {train_loss:.6e} test {test_loss:.6e}",
                kind.name()
            );
            history.records.push(EvalRecord {
                step,
                train_loss,
                test_loss,
            });
        }
        if let Some(lg) = lg {
            adam.step(&mut model.params, &lg.params)
                .map_err(|e| match e {
                    Error::NonFinite { layer, what } => {
                        Error::Numeric(format!("non-finite {what} in layer {layer} at step {step}"))
                    }
                    other => other,
                })?;
        }
    }
    Ok((model, history))
}
