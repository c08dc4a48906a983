//! The baseline derivative network and the Hamiltonian network, their loss
//! and the training loop.

mod checkpoint;
mod train;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::diffcore::{self, Activation, DatasetBatch, LossKind, MlpParams};
use crate::dynamics::{Hamiltonian, VectorField};
use crate::{Error, Result};

pub use checkpoint::Checkpoint;
pub use train::{train, train_on_batches, BatchSize, EvalRecord, TrainConfig, TrainHistory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Predicts `(dq/dt, dp/dt)` directly.
    Baseline,
    /// Predicts a scalar `H_theta`; derivatives are its symplectic gradient.
    Hnn,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Baseline => "baseline",
            ModelKind::Hnn => "hnn",
        }
    }

    pub fn loss_kind(self) -> LossKind {
        match self {
            ModelKind::Baseline => LossKind::BaselineMse,
            ModelKind::Hnn => LossKind::HnnSymplectic,
        }
    }

    /// Layer sizes for a state of length `dim`.
    pub fn layer_sizes(self, dim: usize, hidden: &[usize]) -> Vec<usize> {
        let mut sizes = vec![dim];
        sizes.extend_from_slice(hidden);
        sizes.push(match self {
            ModelKind::Baseline => dim,
            ModelKind::Hnn => 1,
        });
        sizes
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub kind: ModelKind,
    pub params: MlpParams,
}

impl Model {
    pub fn init(
        kind: ModelKind,
        dim: usize,
        hidden: &[usize],
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        Self::from_params(
            kind,
            MlpParams::init(&kind.layer_sizes(dim, hidden), activation, seed)?,
        )
    }

    pub fn from_params(kind: ModelKind, params: MlpParams) -> Result<Self> {
        let (i, o) = (params.input_dim(), params.output_dim());
        let ok = match kind {
            ModelKind::Baseline => i == o,
            ModelKind::Hnn => o == 1 && i % 2 == 0,
        };
        if !ok || i % 2 != 0 {
            return Err(Error::Shape(format!(
                "{} model cannot map {i} -> {o}",
                kind.name()
            )));
        }
        Ok(Self { kind, params })
    }

    /// Flat state length.
    pub fn dim(&self) -> usize {
        self.params.input_dim()
    }

    /// `(dq/dt, dp/dt)` at a flat state.
    pub fn time_derivative(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!(
                "state has length {}, model expects {}",
                x.len(),
                self.dim()
            )));
        }
        match self.kind {
            ModelKind::Baseline => self.params.forward(x),
            ModelKind::Hnn => {
                let g = diffcore::input_gradient(&self.params, x)?;
                let mut out = vec![0.0; g.len()];
                diffcore::symplectic_permute(&g, &mut out);
                Ok(out)
            }
        }
    }

    /// Time derivatives for a batch of states, one per row.
    pub fn time_derivative_batch(&self, states: ArrayView2<f64>) -> Result<ndarray::Array2<f64>> {
        diffcore::predict(&self.params, states, self.kind.loss_kind())
    }

    /// Mean over batch and coordinates of the squared derivative error.
    pub fn loss(&self, batch: &DatasetBatch) -> Result<f64> {
        diffcore::loss_value(
            &self.params,
            batch.states.view(),
            batch.targets.view(),
            self.kind.loss_kind(),
        )
    }

    /// The learned Hamiltonian, for HNN models.
    pub fn hamiltonian(&self) -> Option<LearnedHamiltonian<'_>> {
        (self.kind == ModelKind::Hnn).then_some(LearnedHamiltonian(&self.params))
    }
}

/// Free-function form of [`Model::time_derivative`].
pub fn model_time_derivative(model: &Model, x: &[f64]) -> Result<Vec<f64>> {
    model.time_derivative(x)
}

impl VectorField for Model {
    fn dim(&self) -> usize {
        Model::dim(self)
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.time_derivative(x)?;
        out.copy_from_slice(&d);
        Ok(())
    }
}

/// A scalar-output network viewed as a Hamiltonian.
#[derive(Clone, Copy, Debug)]
pub struct LearnedHamiltonian<'a>(pub &'a MlpParams);

impl<'a> LearnedHamiltonian<'a> {
    pub fn new(params: &'a MlpParams) -> Result<Self> {
        if params.output_dim() != 1 || params.input_dim() % 2 != 0 {
            return Err(Error::Contract(format!(
                "a Hamiltonian network maps an even-length state to a scalar, got {} -> {}",
                params.input_dim(),
                params.output_dim()
            )));
        }
        Ok(Self(params))
    }
}

impl Hamiltonian for LearnedHamiltonian<'_> {
    fn dim(&self) -> usize {
        self.0.input_dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.0.forward(x)?[0])
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let g = diffcore::input_gradient(self.0, x)?;
        out.copy_from_slice(&g);
        Ok(())
    }
}
