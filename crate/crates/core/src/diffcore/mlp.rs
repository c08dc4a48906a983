//! Fully-connected networks with an affine output layer.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// First derivative expressed through the activation output `a = f(z)`.
    #[inline]
    pub fn slope(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Second derivative expressed through the activation output.
    #[inline]
    pub fn curvature(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => -2.0 * a * (1.0 - a * a),
            Activation::Relu => 0.0,
        }
    }
}

/// Weights and biases of a dense network.
///
/// Weight `l` has shape `layer_sizes[l + 1] x layer_sizes[l]` and maps the
/// activations of layer `l` to the pre-activations of layer `l + 1`. Hidden
/// layers use `activation`; the last layer is affine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "MlpDocument", try_from = "MlpDocument")]
pub struct MlpParams {
    layer_sizes: Vec<usize>,
    activation: Activation,
    seed: u64,
    pub(crate) weights: Vec<Array2<f64>>,
    pub(crate) biases: Vec<Array1<f64>>,
}

/// Parameter-shaped tensors: gradients and optimizer moments.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

fn check_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least input and output sizes, got {layer_sizes:?}"
        )));
    }
    if layer_sizes.iter().any(|&s| s == 0) {
        return Err(Error::InvalidConfig(format!(
            "layer sizes must be positive, got {layer_sizes:?}"
        )));
    }
    Ok(())
}

impl MlpParams {
    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` weights, zero biases.
    pub fn init(layer_sizes: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        check_sizes(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w =
                Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-bound..bound));
            weights.push(w);
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            activation,
            seed,
            weights,
            biases,
        })
    }

    pub fn from_parts(
        activation: Activation,
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::Shape(format!(
                "{} weight matrices but {} bias vectors",
                weights.len(),
                biases.len()
            )));
        }
        let mut layer_sizes = vec![weights[0].ncols()];
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.ncols() != *layer_sizes.last().unwrap() {
                return Err(Error::Shape(format!(
                    "weight {l} has {} columns, expected {}",
                    w.ncols(),
                    layer_sizes.last().unwrap()
                )));
            }
            if b.len() != w.nrows() {
                return Err(Error::Shape(format!(
                    "bias {l} has length {}, expected {}",
                    b.len(),
                    w.nrows()
                )));
            }
            layer_sizes.push(w.nrows());
        }
        check_sizes(&layer_sizes)?;
        Ok(Self {
            layer_sizes,
            activation,
            seed: 0,
            weights,
            biases,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Number of affine layers.
    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Visits every parameter in a fixed order (weights row-major, then bias,
    /// layer by layer).
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().for_each(&mut f);
            b.iter_mut().for_each(&mut f);
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has length {}, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut a = x.to_vec();
        let last = self.depth() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = affine(w, b, &a);
            if l < last {
                z.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            a = z;
        }
        Ok(a)
    }

    /// Batched forward pass; rows of `x` are samples.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_batch(x)?;
        let mut a = x.to_owned();
        let last = self.depth() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = a.dot(&w.t());
            z += b;
            if l < last {
                z.mapv_inplace(|v| self.activation.apply(v));
            }
            a = z;
        }
        Ok(a)
    }

    pub(crate) fn check_batch(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "batch has {} columns, network expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn zeros_like(&self) -> Gradients {
        Gradients {
            weights: self
                .weights
                .iter()
                .map(|w| Array2::zeros(w.raw_dim()))
                .collect(),
            biases: self
                .biases
                .iter()
                .map(|b| Array1::zeros(b.raw_dim()))
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&MlpDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MlpDocument = serde_json::from_str(text)?;
        doc.try_into()
    }
}

/// `W x + b` for a single sample.
#[inline]
pub(crate) fn affine(w: &Array2<f64>, b: &Array1<f64>, x: &[f64]) -> Vec<f64> {
    let w = w.as_standard_layout();
    let cols = w.ncols();
    let flat = w.as_slice().expect("standard layout");
    flat.chunks_exact(cols)
        .zip(b.iter())
        .map(|(row, bias)| bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

impl Gradients {
    pub fn scale(&mut self, factor: f64) {
        self.weights.iter_mut().for_each(|w| *w *= factor);
        self.biases.iter_mut().for_each(|b| *b *= factor);
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .flat_map(|w| w.iter())
            .chain(self.biases.iter().flat_map(|b| b.iter()))
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Flattened in the same order as [`MlpParams::for_each_param_mut`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    /// Index of the first layer holding a non-finite entry.
    pub fn first_non_finite_layer(&self) -> Option<usize> {
        self.weights
            .iter()
            .zip(&self.biases)
            .position(|(w, b)| w.iter().chain(b.iter()).any(|v| !v.is_finite()))
    }

    pub(crate) fn add_rows_to_bias(&mut self, layer: usize, rows: &Array2<f64>) {
        self.biases[layer] += &rows.sum_axis(Axis(0));
    }
}

/// On-disk representation. Floats are written as shortest round-trip decimal
/// strings, so parsing restores every `f64` bit for bit.
#[derive(Serialize, Deserialize)]
struct MlpDocument {
    schema_version: u32,
    layer_sizes: Vec<usize>,
    activation: Activation,
    seed: u64,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl From<&MlpParams> for MlpDocument {
    fn from(p: &MlpParams) -> Self {
        MlpDocument {
            schema_version: SCHEMA_VERSION,
            layer_sizes: p.layer_sizes.clone(),
            activation: p.activation,
            seed: p.seed,
            weights: p
                .weights
                .iter()
                .map(|w| w.as_standard_layout().iter().copied().collect())
                .collect(),
            biases: p.biases.iter().map(|b| b.to_vec()).collect(),
        }
    }
}

impl From<MlpParams> for MlpDocument {
    fn from(p: MlpParams) -> Self {
        MlpDocument::from(&p)
    }
}

impl TryFrom<MlpDocument> for MlpParams {
    type Error = Error;

    fn try_from(doc: MlpDocument) -> Result<Self> {
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported network schema version {}",
                doc.schema_version
            )));
        }
        check_sizes(&doc.layer_sizes)?;
        let layers = doc.layer_sizes.len() - 1;
        if doc.weights.len() != layers || doc.biases.len() != layers {
            return Err(Error::Shape(format!(
                "expected {layers} layers of weights and biases"
            )));
        }
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        for (l, (w, b)) in doc.weights.into_iter().zip(doc.biases).enumerate() {
            let shape = (doc.layer_sizes[l + 1], doc.layer_sizes[l]);
            weights.push(
                Array2::from_shape_vec(shape, w)
                    .map_err(|e| Error::Shape(format!("weight {l}: {e}")))?,
            );
            if b.len() != shape.0 {
                return Err(Error::Shape(format!("bias {l} has length {}", b.len())));
            }
            biases.push(Array1::from(b));
        }
        Ok(MlpParams {
            layer_sizes: doc.layer_sizes,
            activation: doc.activation,
            seed: doc.seed,
            weights,
            biases,
        })
    }
}
