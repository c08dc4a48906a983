use ndarray::{Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::diffcore::{Activation, Gradients, MlpParams};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMap {
    Identity,
    /// Smooth clamp to `(0, 1)`.
    Sigmoid,
}

/// A relu network whose hidden layers of equal width add their input back
/// (`h' = h + relu(W h + b)`). The first and last layers change width and
/// have no skip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResMlp {
    pub params: MlpParams,
    pub output: OutputMap,
}

/// Activations saved by the forward pass.
pub struct ResTape {
    /// Input of every layer.
    inputs: Vec<Array2<f64>>,
    /// Post-relu value of every hidden layer, for the relu mask.
    hidden: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl ResMlp {
    pub fn init(layer_sizes: &[usize], output: OutputMap, seed: u64) -> Result<Self> {
        Ok(Self {
            params: MlpParams::init(layer_sizes, Activation::Relu, seed)?,
            output,
        })
    }

    pub fn from_params(params: MlpParams, output: OutputMap) -> Result<Self> {
        if params.activation() != Activation::Relu {
            return Err(Error::InvalidConfig("residual networks use relu".into()));
        }
        Ok(Self { params, output })
    }

    pub fn input_dim(&self) -> usize {
        self.params.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.params.output_dim()
    }

    fn skips(&self, layer: usize) -> bool {
        let sizes = self.params.layer_sizes();
        layer > 0 && layer + 1 < self.params.depth() && sizes[layer] == sizes[layer + 1]
    }

    pub fn forward_tape(&self, x: ArrayView2<f64>) -> Result<ResTape> {
        self.params.check_batch(x)?;
        let depth = self.params.depth();
        let mut inputs = Vec::with_capacity(depth);
        let mut hidden = Vec::with_capacity(depth - 1);
        let mut h = x.to_owned();
        for l in 0..depth {
            let w = &self.params.weights[l];
            let b = &self.params.biases[l];
            let mut z = h.dot(&w.t());
            z += b;
            if l + 1 == depth {
                if self.output == OutputMap::Sigmoid {
                    z.mapv_inplace(sigmoid);
                }
                inputs.push(h);
                return Ok(ResTape {
                    inputs,
                    hidden,
                    output: z,
                });
            }
            z.mapv_inplace(|v| v.max(0.0));
            let next = if self.skips(l) { &z + &h } else { z.clone() };
            hidden.push(z);
            inputs.push(std::mem::replace(&mut h, next));
        }
        unreachable!("networks have at least one layer")
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_tape(x)?.output)
    }

    /// Parameter gradients and, when `want_input` is set, the input adjoint.
    pub fn backward(
        &self,
        tape: &ResTape,
        out_adj: ArrayView2<f64>,
        want_input: bool,
    ) -> (Gradients, Option<Array2<f64>>) {
        let depth = self.params.depth();
        let mut grads = self.params.zeros_like();
        // dL/dz of the current layer.
        let mut adj = out_adj.to_owned();
        if self.output == OutputMap::Sigmoid {
            Zip::from(&mut adj)
                .and(&tape.output)
                .for_each(|a, &y| *a *= y * (1.0 - y));
        }
        // Identity-path gradient owed to the current layer's input.
        let mut carry: Option<Array2<f64>> = None;
        for l in (0..depth).rev() {
            grads.weights[l] = adj.t().dot(&tape.inputs[l]);
            grads.biases[l] = adj.sum_axis(Axis(0));
            if l == 0 && !want_input {
                break;
            }
            let mut dh = adj.dot(&self.params.weights[l]);
            if let Some(c) = carry.take() {
                dh += &c;
            }
            if l == 0 {
                return (grads, Some(dh));
            }
            let k = l - 1;
            if self.skips(k) {
                carry = Some(dh.clone());
            }
            Zip::from(&mut dh).and(&tape.hidden[k]).for_each(|g, &a| {
                if a <= 0.0 {
                    *g = 0.0;
                }
            });
            adj = dh;
        }
        (grads, None)
    }
}
