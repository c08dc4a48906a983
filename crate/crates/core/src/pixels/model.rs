use ndarray::{s, Array2, ArrayView2, Axis};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::{OutputMap, ResMlp};
use crate::diffcore::{self, Activation, Gradients, MlpParams};
use crate::hnn::ModelKind;
use crate::{Error, Result};

/// Weights of the three loss terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub ae: f64,
    pub hnn: f64,
    pub cc: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            ae: 1.0,
            hnn: 1.0,
            cc: 1.0,
        }
    }
}

/// Autoencoder plus a latent dynamics network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelModel {
    pub kind: ModelKind,
    pub encoder: ResMlp,
    pub decoder: ResMlp,
    /// `[2, .., 1]` for the HNN, `[2, .., 2]` for the baseline.
    pub dynamics: MlpParams,
}

/// Latent coordinates `(z_q, z_p)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatentPair {
    pub z_q: f64,
    pub z_p: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PixelLoss {
    pub total: f64,
    pub ae: f64,
    pub hnn: f64,
    pub cc: f64,
}

#[derive(Clone, Debug)]
pub struct PixelGradients {
    pub loss: PixelLoss,
    pub encoder: Gradients,
    pub decoder: Gradients,
    pub dynamics: Gradients,
}

impl PixelGradients {
    /// Flattened in the order of [`PixelModel::for_each_param_mut`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.encoder.to_flat();
        v.extend(self.decoder.to_flat());
        v.extend(self.dynamics.to_flat());
        v
    }
}

impl PixelModel {
    /// Encoder `pair_len -> h -> h -> h -> 2`, decoder the mirror image, and a
    /// tanh dynamics net with the given hidden widths.
    pub fn init(
        kind: ModelKind,
        pair_len: usize,
        ae_hidden: usize,
        dynamics_hidden: &[usize],
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s_enc, s_dec, s_dyn) = (rng.next_u64(), rng.next_u64(), rng.next_u64());
        Ok(Self {
            kind,
            encoder: ResMlp::init(
                &[pair_len, ae_hidden, ae_hidden, ae_hidden, 2],
                OutputMap::Identity,
                s_enc,
            )?,
            decoder: ResMlp::init(
                &[2, ae_hidden, ae_hidden, ae_hidden, pair_len],
                OutputMap::Sigmoid,
                s_dec,
            )?,
            dynamics: MlpParams::init(
                &kind.layer_sizes(2, dynamics_hidden),
                Activation::Tanh,
                s_dyn,
            )?,
        })
    }

    /// Visits encoder, decoder and dynamics parameters in that order.
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        self.encoder.params.for_each_param_mut(&mut f);
        self.decoder.params.for_each_param_mut(&mut f);
        self.dynamics.for_each_param_mut(&mut f);
    }

    pub fn num_params(&self) -> usize {
        self.encoder.params.num_params()
            + self.decoder.params.num_params()
            + self.dynamics.num_params()
    }

    pub fn pair_len(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn encode(&self, pairs: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.encoder.forward(pairs)
    }

    pub fn decode(&self, z: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.decoder.forward(z)
    }

    pub fn encode_pair(&self, pair: &[f32]) -> Result<LatentPair> {
        let x = Array2::from_shape_fn((1, pair.len()), |(_, j)| pair[j] as f64);
        let z = self.encode(x.view())?;
        Ok(LatentPair {
            z_q: z[[0, 0]],
            z_p: z[[0, 1]],
        })
    }

    pub fn decode_pair(&self, z: LatentPair) -> Result<Vec<f64>> {
        let z = Array2::from_shape_vec((1, 2), vec![z.z_q, z.z_p]).expect("1x2");
        Ok(self.decode(z.view())?.into_raw_vec_and_offset().0)
    }

    /// Latent time derivative.
    pub fn latent_field(&self, z: &[f64]) -> Result<Vec<f64>> {
        match self.kind {
            ModelKind::Baseline => self.dynamics.forward(z),
            ModelKind::Hnn => {
                let g = diffcore::input_gradient(&self.dynamics, z)?;
                let mut out = vec![0.0; 2];
                diffcore::symplectic_permute(&g, &mut out);
                Ok(out)
            }
        }
    }

    /// The composite loss on tuples of consecutive pairs `x0[i] -> x1[i]`.
    pub fn loss(
        &self,
        x0: ArrayView2<f64>,
        x1: ArrayView2<f64>,
        dt: f64,
        w: LossWeights,
    ) -> Result<PixelLoss> {
        Ok(self.loss_and_gradient_impl(x0, x1, dt, w, false)?.loss)
    }

    pub fn loss_and_gradient(
        &self,
        x0: ArrayView2<f64>,
        x1: ArrayView2<f64>,
        dt: f64,
        w: LossWeights,
    ) -> Result<PixelGradients> {
        self.loss_and_gradient_impl(x0, x1, dt, w, true)
    }

    fn loss_and_gradient_impl(
        &self,
        x0: ArrayView2<f64>,
        x1: ArrayView2<f64>,
        dt: f64,
        w: LossWeights,
        want_grad: bool,
    ) -> Result<PixelGradients> {
        if x0.dim() != x1.dim() || x0.nrows() == 0 {
            return Err(Error::Shape(format!(
                "tuple batches must be equal and non-empty, got {:?} and {:?}",
                x0.dim(),
                x1.dim()
            )));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "dt must be positive, got {dt}"
            )));
        }
        let b = x0.nrows();
        let x =
            ndarray::concatenate(Axis(0), &[x0, x1]).map_err(|e| Error::Shape(e.to_string()))?;
        let enc = self.encoder.forward_tape(x.view())?;
        let z = &enc.output;
        let dec = self.decoder.forward_tape(z.view())?;

        // Reconstruction of both pairs.
        let resid = &dec.output - &x;
        let ae = resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64;

        let z0 = z.slice(s![..b, ..]);
        let z1 = z.slice(s![b.., ..]);
        // Canonical-coordinate term: z_p^t - (z_q^t - z_q^{t+1}).
        let cc_r: Vec<f64> = (0..b)
            .map(|i| z0[[i, 1]] - (z0[[i, 0]] - z1[[i, 0]]))
            .collect();
        let cc = cc_r.iter().map(|r| r * r).sum::<f64>() / b as f64;

        // Latent dynamics on forward-difference targets.
        let targets = (&z1 - &z0) / dt;
        let lg =
            diffcore::loss_and_gradient(&self.dynamics, z0, targets.view(), self.kind.loss_kind())?;
        let hnn = lg.loss;
        let loss = PixelLoss {
            total: w.ae * ae + w.hnn * hnn + w.cc * cc,
            ae,
            hnn,
            cc,
        };
        if !want_grad {
            return Ok(PixelGradients {
                loss,
                encoder: Gradients::default(),
                decoder: Gradients::default(),
                dynamics: Gradients::default(),
            });
        }

        let y_adj = resid * (2.0 * w.ae / (x.len() as f64));
        let (decoder, z_adj_dec) = self.decoder.backward(&dec, y_adj.view(), true);
        let mut z_adj = z_adj_dec.expect("input adjoint requested");
        let mut dynamics = lg.params;
        dynamics.scale(w.hnn);
        for i in 0..b {
            let r = 2.0 * w.cc * cc_r[i] / b as f64;
            z_adj[[i, 1]] += r;
            z_adj[[i, 0]] -= r;
            z_adj[[b + i, 0]] += r;
            for k in 0..2 {
                let t_adj = w.hnn * lg.targets[[i, k]] / dt;
                z_adj[[i, k]] += w.hnn * lg.states[[i, k]] - t_adj;
                z_adj[[b + i, k]] += t_adj;
            }
        }
        let (encoder, _) = self.encoder.backward(&enc, z_adj.view(), false);
        Ok(PixelGradients {
            loss,
            encoder,
            decoder,
            dynamics,
        })
    }
}
