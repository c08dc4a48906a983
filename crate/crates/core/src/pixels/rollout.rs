use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use super::model::{LatentPair, PixelModel};
use super::render::to_pgm;
use crate::dynamics::{fmt_f64, integrate_rk4, Negated, PhasePoint, Trajectory, VectorField};
use crate::eval::conserved_quantity_series;
use crate::hnn::ModelKind;
use crate::{Error, Result};

/// Frame interval of the pixel data, also the latent integration step.
pub const LATENT_DT: f64 = 0.05;

impl VectorField for PixelModel {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(&self.latent_field(x)?);
        Ok(())
    }
}

/// Latent states of a rollout with their decoded frame pairs.
#[derive(Clone, Debug)]
pub struct LatentRollout {
    pub latent: Trajectory,
    /// Decoded `[frame_t, frame_t+1]` for every latent state.
    pub frames: Vec<Vec<f64>>,
    /// `H_theta` along the latent path (HNN models only).
    pub h_theta: Option<Vec<f64>>,
}

impl LatentRollout {
    pub fn z(&self, step: usize) -> LatentPair {
        let s = &self.latent.states[step];
        LatentPair {
            z_q: s.q[0],
            z_p: s.p[0],
        }
    }

    /// `step,z_q,z_p,H_theta`; the last column is empty for the baseline.
    pub fn write_latent_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "step,z_q,z_p,H_theta")?;
        for (i, s) in self.latent.states.iter().enumerate() {
            let h = self
                .h_theta
                .as_ref()
                .map(|h| fmt_f64(h[i]))
                .unwrap_or_default();
            writeln!(out, "{i},{},{},{h}", fmt_f64(s.q[0]), fmt_f64(s.p[0]))?;
        }
        Ok(())
    }

    /// `latent.csv` and, when `pgm` is set, the first frame of every decoded
    /// pair as `frame_NNNN.pgm`.
    pub fn export(&self, dir: &Path, side: usize, pgm: bool) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.write_latent_csv(fs::File::create(dir.join("latent.csv"))?)?;
        if pgm {
            for (i, pair) in self.frames.iter().enumerate() {
                let frame: Vec<f32> = pair[..side * side].iter().map(|&v| v as f32).collect();
                fs::write(dir.join(format!("frame_{i:04}.pgm")), to_pgm(&frame, side))?;
            }
        }
        Ok(())
    }
}

fn run(
    model: &PixelModel,
    field: &dyn VectorField,
    z0: LatentPair,
    n_steps: usize,
) -> Result<LatentRollout> {
    let x0 = PhasePoint::new(vec![z0.z_q], vec![z0.z_p])?;
    let latent = integrate_rk4(field, &x0, 0.0, LATENT_DT, n_steps).map_err(|e| match e {
        Error::Numeric(m) => Error::Numeric(format!("latent rollout diverged: {m}")),
        other => other,
    })?;
    if let Some(i) = latent
        .states
        .iter()
        .position(|s| !(s.q[0].is_finite() && s.p[0].is_finite()))
    {
        return Err(Error::Numeric(format!(
            "non-finite latent state at step {i}"
        )));
    }
    let z = Array2::from_shape_fn((latent.len(), 2), |(i, k)| {
        let s = &latent.states[i];
        if k == 0 {
            s.q[0]
        } else {
            s.p[0]
        }
    });
    let decoded = model.decode(z.view())?;
    let frames = decoded.rows().into_iter().map(|r| r.to_vec()).collect();
    let h_theta = match model.kind {
        ModelKind::Hnn => Some(conserved_quantity_series(&model.dynamics, &latent)?),
        ModelKind::Baseline => None,
    };
    Ok(LatentRollout {
        latent,
        frames,
        h_theta,
    })
}

/// Encodes `pair` once, integrates the latent field with RK4 at
/// [`LATENT_DT`] for `n_steps` and decodes every state.
pub fn latent_rollout(model: &PixelModel, pair: &[f32], n_steps: usize) -> Result<LatentRollout> {
    if pair.len() != model.pair_len() {
        return Err(Error::Shape(format!(
            "frame pair has {} values, model expects {}",
            pair.len(),
            model.pair_len()
        )));
    }
    run(model, model, model.encode_pair(pair)?, n_steps)
}

/// Rollout under the negated latent field, starting from a latent state.
pub fn reverse_latent_rollout(
    model: &PixelModel,
    z0: LatentPair,
    n_steps: usize,
) -> Result<LatentRollout> {
    run(model, &Negated(model), z0, n_steps)
}
