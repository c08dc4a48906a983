use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::dataset::{frame_pair, PixelConfig, PixelDataset};
use super::model::PixelModel;
use super::rollout::{latent_rollout, LatentRollout};
use super::train::evaluate_pixel_loss;
use super::LossWeights;
use crate::dynamics::{integrate_adaptive, Hamiltonian, PhasePoint, Symplectic};
use crate::eval::{MetricsReport, Series, EVAL_REL_TOL};
use crate::hash::sha256_hex;
use crate::hnn::ModelKind;
use crate::{Error, Result};

/// Angles in the template bank.
pub const BANK_SIZE: usize = 720;
/// Steps in the rollouts scored by [`build_pixel_report`] and [`amplitude_change`].
pub const ROLLOUT_STEPS: usize = 200;
/// Test trajectories swinging less than this are too small to score amplitude.
pub const MIN_AMPLITUDE: f64 = PI / 12.0;

/// Rendered frames at evenly spaced angles, zero-mean and unit-norm, for
/// recovering the angle of a frame by normalized correlation.
#[derive(Clone, Debug)]
pub struct TemplateBank {
    templates: Vec<Vec<f64>>,
    frame_len: usize,
}

fn normalized(v: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = v.collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

impl TemplateBank {
    pub fn new(cfg: &PixelConfig) -> Self {
        let templates = (0..BANK_SIZE)
            .map(|k| {
                let theta = k as f64 * TAU / BANK_SIZE as f64;
                let f = super::render::render_with(theta, cfg.side, cfg.rod_length, cfg.rod_width);
                normalized(f.into_iter().map(f64::from))
            })
            .collect();
        Self {
            templates,
            frame_len: cfg.frame_len(),
        }
    }

    /// Angle in `(-pi, pi]` of the best-matching template, refined by a
    /// parabola through the neighbouring correlations.
    pub fn match_angle(&self, frame: &[f64]) -> Result<f64> {
        if frame.len() != self.frame_len {
            return Err(Error::Shape(format!(
                "frame has {} pixels, templates have {}",
                frame.len(),
                self.frame_len
            )));
        }
        let f = normalized(frame.iter().copied());
        let corr: Vec<f64> = self
            .templates
            .iter()
            .map(|t| t.iter().zip(&f).map(|(a, b)| a * b).sum())
            .collect();
        let (best, _) = corr
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &c)| if c > acc.1 { (i, c) } else { acc },
            );
        let n = BANK_SIZE;
        let (l, c, r) = (corr[(best + n - 1) % n], corr[best], corr[(best + 1) % n]);
        let denom = l - 2.0 * c + r;
        let offset = if denom < 0.0 {
            (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let theta = (best as f64 + offset) * TAU / n as f64;
        Ok(if theta > PI { theta - TAU } else { theta })
    }

    /// `(theta, omega)` of a frame pair, with `omega` from the angle change
    /// between its two frames.
    pub fn match_state(&self, pair: &[f64], dt: f64) -> Result<(f64, f64)> {
        if pair.len() != 2 * self.frame_len {
            return Err(Error::Shape(format!(
                "frame pair has {} values",
                pair.len()
            )));
        }
        let a = self.match_angle(&pair[..self.frame_len])?;
        let b = self.match_angle(&pair[self.frame_len..])?;
        let d = (b - a + PI).rem_euclid(TAU) - PI;
        Ok((a, d / dt))
    }
}

/// Swing amplitude of an angle series: `sqrt(2)` times the standard
/// deviation, which is exact for a sinusoid sampled over whole periods.
pub fn swing_amplitude(theta: &[f64]) -> f64 {
    let n = theta.len() as f64;
    let mean = theta.iter().sum::<f64>() / n;
    (2.0 * theta.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Steps covering two small-angle periods of the pendulum.
pub fn amplitude_window(cfg: &PixelConfig) -> usize {
    (2.0 * TAU / cfg.gravity.sqrt() / cfg.dt).round() as usize
}

/// Template-matched angles of the first frame of every decoded pair.
pub fn rollout_angles(bank: &TemplateBank, rollout: &LatentRollout) -> Result<Vec<f64>> {
    rollout
        .frames
        .iter()
        .map(|p| bank.match_angle(&p[..bank.frame_len]))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeChange {
    /// Trajectories that were scored.
    pub trajectories: Vec<usize>,
    /// Amplitude over the first and the last window of each rollout.
    pub start: Vec<f64>,
    pub end: Vec<f64>,
}

impl AmplitudeChange {
    /// Mean of `end / start - 1`; negative when the swing decays.
    pub fn mean_relative_change(&self) -> f64 {
        let n = self.start.len() as f64;
        self.start
            .iter()
            .zip(&self.end)
            .map(|(s, e)| e / s - 1.0)
            .sum::<f64>()
            / n
    }
}

/// Rolls the model out for `n_steps` from the first pair of every test
/// trajectory that swings at least [`MIN_AMPLITUDE`], and compares the
/// template-matched amplitude over the first and the last two periods.
pub fn amplitude_change(
    model: &PixelModel,
    data: &PixelDataset,
    n_steps: usize,
) -> Result<AmplitudeChange> {
    let window = amplitude_window(&data.config);
    if n_steps + 1 < 2 * window {
        return Err(Error::InvalidConfig(format!(
            "{n_steps} steps cannot hold two windows of {window}"
        )));
    }
    let bank = TemplateBank::new(&data.config);
    let mut out = AmplitudeChange {
        trajectories: Vec::new(),
        start: Vec::new(),
        end: Vec::new(),
    };
    for id in data.test_ids() {
        let max = data.angles[id]
            .theta
            .iter()
            .fold(0.0f64, |m, t| m.max(t.abs()));
        if max < MIN_AMPLITUDE {
            continue;
        }
        let r = latent_rollout(model, &frame_pair(&data.frames[id], 0), n_steps)?;
        let theta = rollout_angles(&bank, &r)?;
        out.trajectories.push(id);
        out.start.push(swing_amplitude(&theta[..window]));
        out.end
            .push(swing_amplitude(&theta[theta.len() - window..]));
    }
    if out.trajectories.is_empty() {
        return Err(Error::Contract(
            "no test trajectory reaches the minimum amplitude".into(),
        ));
    }
    Ok(out)
}

/// Scores a pixel model: composite losses on both splits, and the true
/// pendulum energy of template-matched decoded frames along a
/// [`ROLLOUT_STEPS`]-step latent rollout from the first pair of every test
/// trajectory, against the energy of the true motion.
pub fn build_pixel_report(
    model: &PixelModel,
    data: &PixelDataset,
    weights: LossWeights,
    seed: u64,
) -> Result<MetricsReport> {
    let cfg = &data.config;
    let sys = cfg.system();
    let bank = TemplateBank::new(cfg);
    let train_loss =
        evaluate_pixel_loss(model, data, &data.tuples(data.train_ids()), weights)?.total;
    let test_loss = evaluate_pixel_loss(model, data, &data.tuples(data.test_ids()), weights)?.total;
    let t_eval: Vec<f64> = (0..=ROLLOUT_STEPS).map(|i| i as f64 * cfg.dt).collect();
    let mut total = 0.0;
    let mut first: Option<Series> = None;
    for id in data.test_ids() {
        let r = latent_rollout(model, &frame_pair(&data.frames[id], 0), ROLLOUT_STEPS)?;
        let angles = &data.angles[id];
        let x0 = PhasePoint::new(vec![angles.theta[0]], vec![angles.omega[0]])?;
        let truth = integrate_adaptive(&Symplectic(&sys), &x0, &t_eval, EVAL_REL_TOL)?;
        let e0 = sys.value(&x0.to_flat())?;
        let mut energy = Vec::with_capacity(r.frames.len());
        let mut coord = Vec::with_capacity(r.frames.len());
        for (pair, s) in r.frames.iter().zip(&truth.states) {
            let (theta, omega) = bank.match_state(pair, cfg.dt)?;
            energy.push(sys.value(&[theta, omega])?);
            let dq = (theta - s.q[0] + PI).rem_euclid(TAU) - PI;
            coord.push(0.5 * (dq * dq + (omega - s.p[0]).powi(2)));
        }
        total += energy.iter().map(|e| (e - e0).powi(2)).sum::<f64>() / energy.len() as f64;
        if first.is_none() {
            first = Some(Series {
                t: t_eval.clone(),
                coord_mse: coord,
                true_energy: energy,
                hnn_quantity: r.h_theta.clone(),
            });
        }
    }
    let n_test = data.test_ids().len() as f64;
    let report = MetricsReport {
        task: "pixel_pendulum".into(),
        model: model.kind,
        seed,
        train_loss,
        test_loss,
        energy_mse: total / n_test,
        series: first.unwrap_or_default(),
        config_hash: sha256_hex(serde_json::to_string(cfg)?.as_bytes()),
        checkpoint_hash: sha256_hex(serde_json::to_string(model)?.as_bytes()),
    };
    report.validate()?;
    Ok(report)
}

/// Range of `H_theta` over the encodings of every test pair (HNN only).
pub fn latent_quantity_range(model: &PixelModel, data: &PixelDataset) -> Result<(f64, f64)> {
    if model.kind != ModelKind::Hnn {
        return Err(Error::Contract(
            "only HNN models have a conserved quantity".into(),
        ));
    }
    let h = crate::hnn::LearnedHamiltonian::new(&model.dynamics)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for id in data.test_ids() {
        for t in 0..data.frames[id].len() - 1 {
            let z = model.encode_pair(&frame_pair(&data.frames[id], t))?;
            let v = h.value(&[z.z_q, z.z_p])?;
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    Ok((lo, hi))
}
