use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::render::{render_with, ROD_LENGTH, ROD_WIDTH, SIDE};
use crate::dynamics::{integrate_adaptive, AnalyticSystem, Hamiltonian, PhasePoint, Symplectic};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"HNNPIXEL";
const FORMAT_VERSION: u32 = 1;
const MAX_DRAWS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PixelConfig {
    pub n_trajectories: usize,
    pub n_train_trajectories: usize,
    pub frames_per_trajectory: usize,
    pub dt: f64,
    /// Largest angle reached by any trajectory.
    pub max_angle: f64,
    pub gravity: f64,
    pub seed: u64,
    pub side: usize,
    pub rod_length: f64,
    pub rod_width: f64,
}

impl Default for PixelConfig {
    fn default() -> Self {
        Self {
            n_trajectories: 200,
            n_train_trajectories: 160,
            frames_per_trajectory: 100,
            dt: 0.05,
            max_angle: PI / 6.0,
            gravity: 10.0,
            seed: 0,
            side: SIDE,
            rod_length: ROD_LENGTH,
            rod_width: ROD_WIDTH,
        }
    }
}

impl PixelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_train_trajectories == 0 || self.n_train_trajectories >= self.n_trajectories {
            return bad("need at least one train and one test trajectory");
        }
        if self.frames_per_trajectory < 3 {
            return bad("need at least three frames per trajectory");
        }
        if !(self.dt > 0.0) || !(self.gravity > 0.0) || self.side == 0 {
            return bad("dt, gravity and side must be positive");
        }
        if !(self.max_angle > 0.0 && self.max_angle < PI) {
            return bad("max_angle must lie in (0, pi)");
        }
        Ok(())
    }

    /// Ideal pendulum with `m = l = 1`.
    pub fn system(&self) -> AnalyticSystem {
        AnalyticSystem::Pendulum {
            m: 1.0,
            g: self.gravity,
            l: 1.0,
        }
    }

    pub fn frame_len(&self) -> usize {
        self.side * self.side
    }

    pub fn pair_len(&self) -> usize {
        2 * self.frame_len()
    }
}

/// Angles and angular velocities of one trajectory, frame by frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryAngles {
    pub theta: Vec<f64>,
    pub omega: Vec<f64>,
}

/// Rendered trajectories. Frames are kept as `f32` in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelDataset {
    pub config: PixelConfig,
    /// `frames[trajectory][frame]` is a row-major image.
    pub frames: Vec<Vec<Vec<f32>>>,
    pub angles: Vec<TrajectoryAngles>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    config: PixelConfig,
    angles: Vec<TrajectoryAngles>,
}

/// A frame pair: `[frame_t, frame_t+1]`, channel-first.
pub fn frame_pair(frames: &[Vec<f32>], t: usize) -> Vec<f32> {
    let mut v = frames[t].clone();
    v.extend_from_slice(&frames[t + 1]);
    v
}

/// `(trajectory, t)`: the consecutive pairs starting at frames `t` and `t+1`.
pub type TupleIndex = (usize, usize);

impl PixelDataset {
    pub fn n_pairs(&self) -> usize {
        self.frames.iter().map(|f| f.len() - 1).sum()
    }

    pub fn train_ids(&self) -> std::ops::Range<usize> {
        0..self.config.n_train_trajectories
    }

    pub fn test_ids(&self) -> std::ops::Range<usize> {
        self.config.n_train_trajectories..self.config.n_trajectories
    }

    /// Every `(pair_t, pair_t+1)` tuple of the given trajectories.
    pub fn tuples(&self, ids: std::ops::Range<usize>) -> Vec<TupleIndex> {
        ids.flat_map(|i| (0..self.frames[i].len() - 2).map(move |t| (i, t)))
            .collect()
    }

    /// Stacks the two pairs of every tuple into `(batch x pair_len)` arrays.
    pub fn tuple_batch(&self, idx: &[TupleIndex]) -> (Array2<f64>, Array2<f64>) {
        let len = self.config.pair_len();
        let fl = self.config.frame_len();
        let mut x0 = Array2::zeros((idx.len(), len));
        let mut x1 = Array2::zeros((idx.len(), len));
        for (row, &(i, t)) in idx.iter().enumerate() {
            let f = &self.frames[i];
            for (k, frame) in [&f[t], &f[t + 1], &f[t + 2]].into_iter().enumerate() {
                for (j, &v) in frame.iter().enumerate() {
                    let v = v as f64;
                    if k < 2 {
                        x0[[row, k * fl + j]] = v;
                    }
                    if k > 0 {
                        x1[[row, (k - 1) * fl + j]] = v;
                    }
                }
            }
        }
        (x0, x1)
    }

    /// Writes `<stem>.bin` (header plus little-endian `f32` frames) and
    /// `<stem>.json` (config and angles).
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("create {}", dir.display()), e))?;
        let c = &self.config;
        let mut buf =
            Vec::with_capacity(32 + 4 * c.n_trajectories * c.frames_per_trajectory * c.frame_len());
        buf.extend_from_slice(MAGIC);
        for v in [
            FORMAT_VERSION,
            c.side as u32,
            c.side as u32,
            c.n_trajectories as u32,
            c.frames_per_trajectory as u32,
        ] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for frame in self.frames.iter().flatten() {
            for v in frame {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let bin = dir.join(format!("{stem}.bin"));
        let mut f = fs::File::create(&bin)
            .map_err(|e| Error::io(format!("create {}", bin.display()), e))?;
        f.write_all(&buf)
            .map_err(|e| Error::io(format!("write {}", bin.display()), e))?;
        let side = Sidecar {
            config: self.config.clone(),
            angles: self.angles.clone(),
        };
        let json = dir.join(format!("{stem}.json"));
        fs::write(&json, serde_json::to_string_pretty(&side)? + "\n")
            .map_err(|e| Error::io(format!("write {}", json.display()), e))
    }

    pub fn read(dir: &Path, stem: &str) -> Result<Self> {
        let json = dir.join(format!("{stem}.json"));
        let text = fs::read_to_string(&json)
            .map_err(|e| Error::io(format!("read {}", json.display()), e))?;
        let side: Sidecar = serde_json::from_str(&text)?;
        let bin = dir.join(format!("{stem}.bin"));
        let bytes = fs::read(&bin).map_err(|e| Error::io(format!("read {}", bin.display()), e))?;
        let parse_err = |msg: String| Error::Parse {
            path: bin.clone(),
            line: 0,
            msg,
        };
        if bytes.len() < 28 || &bytes[..8] != MAGIC {
            return Err(parse_err("not a pixel dataset".into()));
        }
        let word = |k: usize| {
            u32::from_le_bytes(bytes[8 + 4 * k..12 + 4 * k].try_into().unwrap()) as usize
        };
        let (version, h, w, n, per) = (word(0), word(1), word(2), word(3), word(4));
        let c = &side.config;
        if version != FORMAT_VERSION as usize {
            return Err(parse_err(format!("unsupported version {version}")));
        }
        if (h, w, n, per) != (c.side, c.side, c.n_trajectories, c.frames_per_trajectory) {
            return Err(parse_err("header disagrees with the sidecar config".into()));
        }
        let payload = &bytes[28..];
        let fl = h * w;
        if payload.len() != 4 * n * per * fl {
            return Err(parse_err(format!("payload has {} bytes", payload.len())));
        }
        let values: Vec<f32> = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let frames = values
            .chunks_exact(per * fl)
            .map(|traj| traj.chunks_exact(fl).map(<[f32]>::to_vec).collect())
            .collect();
        Ok(Self {
            config: side.config,
            frames,
            angles: side.angles,
        })
    }
}

/// Renders `n_trajectories` pendulum swings. Initial angles and angular
/// velocities are drawn uniformly from the box that contains every state
/// with amplitude up to `max_angle`, and rejected when the swing would
/// exceed it.
pub fn generate_pixel_dataset(cfg: &PixelConfig) -> Result<PixelDataset> {
    cfg.validate()?;
    let sys = cfg.system();
    let e_max = sys.value(&[cfg.max_angle, 0.0])?;
    let w_max = (2.0 * e_max).sqrt();
    let times: Vec<f64> = (0..cfg.frames_per_trajectory)
        .map(|i| i as f64 * cfg.dt)
        .collect();
    let mut frames = Vec::with_capacity(cfg.n_trajectories);
    let mut angles = Vec::with_capacity(cfg.n_trajectories);
    for id in 0..cfg.n_trajectories {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(id as u64);
        let mut draws = 0;
        let x0 = loop {
            draws += 1;
            if draws > MAX_DRAWS {
                return Err(Error::InvalidConfig(format!(
                    "trajectory {id}: no admissible initial state in {MAX_DRAWS} draws"
                )));
            }
            let theta = rng.random_range(-cfg.max_angle..=cfg.max_angle);
            let omega = rng.random_range(-w_max..=w_max);
            if sys.value(&[theta, omega])? <= e_max {
                break PhasePoint::new(vec![theta], vec![omega])?;
            }
        };
        let traj = integrate_adaptive(&Symplectic(&sys), &x0, &times, 1e-9)?;
        let theta: Vec<f64> = traj.states.iter().map(|s| s.q[0]).collect();
        let omega: Vec<f64> = traj.states.iter().map(|s| s.p[0]).collect();
        frames.push(
            theta
                .iter()
                .map(|&th| render_with(th, cfg.side, cfg.rod_length, cfg.rod_width))
                .collect(),
        );
        angles.push(TrajectoryAngles { theta, omega });
    }
    Ok(PixelDataset {
        config: cfg.clone(),
        frames,
        angles,
    })
}
