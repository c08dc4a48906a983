use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{DatasetConfig, DatasetMeta, DatasetSplit, Record, Task};
use crate::dynamics::{integrate_adaptive, FnField, Hamiltonian, PhasePoint, Trajectory};
use crate::{Error, Result};

const MIN_ROWS: usize = 10;

/// A column selected by zero-based index or by header name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub t: ColumnRef,
    pub q: ColumnRef,
    pub p: ColumnRef,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            t: ColumnRef::Index(0),
            q: ColumnRef::Index(1),
            p: ColumnRef::Index(2),
        }
    }
}

fn split_fields(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

/// Reads a single `(t, q, p)` recording from a comma- or whitespace-delimited
/// file. Blank lines and lines starting with `#` are skipped; a first row
/// that does not parse as numbers is taken as the header.
pub fn read_columns(path: &Path, columns: &ColumnMap) -> Result<Trajectory> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::io(format!("read {}", path.display()), e))?;
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut header: Option<Vec<String>> = None;
    let mut idx: Option<[usize; 3]> = None;
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut seen_row = false;
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields = split_fields(line);
        let nums: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.parse::<f64>()).collect();
        let nums = match nums {
            Ok(v) => v,
            Err(e) if seen_row || header.is_some() => {
                return Err(parse_err(lineno, format!("unparseable row: {e}")));
            }
            Err(_) => {
                header = Some(fields.iter().map(|s| s.to_string()).collect());
                continue;
            }
        };
        seen_row = true;
        let cols = match idx {
            Some(c) => c,
            None => {
                let resolve = |c: &ColumnRef| -> Result<usize> {
                    match c {
                        ColumnRef::Index(i) => Ok(*i),
                        ColumnRef::Name(name) => header
                            .as_ref()
                            .and_then(|h| h.iter().position(|x| x == name))
                            .ok_or_else(|| parse_err(lineno, format!("no column named {name:?}"))),
                    }
                };
                let c = [
                    resolve(&columns.t)?,
                    resolve(&columns.q)?,
                    resolve(&columns.p)?,
                ];
                idx = Some(c);
                c
            }
        };
        let get = |j: usize| {
            nums.get(j).copied().ok_or_else(|| {
                parse_err(
                    lineno,
                    format!("row has {} fields, need column {j}", nums.len()),
                )
            })
        };
        let (t, q, p) = (get(cols[0])?, get(cols[1])?, get(cols[2])?);
        if ![t, q, p].iter().all(|v| v.is_finite()) {
            return Err(parse_err(lineno, "non-finite value".into()));
        }
        times.push(t);
        states.push(PhasePoint::new(vec![q], vec![p])?);
    }
    if times.len() < MIN_ROWS {
        return Err(Error::InvalidConfig(format!(
            "{} has {} samples, need at least {MIN_ROWS}",
            path.display(),
            times.len()
        )));
    }
    Trajectory::new(times, states)
}

/// Second-order finite-difference time derivatives: three-point central
/// differences inside (exact for quadratics, non-uniform spacing allowed) and
/// three-point one-sided differences at both ends.
pub fn finite_difference_targets(traj: &Trajectory) -> Result<Vec<PhasePoint>> {
    let n = traj.len();
    if n < 3 {
        return Err(Error::InvalidConfig(format!(
            "need at least 3 samples, got {n}"
        )));
    }
    let t = &traj.times;
    if let Some(i) = t.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidConfig(format!(
            "times must increase strictly, t[{}]={} then t[{}]={}",
            i,
            t[i],
            i + 1,
            t[i + 1]
        )));
    }
    let x: Vec<Vec<f64>> = traj.states.iter().map(PhasePoint::to_flat).collect();
    let combine = |w: [f64; 3], a: usize| -> Vec<f64> {
        (0..x[a].len())
            .map(|k| w[0] * x[a][k] + w[1] * x[a + 1][k] + w[2] * x[a + 2][k])
            .collect()
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let d = if i == 0 {
            let (h1, h2) = (t[1] - t[0], t[2] - t[1]);
            combine(
                [
                    -(2.0 * h1 + h2) / (h1 * (h1 + h2)),
                    (h1 + h2) / (h1 * h2),
                    -h1 / (h2 * (h1 + h2)),
                ],
                0,
            )
        } else if i == n - 1 {
            let (h1, h2) = (t[n - 2] - t[n - 3], t[n - 1] - t[n - 2]);
            combine(
                [
                    h2 / (h1 * (h1 + h2)),
                    -(h1 + h2) / (h1 * h2),
                    (h1 + 2.0 * h2) / (h2 * (h1 + h2)),
                ],
                n - 3,
            )
        } else {
            let (h1, h2) = (t[i] - t[i - 1], t[i + 1] - t[i]);
            combine(
                [
                    -h2 / (h1 * (h1 + h2)),
                    (h2 - h1) / (h1 * h2),
                    h1 / (h2 * (h1 + h2)),
                ],
                i - 1,
            )
        };
        out.push(PhasePoint::from_flat(&d)?);
    }
    Ok(out)
}

/// Splits one recording chronologically: the first `floor(4n/5)` samples
/// train, the rest test. Both parts share trajectory id 0.
pub fn real_pendulum_split(
    traj: &Trajectory,
    cfg: &DatasetConfig,
    notes: Vec<String>,
) -> Result<DatasetSplit> {
    let targets = finite_difference_targets(traj)?;
    let n = traj.len();
    let n_train = 4 * n / 5;
    let records: Vec<Record> = traj
        .states
        .iter()
        .zip(&targets)
        .zip(&traj.times)
        .map(|((s, d), &t)| Record {
            state: s.to_flat(),
            target: d.to_flat(),
            trajectory_id: 0,
            t,
        })
        .collect();
    let mut cfg = cfg.clone();
    cfg.samples_per_trajectory = n;
    let sys = cfg.system();
    let mut records = records;
    let test = records.split_off(n_train);
    Ok(DatasetSplit {
        train: records,
        test,
        meta: DatasetMeta {
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            dim: 2,
            system: sys,
            initial_states: vec![traj.first().to_flat()],
            notes,
            config: cfg,
        },
    })
}

/// Loads a recorded pendulum trajectory with finite-difference targets and a
/// chronological 4/5 : 1/5 split.
pub fn load_real_pendulum(path: &Path, columns: &ColumnMap) -> Result<DatasetSplit> {
    let cfg = DatasetConfig {
        source: Some(path.to_path_buf()),
        column_map: columns.clone(),
        noise_std: 0.0,
        damping: 0.0,
        ..DatasetConfig::real_pendulum()
    };
    load_real_pendulum_with(path, &cfg)
}

pub(super) fn load_real_pendulum_with(path: &Path, cfg: &DatasetConfig) -> Result<DatasetSplit> {
    let traj = read_columns(path, &cfg.column_map)?;
    let bytes = fs::read(path).map_err(|e| Error::io(format!("read {}", path.display()), e))?;
    let notes = vec![
        format!("loaded from {}", path.display()),
        format!("source sha256 {}", crate::hash::sha256_hex(&bytes)),
    ];
    real_pendulum_split(&traj, cfg, notes)
}

/// A pendulum with linear friction, `dq/dt = p`, `dp/dt = -6 sin q - damping p`,
/// released from rest at initial energy `energy_range[0]` and observed with
/// Gaussian noise of std `noise_std`. Returns the noisy recording.
pub fn synthetic_damped_pendulum(cfg: &DatasetConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if cfg.task != Task::RealPendulum {
        return Err(Error::InvalidConfig(format!(
            "damped stand-in needs task real_pendulum, got {}",
            cfg.task.name()
        )));
    }
    let sys = cfg.system();
    let e = cfg.energy_range[0];
    let q0 = super::synthetic::pendulum_level_point(&sys, e, 0.0)?;
    let gamma = cfg.damping;
    let field = FnField::new(2, |x: &[f64], out: &mut [f64]| {
        let mut g = [0.0; 2];
        sys.gradient(x, &mut g)?;
        out[0] = g[1];
        out[1] = -g[0] - gamma * g[1];
        Ok(())
    });
    let times: Vec<f64> = (0..cfg.samples_per_trajectory)
        .map(|i| i as f64 * cfg.dt)
        .collect();
    let clean = integrate_adaptive(&field, &q0, &times, 1e-9)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let states = clean
        .states
        .iter()
        .map(|s| {
            let noisy: Vec<f64> = s
                .to_flat()
                .into_iter()
                .map(|v| v + cfg.noise_std * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                .collect();
            PhasePoint::from_flat(&noisy)
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(times, states)
}

pub(super) fn stand_in_split(cfg: &DatasetConfig) -> Result<DatasetSplit> {
    let traj = synthetic_damped_pendulum(cfg)?;
    real_pendulum_split(
        &traj,
        cfg,
        vec![format!(
            "synthetic damped pendulum, damping {}, observation noise {}",
            cfg.damping, cfg.noise_std
        )],
    )
}
