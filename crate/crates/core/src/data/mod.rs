//! Datasets of `(state, time derivative)` records.
//!
//! Generated tasks integrate an analytic system from random initial
//! conditions, attach analytic derivative targets at the clean states and then
//! perturb the recorded states with Gaussian noise. Every trajectory draws
//! from its own random stream keyed by `(seed, trajectory_id)`, so a dataset
//! does not depend on generation order.

mod real;
mod synthetic;

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::diffcore::DatasetBatch;
use crate::dynamics::{fmt_f64, AnalyticSystem, PhasePoint};
use crate::{Error, Result};

pub use real::{
    finite_difference_targets, load_real_pendulum, read_columns, real_pendulum_split,
    synthetic_damped_pendulum, ColumnMap, ColumnRef,
};
pub use synthetic::{
    circular_orbit, generate, sample_nbody_dataset, sample_pendulum_dataset, sample_spring_dataset,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    MassSpring,
    Pendulum,
    RealPendulum,
    TwoBody,
    ThreeBody,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::MassSpring => "mass_spring",
            Task::Pendulum => "pendulum",
            Task::RealPendulum => "real_pendulum",
            Task::TwoBody => "two_body",
            Task::ThreeBody => "three_body",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub task: Task,
    pub n_train_trajectories: usize,
    pub n_test_trajectories: usize,
    pub samples_per_trajectory: usize,
    /// Std of the Gaussian noise added to recorded states.
    pub noise_std: f64,
    /// Initial energies (spring, pendulum, damped stand-in).
    pub energy_range: [f64; 2],
    /// Orbits: body separation for two bodies, circumradius for more.
    pub radius_range: [f64; 2],
    /// Std of the relative perturbation applied to orbital velocities.
    pub velocity_noise_std: f64,
    pub dt: f64,
    pub seed: u64,
    /// Recorded real-pendulum file; the damped stand-in is used when absent.
    #[serde(default)]
    pub source: Option<PathBuf>,
    #[serde(default)]
    pub column_map: ColumnMap,
    /// Linear friction coefficient of the stand-in recording.
    #[serde(default)]
    pub damping: f64,
}

impl DatasetConfig {
    fn base(task: Task) -> Self {
        Self {
            task,
            n_train_trajectories: 25,
            n_test_trajectories: 25,
            samples_per_trajectory: 30,
            noise_std: 0.1,
            energy_range: [0.2, 1.0],
            radius_range: [0.5, 1.5],
            velocity_noise_std: 0.0,
            dt: 0.1,
            seed: 0,
            source: None,
            column_map: ColumnMap::default(),
            damping: 0.0,
        }
    }

    pub fn mass_spring() -> Self {
        Self::base(Task::MassSpring)
    }

    pub fn pendulum() -> Self {
        Self {
            energy_range: [1.3, 2.3],
            ..Self::base(Task::Pendulum)
        }
    }

    /// A single recording of 500 samples; the stand-in loses energy slowly
    /// through friction.
    pub fn real_pendulum() -> Self {
        Self {
            n_train_trajectories: 1,
            n_test_trajectories: 0,
            samples_per_trajectory: 500,
            noise_std: 0.01,
            energy_range: [2.0, 2.0],
            dt: 0.05,
            damping: 0.005,
            ..Self::base(Task::RealPendulum)
        }
    }

    pub fn two_body() -> Self {
        Self {
            n_train_trajectories: 160,
            n_test_trajectories: 40,
            samples_per_trajectory: 50,
            noise_std: 0.0,
            velocity_noise_std: 0.05,
            dt: 0.5,
            ..Self::base(Task::TwoBody)
        }
    }

    pub fn three_body() -> Self {
        Self {
            radius_range: [0.9, 1.2],
            dt: 0.1,
            ..Self::two_body()
        }
        .with_task(Task::ThreeBody)
    }

    fn with_task(mut self, task: Task) -> Self {
        self.task = task;
        self
    }

    pub fn for_task(task: Task) -> Self {
        match task {
            Task::MassSpring => Self::mass_spring(),
            Task::Pendulum => Self::pendulum(),
            Task::RealPendulum => Self::real_pendulum(),
            Task::TwoBody => Self::two_body(),
            Task::ThreeBody => Self::three_body(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!(
                "noise_std must be non-negative, got {}",
                self.noise_std
            ));
        }
        if !(self.velocity_noise_std >= 0.0 && self.velocity_noise_std.is_finite()) {
            return bad(format!(
                "velocity_noise_std must be non-negative, got {}",
                self.velocity_noise_std
            ));
        }
        if !(self.damping >= 0.0 && self.damping.is_finite()) {
            return bad(format!(
                "damping must be non-negative, got {}",
                self.damping
            ));
        }
        for (name, [lo, hi]) in [
            ("energy_range", self.energy_range),
            ("radius_range", self.radius_range),
        ] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return bad(format!(
                    "{name} must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
                ));
            }
        }
        let min_samples = if self.task == Task::RealPendulum {
            10
        } else {
            2
        };
        if self.samples_per_trajectory < min_samples {
            return bad(format!(
                "samples_per_trajectory must be at least {min_samples}, got {}",
                self.samples_per_trajectory
            ));
        }
        if self.task != Task::RealPendulum
            && (self.n_train_trajectories == 0 || self.n_test_trajectories == 0)
        {
            return bad("need at least one train and one test trajectory".into());
        }
        Ok(())
    }

    /// The Hamiltonian that generated (or best describes) the data.
    pub fn system(&self) -> AnalyticSystem {
        match self.task {
            Task::MassSpring => AnalyticSystem::mass_spring(),
            Task::Pendulum | Task::RealPendulum => AnalyticSystem::pendulum(),
            Task::TwoBody => AnalyticSystem::nbody(2),
            Task::ThreeBody => AnalyticSystem::nbody(3),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub state: Vec<f64>,
    pub target: Vec<f64>,
    pub trajectory_id: usize,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub config: DatasetConfig,
    pub library_version: String,
    /// Flat state length.
    pub dim: usize,
    pub system: AnalyticSystem,
    /// Noise-free initial state of every trajectory, indexed by id.
    pub initial_states: Vec<Vec<f64>>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<Record>,
    pub test: Vec<Record>,
    pub meta: DatasetMeta,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    Train,
    Test,
}

impl DatasetSplit {
    pub fn dim(&self) -> usize {
        self.meta.dim
    }

    pub fn records(&self, part: Part) -> &[Record] {
        match part {
            Part::Train => &self.train,
            Part::Test => &self.test,
        }
    }

    pub fn batch(&self, part: Part) -> Result<DatasetBatch> {
        batch_of(self.records(part).iter(), self.dim())
    }

    pub fn train_batch(&self) -> Result<DatasetBatch> {
        self.batch(Part::Train)
    }

    pub fn test_batch(&self) -> Result<DatasetBatch> {
        self.batch(Part::Test)
    }

    /// Records grouped by trajectory in order of first appearance.
    pub fn trajectories(&self, part: Part) -> Vec<Vec<&Record>> {
        let mut groups: Vec<Vec<&Record>> = Vec::new();
        for r in self.records(part) {
            match groups.last_mut() {
                Some(g) if g[0].trajectory_id == r.trajectory_id => g.push(r),
                _ => groups.push(vec![r]),
            }
        }
        groups
    }

    /// Clean initial condition of a trajectory.
    pub fn initial_state(&self, trajectory_id: usize) -> Result<PhasePoint> {
        let x = self.meta.initial_states.get(trajectory_id).ok_or_else(|| {
            Error::Contract(format!("no initial state for trajectory {trajectory_id}"))
        })?;
        PhasePoint::from_flat(x)
    }

    /// SHA-256 of the canonical meta document, hex encoded.
    pub fn meta_hash(&self) -> Result<String> {
        let json = serde_json::to_string(&self.meta)?;
        Ok(crate::hash::sha256_hex(json.as_bytes()))
    }

    /// Writes `train.csv`, `test.csv` and `meta.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("create {}", dir.display()), e))?;
        write_records(&dir.join("train.csv"), &self.train, self.dim())?;
        write_records(&dir.join("test.csv"), &self.test, self.dim())?;
        let meta_path = dir.join("meta.json");
        let json = serde_json::to_string_pretty(&self.meta)?;
        fs::write(&meta_path, json + "\n")
            .map_err(|e| Error::io(format!("write {}", meta_path.display()), e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("meta.json");
        let text = fs::read_to_string(&meta_path)
            .map_err(|e| Error::io(format!("read {}", meta_path.display()), e))?;
        let meta: DatasetMeta = serde_json::from_str(&text)?;
        let train = read_records(&dir.join("train.csv"), meta.dim)?;
        let test = read_records(&dir.join("test.csv"), meta.dim)?;
        Ok(Self { train, test, meta })
    }
}

pub fn batch_of<'a>(records: impl Iterator<Item = &'a Record>, dim: usize) -> Result<DatasetBatch> {
    let mut states = Vec::new();
    let mut targets = Vec::new();
    let mut n = 0;
    for r in records {
        if r.state.len() != dim || r.target.len() != dim {
            return Err(Error::Shape(format!(
                "record of trajectory {} has dims {}/{}, expected {dim}",
                r.trajectory_id,
                r.state.len(),
                r.target.len()
            )));
        }
        states.extend_from_slice(&r.state);
        targets.extend_from_slice(&r.target);
        n += 1;
    }
    let to_array = |v| Array2::from_shape_vec((n, dim), v).map_err(|e| Error::Shape(e.to_string()));
    DatasetBatch::new(to_array(states)?, to_array(targets)?)
}

fn csv_header(dim: usize) -> String {
    let n = dim / 2;
    let mut cols = vec!["trajectory_id".to_string(), "t".to_string()];
    cols.extend((0..n).map(|i| format!("q{i}")));
    cols.extend((0..n).map(|i| format!("p{i}")));
    cols.extend((0..n).map(|i| format!("dq{i}dt")));
    cols.extend((0..n).map(|i| format!("dp{i}dt")));
    cols.join(",")
}

fn write_records(path: &Path, records: &[Record], dim: usize) -> Result<()> {
    let file =
        fs::File::create(path).map_err(|e| Error::io(format!("create {}", path.display()), e))?;
    let mut out = BufWriter::new(file);
    let ctx = |e| Error::io(format!("write {}", path.display()), e);
    writeln!(out, "{}", csv_header(dim)).map_err(ctx)?;
    for r in records {
        let mut row = vec![r.trajectory_id.to_string(), fmt_f64(r.t)];
        row.extend(r.state.iter().chain(&r.target).map(|&v| fmt_f64(v)));
        writeln!(out, "{}", row.join(",")).map_err(ctx)?;
    }
    out.flush().map_err(ctx)
}

fn read_records(path: &Path, dim: usize) -> Result<Vec<Record>> {
    let file =
        fs::File::open(path).map_err(|e| Error::io(format!("open {}", path.display()), e))?;
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("read {}", path.display()), e))?;
        let lineno = i + 1;
        if i == 0 {
            if line != csv_header(dim) {
                return Err(parse_err(lineno, format!("unexpected header {line:?}")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 + 2 * dim {
            return Err(parse_err(
                lineno,
                format!("expected {} fields, got {}", 2 + 2 * dim, fields.len()),
            ));
        }
        let trajectory_id = fields[0]
            .parse()
            .map_err(|e| parse_err(lineno, format!("trajectory id: {e}")))?;
        let nums = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(lineno, e.to_string()))?;
        records.push(Record {
            t: nums[0],
            state: nums[1..1 + dim].to_vec(),
            target: nums[1 + dim..].to_vec(),
            trajectory_id,
        });
    }
    Ok(records)
}
