//! Config-driven experiment runs: dataset generation, training, evaluation,
//! rollouts and the energy bump, with every output under one directory.
//!
//! ```text
//! <out>/config.json
//! <out>/data/                 dataset files
//! <out>/seed-<s>/<model>.json checkpoint
//! <out>/seed-<s>/<model>_history.csv, <model>_report.json, <model>_series.csv
//! <out>/seed-<s>/<model>_rollout.csv, <model>_rollout_reverse.csv, hnn_bump.csv
//! <out>/seed-<s>/<model>_rollout/  pixel task: latent.csv and frame_NNNN.pgm
//! <out>/rollup_mean.csv, rollup_std.csv
//! ```

mod config;

use std::fs;
use std::path::{Path, PathBuf};

use log::info;

pub use config::{ExperimentConfig, Setup, PIXEL_TASK};

use crate::data::{generate, DatasetSplit, Part};
use crate::dynamics::{integrate_adaptive, Negated, PhasePoint};
use crate::eval::{
    build_report, default_bump_schedule, energy_bump, energy_series, write_rollup, MetricsReport,
    RollupRow, EVAL_REL_TOL,
};
use crate::hash::sha256_hex;
use crate::hnn::{train, Checkpoint, ModelKind};
use crate::pixels::{
    build_pixel_report, frame_pair, generate_pixel_dataset, latent_rollout, reverse_latent_rollout,
    train_pixel, PixelCheckpoint, PixelDataset,
};
use crate::{Error, Result};

/// Environment variable naming the directory that relative output paths
/// are resolved against.
pub const OUTPUT_ROOT_ENV: &str = "HNN_OUTPUT_ROOT";

const DATA_DIR: &str = "data";
const PIXEL_STEM: &str = "pixels";
/// Latent steps in exported pixel rollouts.
const PIXEL_ROLLOUT_STEPS: usize = 200;

/// Output directory: `out` when given, otherwise the config's own output,
/// placed under `$HNN_OUTPUT_ROOT` when that is set and the path is relative.
pub fn resolve_output(config: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    if let Some(out) = out {
        return out.to_path_buf();
    }
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if config.output.is_relative() => PathBuf::from(root).join(&config.output),
        _ => config.output.clone(),
    }
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(format!("write {}", path.display()), e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(format!("create {}", path.display()), e))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

enum Data {
    Phase(DatasetSplit),
    Pixel(PixelDataset),
}

/// One experiment bound to its output directory.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    /// Allow overwriting checkpoints and datasets made from other configs.
    pub force: bool,
}

impl Experiment {
    pub fn new(config: ExperimentConfig, out: PathBuf, force: bool) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, out, force })
    }

    pub fn data_dir(&self) -> PathBuf {
        self.out.join(DATA_DIR)
    }

    pub fn seed_dir(&self, seed: u64) -> PathBuf {
        self.out.join(format!("seed-{seed}"))
    }

    pub fn checkpoint_path(&self, seed: u64, kind: ModelKind) -> PathBuf {
        self.seed_dir(seed).join(format!("{}.json", kind.name()))
    }

    fn generate_data(&self) -> Result<Data> {
        Ok(match &self.config.setup {
            Setup::Phase { dataset, .. } => Data::Phase(generate(dataset)?),
            Setup::Pixel { dataset, .. } => Data::Pixel(generate_pixel_dataset(dataset)?),
        })
    }

    fn write_data(&self, data: &Data) -> Result<()> {
        let dir = self.data_dir();
        match data {
            Data::Phase(d) => d.write(&dir),
            Data::Pixel(d) => d.write(&dir, PIXEL_STEM),
        }
    }

    fn stored_data(&self) -> Result<Option<Data>> {
        let dir = self.data_dir();
        let data = match &self.config.setup {
            Setup::Phase { dataset, .. } => {
                if !dir.join("meta.json").exists() {
                    return Ok(None);
                }
                let d = DatasetSplit::read(&dir)?;
                if &d.meta.config != dataset {
                    return Err(self.stale(&dir));
                }
                Data::Phase(d)
            }
            Setup::Pixel { dataset, .. } => {
                if !dir.join(format!("{PIXEL_STEM}.json")).exists() {
                    return Ok(None);
                }
                let d = PixelDataset::read(&dir, PIXEL_STEM)?;
                if &d.config != dataset {
                    return Err(self.stale(&dir));
                }
                Data::Pixel(d)
            }
        };
        Ok(Some(data))
    }

    fn stale(&self, dir: &Path) -> Error {
        Error::InvalidConfig(format!(
            "{} holds a dataset generated from a different config; rerun `generate --force`",
            dir.display()
        ))
    }

    /// Writes the dataset and a canonical copy of the config. Rerunning with
    /// the same config rewrites identical bytes.
    pub fn generate(&self) -> Result<()> {
        create_dir(&self.out)?;
        if !self.force {
            self.stored_data()?;
        }
        let data = self.generate_data()?;
        self.write_data(&data)?;
        write_file(
            &self.out.join("config.json"),
            self.config.to_json_pretty()? + "\n",
        )?;
        info!(
            "{}: dataset written to {}",
            self.config.task_name(),
            self.data_dir().display()
        );
        Ok(())
    }

    fn data(&self) -> Result<Data> {
        match self.stored_data()? {
            Some(d) => Ok(d),
            None => {
                self.generate()?;
                self.stored_data()?
                    .ok_or_else(|| Error::Contract("dataset missing after generation".into()))
            }
        }
    }

    /// Trains every model kind for every seed. Existing checkpoints are kept
    /// unless `force` is set.
    pub fn train(&self) -> Result<()> {
        let data = self.data()?;
        for &seed in &self.config.seeds {
            create_dir(&self.seed_dir(seed))?;
            for &kind in &self.config.models {
                let path = self.checkpoint_path(seed, kind);
                if path.exists() && !self.force {
                    return Err(Error::InvalidConfig(format!(
                        "{} exists; pass --force to retrain",
                        path.display()
                    )));
                }
                info!(
                    "{}: training {} with seed {seed}",
                    self.config.task_name(),
                    kind.name()
                );
                let history_path = self
                    .seed_dir(seed)
                    .join(format!("{}_history.csv", kind.name()));
                match (&self.config.setup, &data) {
                    (Setup::Phase { train: cfg, .. }, Data::Phase(d)) => {
                        let cfg = crate::hnn::TrainConfig {
                            seed,
                            ..cfg.clone()
                        };
                        let (model, history) = train(kind, d, &cfg)?;
                        write_file(&history_path, csv_bytes(|b| history.write_csv(b))?)?;
                        Checkpoint::new(model, cfg, d.meta_hash()?).write(&path)?;
                    }
                    (Setup::Pixel { train: cfg, .. }, Data::Pixel(d)) => {
                        let cfg = crate::pixels::PixelTrainConfig {
                            seed,
                            ..cfg.clone()
                        };
                        let (model, history) = train_pixel(kind, d, &cfg)?;
                        write_file(&history_path, csv_bytes(|b| history.write_csv(b))?)?;
                        let hash = sha256_hex(serde_json::to_string(&d.config)?.as_bytes());
                        PixelCheckpoint::new(model, cfg, hash).write(&path)?;
                    }
                    _ => unreachable!("dataset kind follows the setup"),
                }
            }
        }
        Ok(())
    }

    fn read_checkpoint(&self, seed: u64, kind: ModelKind) -> Result<PathBuf> {
        let path = self.checkpoint_path(seed, kind);
        if !path.exists() {
            return Err(Error::io(
                format!(
                    "no checkpoint for {} seed {seed}; run `train` first",
                    kind.name()
                ),
                std::io::Error::new(std::io::ErrorKind::NotFound, path.display().to_string()),
            ));
        }
        Ok(path)
    }

    /// Reports and series for every trained model, plus the roll-up table.
    pub fn evaluate(&self) -> Result<Vec<MetricsReport>> {
        let data = self.data()?;
        let mut reports = Vec::new();
        for &seed in &self.config.seeds {
            for &kind in &self.config.models {
                let path = self.read_checkpoint(seed, kind)?;
                let report = match (&self.config.setup, &data) {
                    (Setup::Phase { .. }, Data::Phase(d)) => {
                        build_report(&Checkpoint::read(&path)?.model, d, seed)?
                    }
                    (Setup::Pixel { train: cfg, .. }, Data::Pixel(d)) => build_pixel_report(
                        &PixelCheckpoint::read(&path)?.model,
                        d,
                        cfg.loss_weights,
                        seed,
                    )?,
                    _ => unreachable!("dataset kind follows the setup"),
                };
                let dir = self.seed_dir(seed);
                let name = kind.name();
                write_file(
                    &dir.join(format!("{name}_report.json")),
                    serde_json::to_string_pretty(&report)? + "\n",
                )?;
                write_file(
                    &dir.join(format!("{name}_series.csv")),
                    csv_bytes(|b| report.series.write_csv(b))?,
                )?;
                info!(
                    "{} {name} seed {seed}: train {:.4e} test {:.4e} energy {:.4e}",
                    report.task, report.train_loss, report.test_loss, report.energy_mse
                );
                reports.push(report);
            }
        }
        write_rollups(&self.out, &reports)?;
        Ok(reports)
    }

    /// Rollout of every trained model from the first test trajectory; with
    /// `reverse`, also integrates back from the end and logs the distance to
    /// the start.
    pub fn rollout(&self, reverse: bool, pgm: bool) -> Result<()> {
        let data = self.data()?;
        for &seed in &self.config.seeds {
            for &kind in &self.config.models {
                let path = self.read_checkpoint(seed, kind)?;
                let dir = self.seed_dir(seed);
                let name = kind.name();
                match &data {
                    Data::Phase(d) => {
                        let model = Checkpoint::read(&path)?.model;
                        let (x0, t_eval) = rollout_start(d)?;
                        let fwd = integrate_adaptive(&model, &x0, &t_eval, EVAL_REL_TOL)?;
                        let e = energy_series(&d.meta.system, &fwd)?;
                        let fwd = fwd.with_energy(e)?;
                        write_file(
                            &dir.join(format!("{name}_rollout.csv")),
                            csv_bytes(|b| fwd.write_csv(b))?,
                        )?;
                        if reverse {
                            let back = integrate_adaptive(
                                &Negated(&model),
                                fwd.last(),
                                &t_eval,
                                EVAL_REL_TOL,
                            )?;
                            let gap = max_gap(back.last(), &x0);
                            info!(
                                "{name} seed {seed}: reverse rollout ends {gap:.3e} from the start"
                            );
                            write_file(
                                &dir.join(format!("{name}_rollout_reverse.csv")),
                                csv_bytes(|b| back.write_csv(b))?,
                            )?;
                        }
                    }
                    Data::Pixel(d) => {
                        let model = PixelCheckpoint::read(&path)?.model;
                        let id = d.test_ids().start;
                        let r = latent_rollout(
                            &model,
                            &frame_pair(&d.frames[id], 0),
                            PIXEL_ROLLOUT_STEPS,
                        )?;
                        r.export(&dir.join(format!("{name}_rollout")), d.config.side, pgm)?;
                        if reverse {
                            let back = reverse_latent_rollout(
                                &model,
                                r.z(PIXEL_ROLLOUT_STEPS),
                                PIXEL_ROLLOUT_STEPS,
                            )?;
                            let (a, b) = (r.z(0), back.z(PIXEL_ROLLOUT_STEPS));
                            let gap = (a.z_q - b.z_q).abs().max((a.z_p - b.z_p).abs());
                            info!("{name} seed {seed}: reverse latent rollout ends {gap:.3e} from the start");
                            back.export(
                                &dir.join(format!("{name}_rollout_reverse")),
                                d.config.side,
                                pgm,
                            )?;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Energy bump of every trained HNN from the first test trajectory;
    /// the energy column of `hnn_bump.csv` holds `H_theta`.
    pub fn bump(&self) -> Result<()> {
        if !self.config.models.contains(&ModelKind::Hnn) {
            return Err(Error::InvalidConfig(
                "the energy bump needs an hnn model".into(),
            ));
        }
        let data = self.data()?;
        for &seed in &self.config.seeds {
            let path = self.read_checkpoint(seed, ModelKind::Hnn)?;
            let (params, x0) = match &data {
                Data::Phase(d) => (Checkpoint::read(&path)?.model.params, rollout_start(d)?.0),
                Data::Pixel(d) => {
                    let model = PixelCheckpoint::read(&path)?.model;
                    let z = model.encode_pair(&frame_pair(&d.frames[d.test_ids().start], 0))?;
                    (model.dynamics, PhasePoint::new(vec![z.z_q], vec![z.z_p])?)
                }
            };
            let traj = energy_bump(&params, &x0, &default_bump_schedule())?;
            write_file(
                &self.seed_dir(seed).join("hnn_bump.csv"),
                csv_bytes(|b| traj.write_csv(b))?,
            )?;
        }
        Ok(())
    }

    /// Generate, train and evaluate.
    pub fn run(&self) -> Result<Vec<MetricsReport>> {
        self.generate()?;
        self.train()?;
        self.evaluate()
    }
}

/// Clean start of the first test trajectory and twice the recorded span.
fn rollout_start(d: &DatasetSplit) -> Result<(PhasePoint, Vec<f64>)> {
    let groups = d.trajectories(Part::Test);
    let first = groups
        .first()
        .ok_or_else(|| Error::Contract("dataset has no test trajectory".into()))?;
    let cfg = &d.meta.config;
    if cfg.task == crate::data::Task::RealPendulum {
        let x0 = PhasePoint::from_flat(&first[0].state)?;
        let t0 = first[0].t;
        return Ok((x0, first.iter().map(|r| r.t - t0).collect()));
    }
    let x0 = d.initial_state(first[0].trajectory_id)?;
    let n = 2 * (cfg.samples_per_trajectory - 1);
    Ok((x0, (0..=n).map(|i| i as f64 * cfg.dt).collect()))
}

fn max_gap(a: &PhasePoint, b: &PhasePoint) -> f64 {
    a.to_flat()
        .iter()
        .zip(b.to_flat())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `rollup_mean.csv` and `rollup_std.csv` in `dir`.
pub fn write_rollups(dir: &Path, reports: &[MetricsReport]) -> Result<()> {
    let rows = RollupRow::from_reports(reports);
    let (mut means, mut stds) = (Vec::new(), Vec::new());
    write_rollup(&rows, &mut means, &mut stds)?;
    write_file(&dir.join("rollup_mean.csv"), means)?;
    write_file(&dir.join("rollup_std.csv"), stds)
}

/// Every `*.json` config in `dir`, sorted by file name.
pub fn load_config_dir(dir: &Path) -> Result<Vec<(PathBuf, ExperimentConfig)>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(format!("read {}", dir.display()), e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| ExperimentConfig::load(&p).map(|c| (p, c)))
        .collect()
}

/// Runs every config; with `root`, each experiment writes to
/// `<root>/<task>` and the combined roll-up goes to `root`.
pub fn run_all(
    configs: &[ExperimentConfig],
    root: Option<&Path>,
    seeds: Option<&[u64]>,
    force: bool,
) -> Result<Vec<MetricsReport>> {
    let mut all = Vec::new();
    for cfg in configs {
        let mut cfg = cfg.clone();
        if let Some(s) = seeds {
            cfg.seeds = s.to_vec();
        }
        let out = match root {
            Some(r) => r.join(cfg.task_name()),
            None => resolve_output(&cfg, None),
        };
        all.extend(Experiment::new(cfg, out, force)?.run()?);
    }
    if let Some(r) = root {
        create_dir(r)?;
        write_rollups(r, &all)?;
    }
    Ok(all)
}
