use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{
    compare_rollouts, conserved_quantity_series, coordinate_mse, energy_series, EVAL_REL_TOL,
};
use crate::data::{DatasetSplit, Part, Task};
use crate::dynamics::{fmt_f64, integrate_adaptive, PhasePoint, Trajectory};
use crate::hash::sha256_hex;
use crate::hnn::{Model, ModelKind};
use crate::{Error, Result};

/// Per-time diagnostics of one rollout.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub t: Vec<f64>,
    pub coord_mse: Vec<f64>,
    /// Energy of the model's predicted state under the reference Hamiltonian.
    pub true_energy: Vec<f64>,
    /// `H_theta` of the predicted state (HNN models only).
    pub hnn_quantity: Option<Vec<f64>>,
}

impl Series {
    /// `t,coord_mse,true_energy,hnn_quantity`; the last column is empty for
    /// models without a learned Hamiltonian.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,coord_mse,true_energy,hnn_quantity")?;
        for i in 0..self.t.len() {
            let h = self
                .hnn_quantity
                .as_ref()
                .map(|v| fmt_f64(v[i]))
                .unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{}",
                fmt_f64(self.t[i]),
                fmt_f64(self.coord_mse[i]),
                fmt_f64(self.true_energy[i]),
                h
            )?;
        }
        Ok(())
    }

    fn check(&self) -> Result<()> {
        let n = self.t.len();
        let aligned = self.coord_mse.len() == n
            && self.true_energy.len() == n
            && self.hnn_quantity.as_ref().is_none_or(|v| v.len() == n);
        if !aligned {
            return Err(Error::Shape("report series have different lengths".into()));
        }
        let finite = self
            .t
            .iter()
            .chain(&self.coord_mse)
            .chain(&self.true_energy)
            .chain(self.hnn_quantity.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Numeric(
                "report series contain non-finite values".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: String,
    pub model: ModelKind,
    pub seed: u64,
    pub train_loss: f64,
    pub test_loss: f64,
    pub energy_mse: f64,
    /// Rollout of the first test trajectory.
    pub series: Series,
    pub config_hash: String,
    pub checkpoint_hash: String,
}

impl MetricsReport {
    pub fn validate(&self) -> Result<()> {
        if ![self.train_loss, self.test_loss, self.energy_mse]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::Numeric(format!(
                "{} {} report has non-finite metrics",
                self.task,
                self.model.name()
            )));
        }
        self.series.check()
    }
}

fn series_for(
    model: &Model,
    pred: &Trajectory,
    truth: &Trajectory,
    energy: Vec<f64>,
) -> Result<Series> {
    Ok(Series {
        t: pred.times.clone(),
        coord_mse: coordinate_mse(pred, truth)?,
        true_energy: energy,
        hnn_quantity: match model.kind {
            ModelKind::Hnn => Some(conserved_quantity_series(&model.params, pred)?),
            ModelKind::Baseline => None,
        },
    })
}

/// Rollouts of generated tasks cover this many recorded spans.
pub const DEFAULT_HORIZON: usize = 2;

/// Scores a phase-space model on its dataset.
///
/// Generated tasks roll the model out from the clean start of every test
/// trajectory for twice the recorded span and average the energy error
/// against the true flow. The real-pendulum task rolls out from the first
/// test record over the test span and compares against the recording.
pub fn build_report(model: &Model, dataset: &DatasetSplit, seed: u64) -> Result<MetricsReport> {
    build_report_with_horizon(model, dataset, seed, DEFAULT_HORIZON)
}

/// [`build_report`] with rollouts of generated tasks covering `spans`
/// recorded spans.
pub fn build_report_with_horizon(
    model: &Model,
    dataset: &DatasetSplit,
    seed: u64,
    spans: usize,
) -> Result<MetricsReport> {
    if spans == 0 {
        return Err(Error::InvalidConfig(
            "rollout horizon must cover at least one span".into(),
        ));
    }
    if model.dim() != dataset.dim() {
        return Err(Error::Shape(format!(
            "model expects states of length {}, dataset has {}",
            model.dim(),
            dataset.dim()
        )));
    }
    let cfg = &dataset.meta.config;
    let sys = &dataset.meta.system;
    let train_loss = model.loss(&dataset.train_batch()?)?;
    let test_loss = model.loss(&dataset.test_batch()?)?;

    let (energy_mse, series) = if cfg.task == Task::RealPendulum {
        let test = &dataset.test;
        let times: Vec<f64> = test.iter().map(|r| r.t).collect();
        let states = test
            .iter()
            .map(|r| PhasePoint::from_flat(&r.state))
            .collect::<Result<Vec<_>>>()?;
        let truth = Trajectory::new(times.clone(), states)?;
        let pred = integrate_adaptive(model, truth.first(), &times, EVAL_REL_TOL)?;
        let pred_e = energy_series(sys, &pred)?;
        let true_e = energy_series(sys, &truth)?;
        let mse = pred_e
            .iter()
            .zip(&true_e)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / pred_e.len() as f64;
        (mse, series_for(model, &pred, &truth, pred_e)?)
    } else {
        let horizon = spans * (cfg.samples_per_trajectory - 1);
        let t_eval: Vec<f64> = (0..=horizon).map(|i| i as f64 * cfg.dt).collect();
        let mut total = 0.0;
        let mut first = None;
        let groups = dataset.trajectories(Part::Test);
        for g in &groups {
            let x0 = dataset.initial_state(g[0].trajectory_id)?;
            let cmp = compare_rollouts(model, sys, &x0, &t_eval)?;
            total += cmp.energy_mse();
            if first.is_none() {
                first = Some(series_for(
                    model,
                    &cmp.pred,
                    &cmp.truth,
                    cmp.pred_energy.clone(),
                )?);
            }
        }
        (total / groups.len() as f64, first.unwrap_or_default())
    };

    let report = MetricsReport {
        task: cfg.task.name().to_string(),
        model: model.kind,
        seed,
        train_loss,
        test_loss,
        energy_mse,
        series,
        config_hash: dataset.meta_hash()?,
        checkpoint_hash: sha256_hex(serde_json::to_string(model)?.as_bytes()),
    };
    report.validate()?;
    Ok(report)
}

/// One task row of the summary table: train loss, test loss and energy error
/// for the baseline and then the HNN, as mean and sample std over seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct RollupRow {
    pub task: String,
    pub n_seeds: usize,
    pub mean: [f64; 6],
    pub std: [f64; 6],
}

const ROLLUP_HEADER: &str =
    "task,baseline_train_loss,baseline_test_loss,baseline_energy,hnn_train_loss,hnn_test_loss,hnn_energy";

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

impl RollupRow {
    /// Groups reports by task, in order of first appearance.
    pub fn from_reports(reports: &[MetricsReport]) -> Vec<RollupRow> {
        let mut order: Vec<String> = Vec::new();
        let mut by_task: BTreeMap<&str, Vec<&MetricsReport>> = BTreeMap::new();
        for r in reports {
            if !order.contains(&r.task) {
                order.push(r.task.clone());
            }
            by_task.entry(&r.task).or_default().push(r);
        }
        order
            .iter()
            .map(|task| {
                let rs = &by_task[task.as_str()];
                let mut mean = [f64::NAN; 6];
                let mut std = [f64::NAN; 6];
                let mut n_seeds = 0;
                for (k, kind) in [ModelKind::Baseline, ModelKind::Hnn]
                    .into_iter()
                    .enumerate()
                {
                    let of_kind: Vec<_> = rs.iter().filter(|r| r.model == kind).collect();
                    n_seeds = n_seeds.max(of_kind.len());
                    let cols: [Vec<f64>; 3] = [
                        of_kind.iter().map(|r| r.train_loss).collect(),
                        of_kind.iter().map(|r| r.test_loss).collect(),
                        of_kind.iter().map(|r| r.energy_mse).collect(),
                    ];
                    for (j, c) in cols.iter().enumerate() {
                        (mean[3 * k + j], std[3 * k + j]) = mean_std(c);
                    }
                }
                RollupRow {
                    task: task.clone(),
                    n_seeds,
                    mean,
                    std,
                }
            })
            .collect()
    }
}

/// Writes the summary table twice: means to `means`, sample stds to `stds`.
pub fn write_rollup<W: Write, V: Write>(
    rows: &[RollupRow],
    mut means: W,
    mut stds: V,
) -> Result<()> {
    writeln!(means, "{ROLLUP_HEADER}")?;
    writeln!(stds, "{ROLLUP_HEADER}")?;
    for row in rows {
        let fmt = |v: &[f64; 6]| v.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(",");
        writeln!(means, "{},{}", row.task, fmt(&row.mean))?;
        writeln!(stds, "{},{}", row.task, fmt(&row.std))?;
    }
    Ok(())
}
