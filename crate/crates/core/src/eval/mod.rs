//! Metrics: derivative losses, energy and coordinate error of rollouts, the
//! quantity conserved by a learned Hamiltonian, and the energy bump.

mod report;

use serde::{Deserialize, Serialize};

use crate::diffcore::MlpParams;
use crate::dynamics::{
    integrate_adaptive, rk4_step, AnalyticSystem, Hamiltonian, PhasePoint, Riemann, Symplectic,
    Trajectory, VectorField,
};
use crate::hnn::LearnedHamiltonian;
use crate::{Error, Result};

pub use report::{
    build_report, build_report_with_horizon, write_rollup, MetricsReport, RollupRow, Series,
    DEFAULT_HORIZON,
};

/// Tolerance for every adaptive rollout used in evaluation.
pub const EVAL_REL_TOL: f64 = 1e-9;

fn check_aligned(a: &Trajectory, b: &Trajectory) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "trajectories have {} and {} samples",
            a.len(),
            b.len()
        )));
    }
    for (i, (s, t)) in a.times.iter().zip(&b.times).enumerate() {
        if (s - t).abs() > 1e-9 * (1.0 + s.abs()) {
            return Err(Error::Shape(format!(
                "sample {i} is at t={s} in one trajectory and t={t} in the other"
            )));
        }
    }
    Ok(())
}

/// Mean over coordinates of the squared error at each time.
pub fn coordinate_mse(pred: &Trajectory, truth: &Trajectory) -> Result<Vec<f64>> {
    check_aligned(pred, truth)?;
    pred.states
        .iter()
        .zip(&truth.states)
        .map(|(a, b)| {
            let (a, b) = (a.to_flat(), b.to_flat());
            if a.len() != b.len() {
                return Err(Error::Shape("state dimensions differ".into()));
            }
            Ok(a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64)
        })
        .collect()
}

/// `H_sys` along every state.
pub fn energy_series(sys: &impl Hamiltonian, traj: &Trajectory) -> Result<Vec<f64>> {
    traj.states
        .iter()
        .map(|s| sys.value(&s.to_flat()))
        .collect()
}

/// Model and ground-truth rollouts from a shared start.
#[derive(Clone, Debug)]
pub struct Comparison {
    pub pred: Trajectory,
    pub truth: Trajectory,
    pub pred_energy: Vec<f64>,
    pub true_energy: Vec<f64>,
}

impl Comparison {
    /// Mean over time of the squared energy error.
    pub fn energy_mse(&self) -> f64 {
        let n = self.pred_energy.len() as f64;
        self.pred_energy
            .iter()
            .zip(&self.true_energy)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / n
    }
}

/// Integrates `model` and the analytic field of `sys` from `x0` along `t_eval`.
pub fn compare_rollouts<F: VectorField + ?Sized>(
    model: &F,
    sys: &AnalyticSystem,
    x0: &PhasePoint,
    t_eval: &[f64],
) -> Result<Comparison> {
    let pred = integrate_adaptive(model, x0, t_eval, EVAL_REL_TOL)
        .map_err(|e| context(e, "model rollout"))?;
    let truth = integrate_adaptive(&Symplectic(sys), x0, t_eval, EVAL_REL_TOL)
        .map_err(|e| context(e, "ground-truth rollout"))?;
    Ok(Comparison {
        pred_energy: energy_series(sys, &pred)?,
        true_energy: energy_series(sys, &truth)?,
        pred,
        truth,
    })
}

fn context(e: Error, what: &str) -> Error {
    match e {
        Error::Numeric(msg) => Error::Numeric(format!("{what}: {msg}")),
        Error::StepUnderflow { t, h, span } => Error::Numeric(format!(
            "{what}: step size underflow at t={t} (h={h:e}, span {span})"
        )),
        other => other,
    }
}

/// Mean over time of `(H(model rollout) - H(true rollout))^2`.
pub fn energy_mse<F: VectorField + ?Sized>(
    model: &F,
    sys: &AnalyticSystem,
    x0: &PhasePoint,
    t_eval: &[f64],
) -> Result<f64> {
    Ok(compare_rollouts(model, sys, x0, t_eval)?.energy_mse())
}

/// `H_theta` along the trajectory's states.
pub fn conserved_quantity_series(params: &MlpParams, traj: &Trajectory) -> Result<Vec<f64>> {
    energy_series(&LearnedHamiltonian::new(params)?, traj)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpField {
    /// Conserves `H_theta`.
    Symplectic,
    /// Ascends `H_theta`.
    Riemann,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpSegment {
    pub field: BumpField,
    pub duration: f64,
    pub step: f64,
}

impl BumpSegment {
    pub fn new(field: BumpField, duration: f64, step: f64) -> Self {
        Self {
            field,
            duration,
            step,
        }
    }
}

/// Symplectic flow for 5 time units, a Riemann push for 0.5, then the
/// symplectic flow again.
pub fn default_bump_schedule() -> Vec<BumpSegment> {
    vec![
        BumpSegment::new(BumpField::Symplectic, 5.0, 0.01),
        BumpSegment::new(BumpField::Riemann, 0.5, 0.01),
        BumpSegment::new(BumpField::Symplectic, 5.0, 0.01),
    ]
}

/// Piecewise fixed-step RK4 that alternates between the symplectic and the
/// Riemann gradient of `H_theta`. Each segment takes `round(duration / step)`
/// steps; the result carries `H_theta` as its energy column.
pub fn energy_bump(
    params: &MlpParams,
    x0: &PhasePoint,
    schedule: &[BumpSegment],
) -> Result<Trajectory> {
    let h = LearnedHamiltonian::new(params)?;
    if 2 * x0.dof() != h.dim() {
        return Err(Error::Shape(format!(
            "start has {} coordinates, network expects {}",
            2 * x0.dof(),
            h.dim()
        )));
    }
    let mut t = 0.0;
    let mut x = x0.clone();
    let mut times = vec![t];
    let mut states = vec![x.clone()];
    for (segment, seg) in schedule.iter().enumerate() {
        if !(seg.step > 0.0 && seg.duration >= 0.0 && seg.duration.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "segment {segment}: need positive step and non-negative duration"
            )));
        }
        let n = (seg.duration / seg.step).round() as usize;
        for _ in 0..n {
            let next = match seg.field {
                BumpField::Symplectic => rk4_step(&Symplectic(h), &x, seg.step),
                BumpField::Riemann => rk4_step(&Riemann(h), &x, seg.step),
            };
            x = next.map_err(|e| Error::Numeric(format!("energy bump segment {segment}: {e}")))?;
            t += seg.step;
            times.push(t);
            states.push(x.clone());
        }
    }
    let traj = Trajectory::new(times, states)?;
    let quantity = energy_series(&h, &traj)?;
    traj.with_energy(quantity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::Activation;

    fn traj(values: &[[f64; 2]]) -> Trajectory {
        let times = (0..values.len()).map(|i| i as f64 * 0.1).collect();
        let states = values
            .iter()
            .map(|v| PhasePoint::from_flat(v).unwrap())
            .collect();
        Trajectory::new(times, states).unwrap()
    }

    #[test]
    fn coordinate_mse_examples() {
        let a = traj(&[[1.0, 2.0], [0.5, -1.0]]);
        assert_eq!(coordinate_mse(&a, &a).unwrap(), vec![0.0, 0.0]);
        let b = traj(&[[1.5, 2.5], [1.0, -0.5]]);
        assert_eq!(coordinate_mse(&a, &b).unwrap(), vec![0.25, 0.25]);
        let c = traj(&[[1.0, 2.0]]);
        assert!(coordinate_mse(&a, &c).is_err());
    }

    #[test]
    fn analytic_field_has_zero_energy_error() {
        for sys in [AnalyticSystem::mass_spring(), AnalyticSystem::pendulum()] {
            let x0 = PhasePoint::new(vec![0.5], vec![0.3]).unwrap();
            let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
            assert!(energy_mse(&Symplectic(&sys), &sys, &x0, &t).unwrap() < 1e-12);
        }
    }

    #[test]
    fn bump_schedules() {
        let params = MlpParams::init(&[2, 16, 16, 1], Activation::Tanh, 4).unwrap();
        let x0 = PhasePoint::new(vec![0.4], vec![0.1]).unwrap();
        let empty = energy_bump(&params, &x0, &[]).unwrap();
        assert_eq!(empty.len(), 1);

        let flat = energy_bump(
            &params,
            &x0,
            &[BumpSegment::new(BumpField::Symplectic, 2.0, 0.01)],
        )
        .unwrap();
        let e = flat.energy.as_ref().unwrap();
        let spread =
            e.iter().cloned().fold(f64::MIN, f64::max) - e.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-6, "{spread}");

        let up = energy_bump(
            &params,
            &x0,
            &[BumpSegment::new(BumpField::Riemann, 0.5, 0.01)],
        )
        .unwrap();
        let e = up.energy.as_ref().unwrap();
        assert!(e.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(up.len(), 51);
    }

    #[test]
    fn conserved_series_is_deterministic() {
        let params = MlpParams::init(&[2, 8, 1], Activation::Tanh, 1).unwrap();
        let t = traj(&[[0.0, 0.0], [1.0, 1.0]]);
        let a = conserved_quantity_series(&params, &t).unwrap();
        assert_eq!(a, conserved_quantity_series(&params, &t).unwrap());
        assert!(a.iter().all(|v| v.is_finite()));
        let baseline = MlpParams::init(&[2, 8, 2], Activation::Tanh, 1).unwrap();
        assert!(conserved_quantity_series(&baseline, &t).is_err());
    }
}
