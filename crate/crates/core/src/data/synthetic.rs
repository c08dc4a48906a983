use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{real, DatasetConfig, DatasetMeta, DatasetSplit, Record, Task};
use crate::dynamics::{
    integrate_adaptive, AnalyticSystem, Hamiltonian, PhasePoint, Symplectic, VectorField,
};
use crate::{Error, Result};

const REL_TOL: f64 = 1e-9;
const MAX_ORBIT_RETRIES: usize = 20;

/// Generates the dataset described by `cfg`.
pub fn generate(cfg: &DatasetConfig) -> Result<DatasetSplit> {
    match cfg.task {
        Task::MassSpring => sample_spring_dataset(cfg),
        Task::Pendulum => sample_pendulum_dataset(cfg),
        Task::TwoBody | Task::ThreeBody => sample_nbody_dataset(cfg),
        Task::RealPendulum => match &cfg.source {
            Some(path) => real::load_real_pendulum_with(path, cfg),
            None => real::stand_in_split(cfg),
        },
    }
}

/// Independent streams per trajectory: one for initial conditions, one for
/// observation noise. A noise-free config therefore reproduces the clean
/// states of a noisy one exactly.
fn streams(seed: u64, trajectory_id: usize) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut init = ChaCha8Rng::seed_from_u64(seed);
    init.set_stream(2 * trajectory_id as u64);
    let mut noise = ChaCha8Rng::seed_from_u64(seed);
    noise.set_stream(2 * trajectory_id as u64 + 1);
    (init, noise)
}

fn uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

fn sample_times(cfg: &DatasetConfig) -> Vec<f64> {
    (0..cfg.samples_per_trajectory)
        .map(|i| i as f64 * cfg.dt)
        .collect()
}

struct Generated {
    records: Vec<Record>,
    initial: Vec<f64>,
}

/// Integrates one trajectory, attaches analytic targets at the clean states
/// and adds observation noise.
fn simulate(
    sys: &AnalyticSystem,
    x0: &PhasePoint,
    cfg: &DatasetConfig,
    trajectory_id: usize,
    noise_rng: &mut ChaCha8Rng,
) -> Result<(Generated, Vec<PhasePoint>)> {
    let times = sample_times(cfg);
    let field = Symplectic(sys);
    let traj = integrate_adaptive(&field, x0, &times, REL_TOL)?;
    let mut records = Vec::with_capacity(times.len());
    for (&t, s) in times.iter().zip(&traj.states) {
        let clean = s.to_flat();
        let mut target = vec![0.0; clean.len()];
        field.eval(&clean, &mut target)?;
        let state = clean
            .iter()
            .map(|v| v + cfg.noise_std * normal(noise_rng))
            .collect();
        records.push(Record {
            state,
            target,
            trajectory_id,
            t,
        });
    }
    Ok((
        Generated {
            records,
            initial: x0.to_flat(),
        },
        traj.states,
    ))
}

fn assemble(
    cfg: &DatasetConfig,
    sys: AnalyticSystem,
    mut make: impl FnMut(usize) -> Result<Generated>,
    notes: Vec<String>,
) -> Result<DatasetSplit> {
    cfg.validate()?;
    let n_train = cfg.n_train_trajectories;
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut initial_states = Vec::new();
    for id in 0..n_train + cfg.n_test_trajectories {
        let g = make(id)?;
        initial_states.push(g.initial);
        if id < n_train {
            train.extend(g.records);
        } else {
            test.extend(g.records);
        }
    }
    Ok(DatasetSplit {
        train,
        test,
        meta: DatasetMeta {
            config: cfg.clone(),
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            dim: 2 * sys.dof(),
            system: sys,
            initial_states,
            notes,
        },
    })
}

fn expect_task(cfg: &DatasetConfig, allowed: &[Task]) -> Result<()> {
    if !allowed.contains(&cfg.task) {
        return Err(Error::InvalidConfig(format!(
            "generator for {:?} called with task {}",
            allowed,
            cfg.task.name()
        )));
    }
    Ok(())
}

/// Mass-spring trajectories with initial energy `E ~ U[energy_range]` placed
/// uniformly on the level set.
pub fn sample_spring_dataset(cfg: &DatasetConfig) -> Result<DatasetSplit> {
    expect_task(cfg, &[Task::MassSpring])?;
    let sys = cfg.system();
    let AnalyticSystem::MassSpring { k, m } = sys else {
        unreachable!()
    };
    assemble(
        cfg,
        sys.clone(),
        |id| {
            let (mut init, mut noise) = streams(cfg.seed, id);
            let e = uniform(&mut init, cfg.energy_range);
            let phi = TAU * init.random::<f64>();
            let x0 = PhasePoint::new(
                vec![(2.0 * e / k).sqrt() * phi.cos()],
                vec![(2.0 * e * m).sqrt() * phi.sin()],
            )?;
            Ok(simulate(&sys, &x0, cfg, id, &mut noise)?.0)
        },
        vec![],
    )
}

/// Point on the ray at angle `phi` where the pendulum energy equals `e`.
pub(super) fn pendulum_level_point(sys: &AnalyticSystem, e: f64, phi: f64) -> Result<PhasePoint> {
    let (s, c) = phi.sin_cos();
    let h = |r: f64| sys.value(&[r * c, r * s]);
    // Stay within |q| <= pi where the energy grows along the ray.
    let cap = if c.abs() > 1e-12 {
        PI / c.abs()
    } else {
        f64::INFINITY
    };
    let mut hi: f64 = 1.0_f64.min(cap);
    while h(hi)? < e {
        if hi >= cap {
            return Err(Error::InvalidConfig(format!(
                "energy {e} is not reachable without rotation at angle {phi}"
            )));
        }
        hi = (2.0 * hi).min(cap);
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid)? < e {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let r = 0.5 * (lo + hi);
    PhasePoint::new(vec![r * c], vec![r * s])
}

/// Ideal pendulum trajectories with initial energy `E ~ U[energy_range]` at a
/// uniformly random angle in phase space.
pub fn sample_pendulum_dataset(cfg: &DatasetConfig) -> Result<DatasetSplit> {
    expect_task(cfg, &[Task::Pendulum])?;
    let sys = cfg.system();
    assemble(
        cfg,
        sys.clone(),
        |id| {
            let (mut init, mut noise) = streams(cfg.seed, id);
            let e = uniform(&mut init, cfg.energy_range);
            let phi = TAU * init.random::<f64>();
            let x0 = pendulum_level_point(&sys, e, phi)?;
            Ok(simulate(&sys, &x0, cfg, id, &mut noise)?.0)
        },
        vec![],
    )
}

/// Bodies on a regular polygon of circumradius `radius`, rotated by `angle`,
/// moving counter-clockwise at the speed that keeps the polygon rigid.
/// Requires equal masses.
pub fn circular_orbit(sys: &AnalyticSystem, radius: f64, angle: f64) -> Result<PhasePoint> {
    let AnalyticSystem::NBody { masses, g } = sys else {
        return Err(Error::InvalidConfig(
            "circular orbits need an n-body system".into(),
        ));
    };
    let n = masses.len();
    if n < 2 || masses.iter().any(|&m| m != masses[0]) {
        return Err(Error::InvalidConfig(
            "circular orbits need at least two bodies of equal mass".into(),
        ));
    }
    let m = masses[0];
    let sum: f64 = (1..n).map(|k| 1.0 / (PI * k as f64 / n as f64).sin()).sum();
    let speed = (g * m * sum / (4.0 * radius)).sqrt();
    let mut q = Vec::with_capacity(2 * n);
    let mut p = Vec::with_capacity(2 * n);
    for i in 0..n {
        let a = angle + TAU * i as f64 / n as f64;
        let (s, c) = a.sin_cos();
        q.extend([radius * c, radius * s]);
        p.extend([-m * speed * s, m * speed * c]);
    }
    PhasePoint::new(q, p)
}

/// Near-circular orbits. Two bodies start at `+-r/2` on a random axis with
/// `r ~ U[radius_range]`; three or more start on a regular polygon with
/// circumradius drawn from `radius_range`. Each velocity component is scaled
/// by `1 + eta`, `eta ~ N(0, velocity_noise_std)`, and the centre-of-mass
/// momentum is removed. Trajectories with a close encounter are redrawn.
pub fn sample_nbody_dataset(cfg: &DatasetConfig) -> Result<DatasetSplit> {
    expect_task(cfg, &[Task::TwoBody, Task::ThreeBody])?;
    let sys = cfg.system();
    let AnalyticSystem::NBody { masses, .. } = &sys else {
        unreachable!()
    };
    let n = masses.len();
    let total_mass: f64 = masses.iter().sum();
    assemble(
        cfg,
        sys.clone(),
        |id| {
            let (mut init, mut noise) = streams(cfg.seed, id);
            for _ in 0..MAX_ORBIT_RETRIES {
                let r = uniform(&mut init, cfg.radius_range);
                let radius = if n == 2 { r / 2.0 } else { r };
                let angle = TAU * init.random::<f64>();
                let mut x = circular_orbit(&sys, radius, angle)?;
                for v in x.p.iter_mut() {
                    *v *= 1.0 + cfg.velocity_noise_std * normal(&mut init);
                }
                let total = sys.total_momentum(&x.to_flat());
                for (i, body) in x.p.chunks_exact_mut(2).enumerate() {
                    body[0] -= masses[i] / total_mass * total[0];
                    body[1] -= masses[i] / total_mass * total[1];
                }
                let floor = 0.1 * sys.min_separation(&x.to_flat());
                match simulate(&sys, &x, cfg, id, &mut noise) {
                    Ok((g, states))
                        if states
                            .iter()
                            .all(|s| sys.min_separation(&s.to_flat()) >= floor) =>
                    {
                        return Ok(g);
                    }
                    Ok(_)
                    | Err(Error::Singularity { .. })
                    | Err(Error::StepUnderflow { .. })
                    | Err(Error::Numeric(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::Numeric(format!(
                "trajectory {id}: close encounter in {MAX_ORBIT_RETRIES} draws"
            )))
        },
        vec!["orbits are redrawn after a close encounter".into()],
    )
}
