//! Two-body orbits: trains both models, then rolls them out from a test orbit
//! and prints the total energy along the way.
//!
//! `cargo run --release --example two_body [steps]`

use hamiltonian_nn::data::{generate, DatasetConfig, Part, Task};
use hamiltonian_nn::dynamics::{integrate_adaptive, Hamiltonian};
use hamiltonian_nn::hnn::{train, ModelKind, TrainConfig};

fn main() -> hamiltonian_nn::Result<()> {
    let steps = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(10_000);
    let data = generate(&DatasetConfig::two_body())?;
    let sys = &data.meta.system;
    let x0 = data.initial_state(data.trajectories(Part::Test)[0][0].trajectory_id)?;
    let t: Vec<f64> = (0..=50).map(f64::from).collect();
    let e0 = sys.value(&x0.to_flat())?;
    for kind in [ModelKind::Baseline, ModelKind::Hnn] {
        let cfg = TrainConfig {
            steps,
            ..TrainConfig::for_task(Task::TwoBody)
        };
        let (model, _) = train(kind, &data, &cfg)?;
        let traj = integrate_adaptive(&model, &x0, &t, 1e-9)?;
        let drift: Vec<String> = traj
            .states
            .iter()
            .step_by(10)
            .map(|s| {
                sys.value(&s.to_flat())
                    .map(|e| format!("{:+.3}", e / e0 - 1.0))
            })
            .collect::<Result<_, _>>()?;
        println!(
            "{:>8} relative energy change at t=0,10,..,50: {}",
            kind.name(),
            drift.join(" ")
        );
    }
    Ok(())
}
