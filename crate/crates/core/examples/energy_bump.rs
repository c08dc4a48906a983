//! Energy bump: follow the symplectic field of a learned Hamiltonian, push
//! along its ordinary gradient for half a second, then follow the symplectic
//! field again. `H_theta` shows two plateaus.
//!
//! `cargo run --release --example energy_bump [steps]`

use hamiltonian_nn::data::{generate, DatasetConfig, Part};
use hamiltonian_nn::eval::{default_bump_schedule, energy_bump};
use hamiltonian_nn::hnn::{train, ModelKind, TrainConfig};

fn main() -> hamiltonian_nn::Result<()> {
    let steps = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(2000);
    let data = generate(&DatasetConfig::pendulum())?;
    let (model, _) = train(
        ModelKind::Hnn,
        &data,
        &TrainConfig {
            steps,
            ..TrainConfig::default()
        },
    )?;
    let x0 = data.initial_state(data.trajectories(Part::Test)[0][0].trajectory_id)?;
    let traj = energy_bump(&model.params, &x0, &default_bump_schedule())?;
    let h = traj
        .energy
        .as_ref()
        .expect("bump trajectories carry H_theta");
    for i in (0..traj.len()).step_by(75) {
        println!("t {:5.2}  H_theta {:.4}", traj.times[i], h[i]);
    }
    Ok(())
}
