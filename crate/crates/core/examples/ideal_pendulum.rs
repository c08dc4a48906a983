//! Ideal pendulum: learned Hamiltonian against the true one along a rollout.
//!
//! `cargo run --release --example ideal_pendulum [steps]`

use hamiltonian_nn::data::{generate, DatasetConfig, Part};
use hamiltonian_nn::dynamics::{integrate_adaptive, Hamiltonian};
use hamiltonian_nn::hnn::{train, ModelKind, TrainConfig};

fn main() -> hamiltonian_nn::Result<()> {
    let steps = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(2000);
    let data = generate(&DatasetConfig::pendulum())?;
    let (model, history) = train(
        ModelKind::Hnn,
        &data,
        &TrainConfig {
            steps,
            ..TrainConfig::default()
        },
    )?;
    let last = history.last().expect("history has the initial record");
    println!(
        "hnn train {:.4} test {:.4}",
        last.train_loss, last.test_loss
    );

    let sys = &data.meta.system;
    let h = model.hamiltonian().expect("hnn models have a Hamiltonian");
    let x0 = data.initial_state(data.trajectories(Part::Test)[0][0].trajectory_id)?;
    let t: Vec<f64> = (0..=40).map(|i| i as f64 * 0.5).collect();
    let traj = integrate_adaptive(&model, &x0, &t, 1e-9)?;
    println!("{:>5} {:>9} {:>9} {:>9}", "t", "q", "H_true", "H_theta");
    for (t, s) in traj.times.iter().zip(&traj.states).step_by(4) {
        let x = s.to_flat();
        println!(
            "{t:5.1} {:9.4} {:9.4} {:9.4}",
            x[0],
            sys.value(&x)?,
            h.value(&x)?
        );
    }
    Ok(())
}
