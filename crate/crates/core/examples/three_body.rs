//! Three bodies on a perturbed circular orbit.
//!
//! `cargo run --release --example three_body [steps]`

use hamiltonian_nn::data::{generate, DatasetConfig, Task};
use hamiltonian_nn::eval::build_report;
use hamiltonian_nn::hnn::{train, ModelKind, TrainConfig};

fn main() -> hamiltonian_nn::Result<()> {
    let steps = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(10_000);
    let data = generate(&DatasetConfig::three_body())?;
    for kind in [ModelKind::Baseline, ModelKind::Hnn] {
        let cfg = TrainConfig {
            steps,
            ..TrainConfig::for_task(Task::ThreeBody)
        };
        let (model, _) = train(kind, &data, &cfg)?;
        let r = build_report(&model, &data, cfg.seed)?;
        println!(
            "{:>8}: test {:.3e} energy mse {:.3e}",
            kind.name(),
            r.test_loss,
            r.energy_mse
        );
    }
    Ok(())
}
