//! Trains the baseline and the HNN on noisy mass-spring data and compares
//! their energy error.
//!
//! `cargo run --release --example mass_spring [steps]`

use hamiltonian_nn::data::{generate, DatasetConfig};
use hamiltonian_nn::eval::build_report;
use hamiltonian_nn::hnn::{train, ModelKind, TrainConfig};

fn main() -> hamiltonian_nn::Result<()> {
    let steps = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(2000);
    let data = generate(&DatasetConfig::mass_spring())?;
    println!(
        "{} train / {} test records",
        data.train.len(),
        data.test.len()
    );
    for kind in [ModelKind::Baseline, ModelKind::Hnn] {
        let cfg = TrainConfig {
            steps,
            ..TrainConfig::default()
        };
        let (model, _) = train(kind, &data, &cfg)?;
        let r = build_report(&model, &data, cfg.seed)?;
        println!(
            "{:>8}: train {:.4} test {:.4} energy mse {:.3e}",
            kind.name(),
            r.train_loss,
            r.test_loss,
            r.energy_mse
        );
    }
    Ok(())
}
