//! Real-pendulum task. Pass a recording with columns `t,q,p` to use it;
//! without one the damped stand-in is generated.
//!
//! `cargo run --release --example real_pendulum [file]`

use std::path::PathBuf;

use hamiltonian_nn::data::{generate, DatasetConfig};
use hamiltonian_nn::eval::build_report;
use hamiltonian_nn::hnn::{train, ModelKind, TrainConfig};

fn main() -> hamiltonian_nn::Result<()> {
    let mut cfg = DatasetConfig::real_pendulum();
    cfg.source = std::env::args().nth(1).map(PathBuf::from);
    let data = generate(&cfg)?;
    for note in &data.meta.notes {
        println!("# {note}");
    }
    println!(
        "{} train / {} test samples (chronological)",
        data.train.len(),
        data.test.len()
    );
    for kind in [ModelKind::Baseline, ModelKind::Hnn] {
        let (model, _) = train(kind, &data, &TrainConfig::default())?;
        let r = build_report(&model, &data, 0)?;
        println!(
            "{:>8}: test {:.4} energy mse {:.3e}",
            kind.name(),
            r.test_loss,
            r.energy_mse
        );
    }
    Ok(())
}
