//! Pendulum from pixels: trains the autoencoder with latent HNN dynamics and
//! writes a decoded rollout to `pixel_rollout/` as PGM frames.
//!
//! `cargo run --release --example pixel_pendulum [steps]`

use std::path::Path;

use hamiltonian_nn::hnn::ModelKind;
use hamiltonian_nn::pixels::{
    amplitude_change, frame_pair, generate_pixel_dataset, latent_rollout, train_pixel, PixelConfig,
    PixelTrainConfig,
};

fn main() -> hamiltonian_nn::Result<()> {
    let steps = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(10_000);
    let data = generate_pixel_dataset(&PixelConfig::default())?;
    let cfg = PixelTrainConfig {
        steps,
        eval_every: 1000,
        ..PixelTrainConfig::default()
    };
    let (model, history) = train_pixel(ModelKind::Hnn, &data, &cfg)?;
    for r in &history.records {
        println!(
            "step {:>5}: ae {:.2e} hnn {:.2e} cc {:.2e}",
            r.step, r.test.ae, r.test.hnn, r.test.cc
        );
    }
    let change = amplitude_change(&model, &data, 200)?;
    println!(
        "amplitude change over 200 steps: {:+.1}%",
        100.0 * change.mean_relative_change()
    );
    let first = data.test_ids().start;
    let rollout = latent_rollout(&model, &frame_pair(&data.frames[first], 0), 100)?;
    rollout.export(Path::new("pixel_rollout"), data.config.side, true)?;
    println!(
        "wrote pixel_rollout/latent.csv and {} frames",
        rollout.frames.len()
    );
    Ok(())
}
