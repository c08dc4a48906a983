//! Pendulum from pixels: a renderer, a residual autoencoder with a two-unit
//! latent `(z_q, z_p)`, and latent dynamics learned jointly with it.

mod dataset;
mod metrics;
mod model;
mod net;
mod render;
mod rollout;
mod train;

pub use dataset::{
    frame_pair, generate_pixel_dataset, PixelConfig, PixelDataset, TrajectoryAngles, TupleIndex,
};
pub use metrics::{
    amplitude_change, amplitude_window, build_pixel_report, latent_quantity_range, rollout_angles,
    swing_amplitude, AmplitudeChange, TemplateBank, BANK_SIZE, MIN_AMPLITUDE, ROLLOUT_STEPS,
};
pub use model::{LatentPair, LossWeights, PixelGradients, PixelLoss, PixelModel};
pub use net::{OutputMap, ResMlp, ResTape};
pub use render::{
    render_pendulum_frame, render_with, to_pgm, FRAME_LEN, ROD_LENGTH, ROD_WIDTH, SIDE,
};
pub use rollout::{latent_rollout, reverse_latent_rollout, LatentRollout, LATENT_DT};
pub use train::{
    evaluate_pixel_loss, train_pixel, PixelCheckpoint, PixelEvalRecord, PixelHistory,
    PixelTrainConfig,
};
