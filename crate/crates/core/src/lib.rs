//! Hamiltonian neural networks.
//!
//! A network outputs a scalar `H_theta(q, p)`; its symplectic gradient
//! `(dH/dp, -dH/dq)` is trained to match observed time derivatives. The crate
//! bundles everything needed to run the experiments end to end:
//!
//! - [`diffcore`]: fully-connected networks, exact input gradients, parameter
//!   gradients of losses that contain input gradients, and Adam.
//! - [`dynamics`]: analytic Hamiltonians, symplectic and Riemann fields,
//!   fixed-step RK4 and adaptive Dormand-Prince integration.
//! - [`data`]: dataset generators for the mass-spring, pendulum and N-body
//!   systems, the real-pendulum loader and finite-difference targets.
//! - [`hnn`]: the baseline and Hamiltonian models, their loss and training.
//! - [`pixels`]: the pixel pendulum pipeline (renderer, autoencoder, latent
//!   dynamics).
//! - [`eval`]: energy and coordinate metrics, conserved quantities and the
//!   energy bump.
//! - [`experiment`]: config-driven runs used by the `hnn` binary.
//!
//! State vectors are always laid out as `[q_1..q_N, p_1..p_N]`.

pub mod data;
pub mod diffcore;
pub mod dynamics;
pub mod eval;
pub mod experiment;
pub mod hnn;
pub mod pixels;

mod error;
mod hash;

pub use error::{Error, Result};
