//! Hamiltonians, vector fields and ODE integration.
//!
//! Integrators operate on flat state slices laid out as `[q.., p..]`;
//! [`PhasePoint`] is the checked form used at API boundaries.

mod fields;
mod integrate;
mod systems;
mod trajectory;

pub use fields::{
    riemann_field, symplectic_field, FnField, Hamiltonian, Negated, Riemann, Symplectic,
    VectorField,
};
pub use integrate::{
    integrate_adaptive, integrate_adaptive_with, integrate_rk4, rk4_step, AdaptiveOptions,
};
pub use systems::{closed_form_spring, hamiltonian, AnalyticSystem, MIN_SEPARATION};
pub use trajectory::{fmt_f64, PhasePoint, Trajectory};
