#![allow(dead_code)]

use hamiltonian_nn::diffcore::MlpParams;
use hamiltonian_nn::dynamics::{Hamiltonian, PhasePoint};

/// Central-difference gradient of a scalar function of a flat vector.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut x = x.to_vec();
    (0..x.len())
        .map(|i| {
            let x0 = x[i];
            x[i] = x0 + h;
            let up = f(&x);
            x[i] = x0 - h;
            let down = f(&x);
            x[i] = x0;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central-difference gradient of `loss` with respect to every parameter,
/// in `for_each_param_mut` order.
pub fn fd_param_gradient(params: &MlpParams, loss: impl Fn(&MlpParams) -> f64, h: f64) -> Vec<f64> {
    let n = params.num_params();
    let perturbed = |i: usize, delta: f64| {
        let mut p = params.clone();
        let mut k = 0;
        p.for_each_param_mut(|v| {
            if k == i {
                *v += delta;
            }
            k += 1;
        });
        loss(&p)
    };
    (0..n)
        .map(|i| (perturbed(i, h) - perturbed(i, -h)) / (2.0 * h))
        .collect()
}

/// `|a - b| / max(|a|, |b|)` in the Euclidean norm; zero when both vanish.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Largest `|H(x_t) - H(x_0)| / |H(x_0)|` along a path.
pub fn max_relative_drift(h: &impl Hamiltonian, states: &[PhasePoint]) -> f64 {
    let h0 = h.value(&states[0].to_flat()).unwrap();
    states
        .iter()
        .map(|s| (h.value(&s.to_flat()).unwrap() - h0).abs() / h0.abs())
        .fold(0.0, f64::max)
}

/// Largest per-component difference between two states.
pub fn max_component_gap(a: &PhasePoint, b: &PhasePoint) -> f64 {
    a.to_flat()
        .iter()
        .zip(b.to_flat())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
