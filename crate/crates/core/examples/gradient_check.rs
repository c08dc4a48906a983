//! Checks the parameter gradient of the HNN loss, which differentiates
//! through an input gradient, against central differences.

use hamiltonian_nn::diffcore::{loss_and_gradient, loss_value, Activation, LossKind, MlpParams};
use ndarray::Array2;

fn main() -> hamiltonian_nn::Result<()> {
    let params = MlpParams::init(&[2, 16, 16, 1], Activation::Tanh, 1)?;
    let states = Array2::from_shape_fn((8, 2), |(i, j)| ((i * 2 + j) as f64 * 0.37).sin());
    let targets = Array2::from_shape_fn((8, 2), |(i, j)| ((i + 3 * j) as f64 * 0.21).cos());
    let kind = LossKind::HnnSymplectic;
    let analytic = loss_and_gradient(&params, states.view(), targets.view(), kind)?
        .params
        .to_flat();

    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for (i, a) in analytic.iter().enumerate() {
        let shifted = |d: f64| {
            let mut p = params.clone();
            let mut k = 0;
            p.for_each_param_mut(|v| {
                if k == i {
                    *v += d;
                }
                k += 1;
            });
            loss_value(&p, states.view(), targets.view(), kind)
        };
        let fd = (shifted(eps)? - shifted(-eps)?) / (2.0 * eps);
        worst = worst.max((a - fd).abs() / fd.abs().max(1e-8));
    }
    println!(
        "{} parameters, worst relative error {worst:.2e}",
        analytic.len()
    );
    Ok(())
}
