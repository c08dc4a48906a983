//! Exact first- and second-order derivatives of [`MlpParams`] networks.
//!
//! The network family is fixed (dense layers, one activation, affine output),
//! so the reverse sweeps are written out layer by layer instead of going
//! through a general tape. The second-order sweep differentiates the input
//! gradient itself with respect to the parameters, which is what a loss on a
//! symplectic gradient needs.

use ndarray::{Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, MlpParams};
use crate::{Error, Result};

/// Activations recorded by a batched forward pass.
#[derive(Clone, Debug)]
pub struct Tape {
    /// `acts[0]` is the input batch, `acts[l]` the output of hidden layer `l`.
    acts: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    pub fn input(&self) -> &Array2<f64> {
        &self.acts[0]
    }
}

/// Intermediate quantities of the input-gradient sweep.
#[derive(Clone, Debug)]
pub struct GradTape {
    /// `grads[l]` is dH/d(acts[l]); `grads[0]` is the input gradient.
    grads: Vec<Array2<f64>>,
    /// `deltas[l] = grads[l + 1] * f'(z_l)`, so that `grads[l] = deltas[l] W_l`.
    deltas: Vec<Array2<f64>>,
}

impl GradTape {
    pub fn input_gradient(&self) -> &Array2<f64> {
        &self.grads[0]
    }
}

pub fn forward_tape(params: &MlpParams, x: ArrayView2<f64>) -> Result<Tape> {
    params.check_batch(x)?;
    let depth = params.depth();
    let act = params.activation();
    let mut acts = Vec::with_capacity(depth);
    acts.push(x.to_owned());
    for l in 0..depth - 1 {
        let mut z = acts[l].dot(&params.weights[l].t());
        z += &params.biases[l];
        z.mapv_inplace(|v| act.apply(v));
        acts.push(z);
    }
    let mut output = acts[depth - 1].dot(&params.weights[depth - 1].t());
    output += &params.biases[depth - 1];
    Ok(Tape { acts, output })
}

/// Ordinary reverse sweep: parameter gradients and the input adjoint for a
/// given adjoint of the output batch.
pub fn backward(
    params: &MlpParams,
    tape: &Tape,
    output_adjoint: ArrayView2<f64>,
) -> Result<(Gradients, Array2<f64>)> {
    if output_adjoint.dim() != tape.output.dim() {
        return Err(Error::Shape(format!(
            "output adjoint {:?} does not match output {:?}",
            output_adjoint.dim(),
            tape.output.dim()
        )));
    }
    let depth = params.depth();
    let act = params.activation();
    let mut grads = params.zeros_like();
    let mut z_bar = output_adjoint.to_owned();
    for l in (0..depth).rev() {
        grads.weights[l] += &z_bar.t().dot(&tape.acts[l]);
        grads.add_rows_to_bias(l, &z_bar);
        let a_bar = z_bar.dot(&params.weights[l]);
        if l == 0 {
            return Ok((grads, a_bar));
        }
        z_bar = a_bar;
        Zip::from(&mut z_bar)
            .and(&tape.acts[l])
            .for_each(|g, &a| *g *= act.slope(a));
    }
    unreachable!("depth is at least one")
}

fn require_scalar(params: &MlpParams) -> Result<()> {
    if params.output_dim() != 1 {
        return Err(Error::Contract(format!(
            "input gradient needs a scalar-output network, got output dim {}",
            params.output_dim()
        )));
    }
    Ok(())
}

/// Gradient of the scalar output with respect to the inputs, batched.
pub fn input_gradient_tape(params: &MlpParams, tape: &Tape) -> Result<GradTape> {
    require_scalar(params)?;
    let depth = params.depth();
    let act = params.activation();
    let batch = tape.acts[0].nrows();
    let top = params.weights[depth - 1].row(0);
    let mut grads = vec![Array2::zeros((0, 0)); depth];
    let mut deltas = vec![Array2::zeros((0, 0)); depth - 1];
    grads[depth - 1] = top.broadcast((batch, top.len())).unwrap().to_owned();
    for l in (0..depth - 1).rev() {
        let mut delta = grads[l + 1].clone();
        Zip::from(&mut delta)
            .and(&tape.acts[l + 1])
            .for_each(|d, &a| *d *= act.slope(a));
        grads[l] = delta.dot(&params.weights[l]);
        deltas[l] = delta;
    }
    Ok(GradTape { grads, deltas })
}

/// Parameter gradient of a scalar loss that depends on the network only
/// through its input gradient. `grad_adjoint` is dLoss/d(input gradient).
///
/// Returns the parameter gradients and dLoss/d(input), the latter being a
/// Hessian-vector product of the network.
pub fn input_gradient_backward(
    params: &MlpParams,
    tape: &Tape,
    gtape: &GradTape,
    grad_adjoint: ArrayView2<f64>,
) -> Result<(Gradients, Array2<f64>)> {
    require_scalar(params)?;
    if grad_adjoint.dim() != gtape.grads[0].dim() {
        return Err(Error::Shape(format!(
            "gradient adjoint {:?} does not match input gradient {:?}",
            grad_adjoint.dim(),
            gtape.grads[0].dim()
        )));
    }
    let depth = params.depth();
    let act = params.activation();
    let mut out = params.zeros_like();

    // Reverse of the input-gradient sweep, walked from the input upwards.
    let mut g_bar = grad_adjoint.to_owned();
    let mut z_bar_curv: Vec<Array2<f64>> = Vec::with_capacity(depth - 1);
    for l in 0..depth - 1 {
        out.weights[l] += &gtape.deltas[l].t().dot(&g_bar);
        let d_bar = g_bar.dot(&params.weights[l].t());
        let mut next = d_bar.clone();
        Zip::from(&mut next)
            .and(&tape.acts[l + 1])
            .for_each(|g, &a| *g *= act.slope(a));
        let mut curv = d_bar;
        Zip::from(&mut curv)
            .and(&gtape.grads[l + 1])
            .and(&tape.acts[l + 1])
            .for_each(|c, &g, &a| *c *= g * act.curvature(a));
        z_bar_curv.push(curv);
        g_bar = next;
    }
    {
        let top = g_bar.sum_axis(Axis(0));
        let mut row = out.weights[depth - 1].row_mut(0);
        row += &top;
    }

    // Reverse of the forward pass. The output value itself carries no adjoint.
    let batch = tape.acts[0].nrows();
    let mut a_bar: Option<Array2<f64>> = None;
    for l in (0..depth - 1).rev() {
        let mut z_bar = std::mem::take(&mut z_bar_curv[l]);
        if let Some(a_bar) = a_bar.take() {
            Zip::from(&mut z_bar)
                .and(&a_bar)
                .and(&tape.acts[l + 1])
                .for_each(|z, &ab, &a| *z += ab * act.slope(a));
        }
        out.weights[l] += &z_bar.t().dot(&tape.acts[l]);
        out.add_rows_to_bias(l, &z_bar);
        a_bar = Some(z_bar.dot(&params.weights[l]));
    }
    let input_adjoint = a_bar.unwrap_or_else(|| Array2::zeros((batch, params.input_dim())));
    Ok((out, input_adjoint))
}

/// Gradient of the scalar output with respect to a single input.
pub fn input_gradient(params: &MlpParams, x: &[f64]) -> Result<Vec<f64>> {
    require_scalar(params)?;
    if x.len() != params.input_dim() {
        return Err(Error::Shape(format!(
            "input has length {}, network expects {}",
            x.len(),
            params.input_dim()
        )));
    }
    let depth = params.depth();
    let act = params.activation();
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(depth);
    acts.push(x.to_vec());
    for l in 0..depth - 1 {
        let mut z = super::mlp::affine(&params.weights[l], &params.biases[l], &acts[l]);
        z.iter_mut().for_each(|v| *v = act.apply(*v));
        acts.push(z);
    }
    let mut g: Vec<f64> = params.weights[depth - 1].row(0).to_vec();
    for l in (0..depth - 1).rev() {
        for (gi, &a) in g.iter_mut().zip(&acts[l + 1]) {
            *gi *= act.slope(a);
        }
        let w = &params.weights[l];
        let mut next = vec![0.0; w.ncols()];
        for (row, &d) in w.rows().into_iter().zip(&g) {
            if d != 0.0 {
                for (n, &wv) in next.iter_mut().zip(row.iter()) {
                    *n += d * wv;
                }
            }
        }
        g = next;
    }
    Ok(g)
}

pub fn input_gradient_batch(params: &MlpParams, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    let tape = forward_tape(params, x)?;
    Ok(input_gradient_tape(params, &tape)?.grads.swap_remove(0))
}

/// Maps a gradient `(dH/dq, dH/dp)` to the symplectic field `(dH/dp, -dH/dq)`.
///
/// The adjoint of this map is its negation.
pub fn symplectic_permute(grad: &[f64], out: &mut [f64]) {
    let n = grad.len() / 2;
    let (gq, gp) = grad.split_at(n);
    let (oq, op) = out.split_at_mut(n);
    oq.copy_from_slice(gp);
    for (o, g) in op.iter_mut().zip(gq) {
        *o = -g;
    }
}

pub fn symplectic_permute_rows(grad: ArrayView2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(grad.raw_dim());
    for (g, mut o) in grad.rows().into_iter().zip(out.rows_mut()) {
        symplectic_permute(
            g.as_standard_layout().as_slice().unwrap(),
            o.as_slice_mut().unwrap(),
        );
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Network output is the time derivative.
    BaselineMse,
    /// Network output is a scalar Hamiltonian; its symplectic gradient is the
    /// time derivative.
    HnnSymplectic,
}

/// States and their target time derivatives, one sample per row.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetBatch {
    pub states: Array2<f64>,
    pub targets: Array2<f64>,
}

impl DatasetBatch {
    pub fn new(states: Array2<f64>, targets: Array2<f64>) -> Result<Self> {
        if states.dim() != targets.dim() {
            return Err(Error::Shape(format!(
                "states {:?} and targets {:?} differ",
                states.dim(),
                targets.dim()
            )));
        }
        Ok(Self { states, targets })
    }

    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.nrows() == 0
    }
}

/// Loss value with gradients for every differentiable input of the loss.
#[derive(Clone, Debug)]
pub struct LossGrad {
    pub loss: f64,
    pub params: Gradients,
    /// dLoss/d(states).
    pub states: Array2<f64>,
    /// dLoss/d(targets).
    pub targets: Array2<f64>,
}

fn check_loss_inputs(
    params: &MlpParams,
    states: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    kind: LossKind,
) -> Result<()> {
    if states.nrows() == 0 {
        return Err(Error::Contract("empty batch".into()));
    }
    if states.dim() != targets.dim() {
        return Err(Error::Shape(format!(
            "states {:?} and targets {:?} differ",
            states.dim(),
            targets.dim()
        )));
    }
    params.check_batch(states)?;
    match kind {
        LossKind::BaselineMse if params.output_dim() != params.input_dim() => {
            Err(Error::Shape(format!(
                "baseline network maps {} -> {}, expected equal dims",
                params.input_dim(),
                params.output_dim()
            )))
        }
        LossKind::HnnSymplectic if params.output_dim() != 1 => Err(Error::Contract(format!(
            "hamiltonian network must have scalar output, got {}",
            params.output_dim()
        ))),
        LossKind::HnnSymplectic if params.input_dim() % 2 != 0 => Err(Error::Shape(format!(
            "hamiltonian network input dim {} is odd",
            params.input_dim()
        ))),
        _ => Ok(()),
    }
}

/// Model time derivatives for a batch of states.
pub fn predict(params: &MlpParams, states: ArrayView2<f64>, kind: LossKind) -> Result<Array2<f64>> {
    match kind {
        LossKind::BaselineMse => params.forward_batch(states),
        LossKind::HnnSymplectic => {
            let grads = input_gradient_batch(params, states)?;
            Ok(symplectic_permute_rows(grads.view()))
        }
    }
}

/// Mean over batch and coordinates of the squared error between predicted
/// and target time derivatives.
pub fn loss_value(
    params: &MlpParams,
    states: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    kind: LossKind,
) -> Result<f64> {
    check_loss_inputs(params, states, targets, kind)?;
    let pred = predict(params, states, kind)?;
    Ok(mean_squared(&pred, targets))
}

pub(crate) fn mean_squared(pred: &Array2<f64>, targets: ArrayView2<f64>) -> f64 {
    let n = pred.len() as f64;
    Zip::from(pred)
        .and(targets)
        .fold(0.0, |acc, &p, &t| acc + (p - t) * (p - t))
        / n
}

pub fn loss_and_gradient(
    params: &MlpParams,
    states: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    kind: LossKind,
) -> Result<LossGrad> {
    check_loss_inputs(params, states, targets, kind)?;
    let tape = forward_tape(params, states)?;
    let scale = 2.0 / states.len() as f64;
    match kind {
        LossKind::BaselineMse => {
            let resid = &tape.output - &targets;
            let loss = mean_squared(&tape.output, targets);
            let out_bar = resid * scale;
            let (grads, state_bar) = backward(params, &tape, out_bar.view())?;
            Ok(LossGrad {
                loss,
                params: grads,
                states: state_bar,
                targets: -out_bar,
            })
        }
        LossKind::HnnSymplectic => {
            let gtape = input_gradient_tape(params, &tape)?;
            let pred = symplectic_permute_rows(gtape.input_gradient().view());
            let loss = mean_squared(&pred, targets);
            let pred_bar = (&pred - &targets) * scale;
            let grad_bar = -symplectic_permute_rows(pred_bar.view());
            let (grads, state_bar) =
                input_gradient_backward(params, &tape, &gtape, grad_bar.view())?;
            Ok(LossGrad {
                loss,
                params: grads,
                states: state_bar,
                targets: -pred_bar,
            })
        }
    }
}

/// dLoss/dParams for the batch-mean loss.
pub fn loss_param_gradient(
    params: &MlpParams,
    batch: &DatasetBatch,
    kind: LossKind,
) -> Result<Gradients> {
    Ok(loss_and_gradient(params, batch.states.view(), batch.targets.view(), kind)?.params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::Activation;
    use ndarray::array;

    #[test]
    fn linear_net_gradient_is_its_weights() {
        let p = MlpParams::from_parts(
            Activation::Tanh,
            vec![array![[3.0, -1.0]]],
            vec![array![7.0]],
        )
        .unwrap();
        assert_eq!(input_gradient(&p, &[0.3, 9.0]).unwrap(), vec![3.0, -1.0]);
        let b = input_gradient_batch(&p, array![[1.0, 2.0], [-5.0, 0.0]].view()).unwrap();
        assert_eq!(b, array![[3.0, -1.0], [3.0, -1.0]]);
    }

    #[test]
    fn zero_top_layer_gives_zero_gradient() {
        let mut p = MlpParams::init(&[2, 6, 6, 1], Activation::Tanh, 1).unwrap();
        p.weights[2].fill(0.0);
        assert!(input_gradient(&p, &[0.4, -0.7])
            .unwrap()
            .iter()
            .all(|&g| g == 0.0));
    }

    #[test]
    fn input_gradient_needs_scalar_output() {
        let p = MlpParams::init(&[2, 4, 2], Activation::Tanh, 1).unwrap();
        assert!(matches!(
            input_gradient(&p, &[0.0, 0.0]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn batch_and_single_input_gradients_agree() {
        let p = MlpParams::init(&[4, 9, 7, 1], Activation::Tanh, 5).unwrap();
        let x = array![[0.1, 0.2, -0.3, 0.4], [1.0, -1.0, 0.5, 0.0]];
        let b = input_gradient_batch(&p, x.view()).unwrap();
        for (row, g) in x.rows().into_iter().zip(b.rows()) {
            let s = input_gradient(&p, row.as_slice().unwrap()).unwrap();
            for (a, c) in s.iter().zip(g.iter()) {
                assert!((a - c).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn symplectic_permute_layout() {
        let mut out = [0.0; 4];
        symplectic_permute(&[1.0, 2.0, 3.0, 4.0], &mut out);
        assert_eq!(out, [3.0, 4.0, -1.0, -2.0]);
    }

    #[test]
    fn exact_fit_has_zero_gradient() {
        let p = MlpParams::init(&[2, 5, 1], Activation::Tanh, 2).unwrap();
        let x = array![[0.3, -0.2]];
        let target = predict(&p, x.view(), LossKind::HnnSymplectic).unwrap();
        let g = loss_param_gradient(
            &p,
            &DatasetBatch::new(x, target).unwrap(),
            LossKind::HnnSymplectic,
        )
        .unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn duplicated_batch_gives_same_gradient() {
        let p = MlpParams::init(&[2, 8, 1], Activation::Tanh, 3).unwrap();
        let x = array![[0.3, -0.2], [1.0, 0.5]];
        let t = array![[0.1, 0.2], [-0.4, 0.9]];
        let x2 = ndarray::concatenate![Axis(0), x, x];
        let t2 = ndarray::concatenate![Axis(0), t, t];
        for kind in [LossKind::HnnSymplectic] {
            let a =
                loss_param_gradient(&p, &DatasetBatch::new(x.clone(), t.clone()).unwrap(), kind)
                    .unwrap();
            let b = loss_param_gradient(
                &p,
                &DatasetBatch::new(x2.clone(), t2.clone()).unwrap(),
                kind,
            )
            .unwrap();
            for (u, v) in a.to_flat().iter().zip(b.to_flat()) {
                assert!((u - v).abs() <= 1e-14 * (1.0 + u.abs()));
            }
        }
    }

    #[test]
    fn loss_shape_errors() {
        let base = MlpParams::init(&[2, 4, 3], Activation::Tanh, 0).unwrap();
        let x = array![[0.0, 1.0]];
        assert!(matches!(
            loss_value(&base, x.view(), x.view(), LossKind::BaselineMse),
            Err(Error::Shape(_))
        ));
        let h = MlpParams::init(&[2, 4, 1], Activation::Tanh, 0).unwrap();
        let wrong = array![[0.0, 1.0, 2.0]];
        assert!(loss_value(&h, x.view(), wrong.view(), LossKind::HnnSymplectic).is_err());
        let empty = Array2::<f64>::zeros((0, 2));
        assert!(loss_value(&h, empty.view(), empty.view(), LossKind::HnnSymplectic).is_err());
    }
}
