use super::{PhasePoint, Trajectory, VectorField};
use crate::{Error, Result};

fn check_finite(v: &[f64], t: f64, x: &[f64]) -> Result<()> {
    if v.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite field value at t={t}, x={x:?}"
        )));
    }
    Ok(())
}

/// One classical fourth-order Runge-Kutta step on a flat state.
fn rk4_flat<F: VectorField + ?Sized>(field: &F, x: &[f64], dt: f64, t: f64) -> Result<Vec<f64>> {
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    field.eval(x, &mut k1)?;
    check_finite(&k1, t, x)?;
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * dt * k1[i];
    }
    field.eval(&tmp, &mut k2)?;
    check_finite(&k2, t, x)?;
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * dt * k2[i];
    }
    field.eval(&tmp, &mut k3)?;
    check_finite(&k3, t, x)?;
    for i in 0..n {
        tmp[i] = x[i] + dt * k3[i];
    }
    field.eval(&tmp, &mut k4)?;
    check_finite(&k4, t, x)?;
    Ok((0..n)
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Classical RK4 step. Negative `dt` integrates backwards.
pub fn rk4_step<F: VectorField + ?Sized>(field: &F, x: &PhasePoint, dt: f64) -> Result<PhasePoint> {
    if !dt.is_finite() || dt == 0.0 {
        return Err(Error::InvalidConfig(format!(
            "rk4 step needs finite non-zero dt, got {dt}"
        )));
    }
    let flat = x.to_flat();
    if flat.len() != field.dim() {
        return Err(Error::Shape(format!(
            "state has length {}, field expects {}",
            flat.len(),
            field.dim()
        )));
    }
    PhasePoint::from_flat(&rk4_flat(field, &flat, dt, 0.0)?)
}

/// `n_steps` fixed RK4 steps of size `dt` from `t0`; returns all `n_steps + 1`
/// states.
pub fn integrate_rk4<F: VectorField + ?Sized>(
    field: &F,
    x0: &PhasePoint,
    t0: f64,
    dt: f64,
    n_steps: usize,
) -> Result<Trajectory> {
    if !dt.is_finite() || dt == 0.0 {
        return Err(Error::InvalidConfig(format!(
            "rk4 needs finite non-zero dt, got {dt}"
        )));
    }
    let mut x = x0.to_flat();
    if x.len() != field.dim() {
        return Err(Error::Shape(format!(
            "state has length {}, field expects {}",
            x.len(),
            field.dim()
        )));
    }
    let mut times = vec![t0];
    let mut states = vec![x0.clone()];
    for step in 0..n_steps {
        let t = t0 + step as f64 * dt;
        x = rk4_flat(field, &x, dt, t)?;
        times.push(t0 + (step + 1) as f64 * dt);
        states.push(PhasePoint::from_flat(&x)?);
    }
    Trajectory::new(times, states)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on accepted plus rejected steps.
    pub max_steps: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-9,
            max_steps: 5_000_000,
        }
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Difference between the fifth- and fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Adaptive Dormand-Prince 4(5) with `abs_tol = 1e-9`.
pub fn integrate_adaptive<F: VectorField + ?Sized>(
    field: &F,
    x0: &PhasePoint,
    t_eval: &[f64],
    rel_tol: f64,
) -> Result<Trajectory> {
    integrate_adaptive_with(
        field,
        x0,
        t_eval,
        AdaptiveOptions {
            rel_tol,
            ..AdaptiveOptions::default()
        },
    )
}

/// Adaptive Dormand-Prince 4(5). The solution starts at `t_eval[0]` and is
/// reported at exactly the requested times by landing steps on them;
/// decreasing `t_eval` integrates backwards.
pub fn integrate_adaptive_with<F: VectorField + ?Sized>(
    field: &F,
    x0: &PhasePoint,
    t_eval: &[f64],
    opts: AdaptiveOptions,
) -> Result<Trajectory> {
    if !(opts.rel_tol > 0.0) || !(opts.abs_tol >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "tolerances must be positive, got rel {} abs {}",
            opts.rel_tol, opts.abs_tol
        )));
    }
    if t_eval.is_empty() {
        return Err(Error::InvalidConfig("t_eval is empty".into()));
    }
    let direction = if t_eval.len() > 1 && t_eval[1] < t_eval[0] {
        -1.0
    } else {
        1.0
    };
    if t_eval.windows(2).any(|w| (w[1] - w[0]) * direction <= 0.0) {
        return Err(Error::InvalidConfig(
            "t_eval must be strictly monotone".into(),
        ));
    }
    let n = field.dim();
    let mut x = x0.to_flat();
    if x.len() != n {
        return Err(Error::Shape(format!(
            "state has length {}, field expects {n}",
            x.len()
        )));
    }

    let span = (t_eval[t_eval.len() - 1] - t_eval[0]).abs();
    let mut states = vec![x0.clone()];
    if t_eval.len() == 1 {
        return Trajectory::new(t_eval.to_vec(), states);
    }
    let min_step = 1e-12 * span;

    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut stage = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut t = t_eval[0];
    field.eval(&x, &mut k[0])?;
    check_finite(&k[0], t, &x)?;

    let mut h = initial_step(field, &x, &k[0], t, direction, opts, span)?;
    let mut steps = 0usize;
    let mut err_prev: f64 = 1e-4;
    for &target in &t_eval[1..] {
        while (target - t) * direction > 0.0 {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::Numeric(format!(
                    "exceeded {} integration steps at t={t}",
                    opts.max_steps
                )));
            }
            let remaining = (target - t).abs();
            let landing = h >= remaining;
            let step = if landing { remaining } else { h };
            let dt = step * direction;

            for s in 1..7 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..s {
                        acc += A[s][j] * k[j][i];
                    }
                    stage[i] = x[i] + dt * acc;
                }
                field.eval(&stage, &mut k[s])?;
                check_finite(&k[s], t + C[s] * dt, &stage)?;
            }
            // The seventh stage is evaluated at the fifth-order solution.
            x_new.copy_from_slice(&stage);
            let mut err_sq = 0.0;
            for i in 0..n {
                let mut e = 0.0;
                for s in 0..7 {
                    e += E[s] * k[s][i];
                }
                e *= dt;
                let scale = opts.abs_tol + opts.rel_tol * x[i].abs().max(x_new[i].abs());
                err_sq += (e / scale).powi(2);
            }
            let err = (err_sq / n as f64).sqrt();

            if err <= 1.0 {
                t = if landing { target } else { t + dt };
                std::mem::swap(&mut x, &mut x_new);
                let last = std::mem::take(&mut k[6]);
                k[6] = std::mem::replace(&mut k[0], last);
                // Proportional-integral step control.
                let factor = if err == 0.0 {
                    10.0
                } else {
                    (0.9 * err.powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0)).clamp(0.2, 10.0)
                };
                err_prev = err.max(1e-4);
                if !landing {
                    h = step * factor;
                } else {
                    h = h.max(step * factor.min(1.0));
                }
            } else {
                h = step * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            }
            if h < min_step {
                return Err(Error::StepUnderflow { t, h, span });
            }
        }
        states.push(PhasePoint::from_flat(&x)?);
    }
    Trajectory::new(t_eval.to_vec(), states)
}

fn initial_step<F: VectorField + ?Sized>(
    field: &F,
    x: &[f64],
    f0: &[f64],
    t: f64,
    direction: f64,
    opts: AdaptiveOptions,
    span: f64,
) -> Result<f64> {
    let n = x.len() as f64;
    let scale: Vec<f64> = x
        .iter()
        .map(|v| opts.abs_tol + opts.rel_tol * v.abs())
        .collect();
    let norm = |v: &[f64]| {
        (v.iter()
            .zip(&scale)
            .map(|(a, s)| (a / s).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
    };
    let d0 = norm(x);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let x1: Vec<f64> = x
        .iter()
        .zip(f0)
        .map(|(a, f)| a + direction * h0 * f)
        .collect();
    let mut f1 = vec![0.0; x.len()];
    field.eval(&x1, &mut f1)?;
    check_finite(&f1, t + direction * h0, &x1)?;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(span))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{
        closed_form_spring, AnalyticSystem, FnField, Hamiltonian, Negated, Symplectic,
    };

    fn pp(q: f64, p: f64) -> PhasePoint {
        PhasePoint::new(vec![q], vec![p]).unwrap()
    }

    #[test]
    fn rk4_zero_field_is_identity() {
        let zero = FnField::new(2, |_x: &[f64], out: &mut [f64]| {
            out.fill(0.0);
            Ok(())
        });
        let x = pp(0.3, -1.2);
        assert_eq!(rk4_step(&zero, &x, 0.1).unwrap(), x);
    }

    #[test]
    fn rk4_spring_tracks_closed_form() {
        let field = Symplectic(AnalyticSystem::mass_spring());
        let x0 = pp(1.0, 0.0);
        let traj = integrate_rk4(&field, &x0, 0.0, 0.01, 628).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let exact = closed_form_spring(&x0, *t, 1.0, 1.0);
            assert!((s.q[0] - exact.q[0]).abs() < 1e-4 && (s.p[0] - exact.p[0]).abs() < 1e-4);
        }
        // 628 steps of 0.01 stop short of a full period by 2pi - 6.28.
        let end = traj.last();
        assert!((end.p[0] - (2.0 * std::f64::consts::PI - 6.28).sin()).abs() < 1e-8);
    }

    #[test]
    fn rk4_spring_full_period() {
        let field = Symplectic(AnalyticSystem::mass_spring());
        let dt = 2.0 * std::f64::consts::PI / 628.0;
        let traj = integrate_rk4(&field, &pp(1.0, 0.0), 0.0, dt, 628).unwrap();
        let end = traj.last();
        assert!(
            (end.q[0] - 1.0).abs() < 1e-4 && end.p[0].abs() < 1e-4,
            "{end:?}"
        );
    }

    #[test]
    fn rk4_forward_then_back() {
        let field = Symplectic(AnalyticSystem::mass_spring());
        let x = pp(0.7, 0.2);
        let y = rk4_step(&field, &x, 0.01).unwrap();
        let z = rk4_step(&field, &y, -0.01).unwrap();
        assert!((z.q[0] - x.q[0]).abs() < 1e-8 && (z.p[0] - x.p[0]).abs() < 1e-8);
    }

    #[test]
    fn rk4_rejects_zero_dt() {
        let field = Symplectic(AnalyticSystem::mass_spring());
        assert!(rk4_step(&field, &pp(1.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn rk4_reports_non_finite() {
        let bad = FnField::new(2, |_x: &[f64], out: &mut [f64]| {
            out.fill(f64::NAN);
            Ok(())
        });
        assert!(matches!(
            rk4_step(&bad, &pp(1.0, 0.0), 0.1),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn rk4_sign_symmetry_is_exact() {
        let sys = AnalyticSystem::pendulum();
        let f = Symplectic(&sys);
        let x = pp(0.4, -0.3);
        let a = rk4_step(&f, &x, 0.05).unwrap();
        let b = rk4_step(&Negated(&f), &x, -0.05).unwrap();
        assert_eq!(a, b);
    }

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn adaptive_spring_matches_closed_form() {
        let field = Symplectic(AnalyticSystem::mass_spring());
        let t = linspace(0.0, 20.0, 201);
        let traj = integrate_adaptive(&field, &pp(1.0, 0.0), &t, 1e-9).unwrap();
        let mut worst: f64 = 0.0;
        for (ti, s) in t.iter().zip(&traj.states) {
            worst = worst
                .max((s.q[0] - ti.cos()).abs())
                .max((s.p[0] + ti.sin()).abs());
        }
        assert!(worst < 1e-6, "max deviation {worst}");

        let back: Vec<f64> = t.iter().rev().copied().collect();
        let rev = integrate_adaptive(&field, traj.last(), &back, 1e-9).unwrap();
        let end = rev.last();
        assert!(
            (end.q[0] - 1.0).abs() < 1e-6 && end.p[0].abs() < 1e-6,
            "{end:?}"
        );
        assert_eq!(rev.times, back);
    }

    #[test]
    fn adaptive_circular_orbit_conserves_energy() {
        // Two unit masses at separation 1: speed sqrt(1/2) each.
        let sys = AnalyticSystem::nbody(2);
        let v = 0.5f64.sqrt();
        let x0 = PhasePoint::new(vec![0.5, 0.0, -0.5, 0.0], vec![0.0, v, 0.0, -v]).unwrap();
        let period = std::f64::consts::PI * 2f64.sqrt();
        let t = linspace(0.0, period, 50);
        let traj = integrate_adaptive(&Symplectic(&sys), &x0, &t, 1e-9).unwrap();
        let e0 = sys.value(&x0.to_flat()).unwrap();
        for s in &traj.states {
            let e = sys.value(&s.to_flat()).unwrap();
            assert!(((e - e0) / e0).abs() < 1e-8);
        }
        let end = traj.last();
        assert!(
            (end.q[0] - 0.5).abs() < 1e-6 && end.q[1].abs() < 1e-6,
            "{end:?}"
        );
    }

    #[test]
    fn adaptive_rejects_bad_inputs() {
        let field = Symplectic(AnalyticSystem::mass_spring());
        let x = pp(1.0, 0.0);
        assert!(integrate_adaptive(&field, &x, &[0.0, 1.0, 0.5], 1e-9).is_err());
        assert!(integrate_adaptive(&field, &x, &[0.0, 1.0], 0.0).is_err());
        assert!(integrate_adaptive(&field, &x, &[], 1e-9).is_err());
    }

    #[test]
    fn adaptive_stiffness_is_reported() {
        // dq/dt = q^2 blows up at t = 1 for q(0) = 1.
        let blowup = FnField::new(2, |x: &[f64], out: &mut [f64]| {
            out[0] = x[0] * x[0];
            out[1] = 0.0;
            Ok(())
        });
        let r = integrate_adaptive(&blowup, &pp(1.0, 0.0), &[0.0, 2.0], 1e-9);
        assert!(
            matches!(r, Err(Error::StepUnderflow { .. }) | Err(Error::Numeric(_))),
            "{r:?}"
        );
    }
}
