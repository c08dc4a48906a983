use serde::{Deserialize, Serialize};

use super::{Hamiltonian, PhasePoint};
use crate::{Error, Result};

/// Bodies closer than this are treated as coincident.
pub const MIN_SEPARATION: f64 = 1e-12;

/// Systems with closed-form Hamiltonians.
///
/// N-body states are planar: `q = [x_1, y_1, x_2, y_2, ..]`, `p` likewise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticSystem {
    /// `H = k q^2 / 2 + p^2 / (2 m)`
    MassSpring { k: f64, m: f64 },
    /// `H = 2 m g l (1 - cos q) + l^2 p^2 / (2 m)`
    Pendulum { m: f64, g: f64, l: f64 },
    /// `H = sum |p_i|^2 / (2 m_i) - sum_{i<j} g m_i m_j / |q_i - q_j|`
    NBody { masses: Vec<f64>, g: f64 },
}

impl AnalyticSystem {
    pub fn mass_spring() -> Self {
        AnalyticSystem::MassSpring { k: 1.0, m: 1.0 }
    }

    pub fn pendulum() -> Self {
        AnalyticSystem::Pendulum {
            m: 1.0,
            g: 3.0,
            l: 1.0,
        }
    }

    pub fn nbody(n_bodies: usize) -> Self {
        AnalyticSystem::NBody {
            masses: vec![1.0; n_bodies],
            g: 1.0,
        }
    }

    /// Degrees of freedom (length of `q`).
    pub fn dof(&self) -> usize {
        match self {
            AnalyticSystem::MassSpring { .. } | AnalyticSystem::Pendulum { .. } => 1,
            AnalyticSystem::NBody { masses, .. } => 2 * masses.len(),
        }
    }

    pub fn n_bodies(&self) -> usize {
        match self {
            AnalyticSystem::NBody { masses, .. } => masses.len(),
            _ => 1,
        }
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != 2 * self.dof() {
            return Err(Error::Shape(format!(
                "state has length {}, system expects {}",
                x.len(),
                2 * self.dof()
            )));
        }
        Ok(())
    }

    /// Total momentum `sum p_i` of a planar N-body state.
    pub fn total_momentum(&self, x: &[f64]) -> [f64; 2] {
        let n = self.n_bodies();
        let p = &x[2 * n..];
        let mut total = [0.0; 2];
        for body in p.chunks_exact(2) {
            total[0] += body[0];
            total[1] += body[1];
        }
        total
    }

    /// Smallest pairwise separation of a planar N-body state.
    pub fn min_separation(&self, x: &[f64]) -> f64 {
        let n = self.n_bodies();
        let q = &x[..2 * n];
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                let dx = q[2 * i] - q[2 * j];
                let dy = q[2 * i + 1] - q[2 * j + 1];
                best = best.min(dx.hypot(dy));
            }
        }
        best
    }
}

impl Hamiltonian for AnalyticSystem {
    fn dim(&self) -> usize {
        2 * self.dof()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(match self {
            AnalyticSystem::MassSpring { k, m } => 0.5 * k * x[0] * x[0] + x[1] * x[1] / (2.0 * m),
            AnalyticSystem::Pendulum { m, g, l } => {
                2.0 * m * g * l * (1.0 - x[0].cos()) + l * l * x[1] * x[1] / (2.0 * m)
            }
            AnalyticSystem::NBody { masses, g } => {
                let n = masses.len();
                let (q, p) = x.split_at(2 * n);
                let mut kinetic = 0.0;
                for (i, m) in masses.iter().enumerate() {
                    kinetic += (p[2 * i].powi(2) + p[2 * i + 1].powi(2)) / (2.0 * m);
                }
                let mut potential = 0.0;
                for i in 0..n {
                    for j in i + 1..n {
                        let r = (q[2 * i] - q[2 * j]).hypot(q[2 * i + 1] - q[2 * j + 1]);
                        if r < MIN_SEPARATION {
                            return Err(Error::Singularity {
                                i,
                                j,
                                separation: r,
                            });
                        }
                        potential -= g * masses[i] * masses[j] / r;
                    }
                }
                kinetic + potential
            }
        })
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check(x)?;
        match self {
            AnalyticSystem::MassSpring { k, m } => {
                out[0] = k * x[0];
                out[1] = x[1] / m;
            }
            AnalyticSystem::Pendulum { m, g, l } => {
                out[0] = 2.0 * m * g * l * x[0].sin();
                out[1] = l * l * x[1] / m;
            }
            AnalyticSystem::NBody { masses, g } => {
                let n = masses.len();
                let (q, p) = x.split_at(2 * n);
                let (gq, gp) = out.split_at_mut(2 * n);
                gq.iter_mut().for_each(|v| *v = 0.0);
                for (i, m) in masses.iter().enumerate() {
                    gp[2 * i] = p[2 * i] / m;
                    gp[2 * i + 1] = p[2 * i + 1] / m;
                }
                for i in 0..n {
                    for j in i + 1..n {
                        let dx = q[2 * i] - q[2 * j];
                        let dy = q[2 * i + 1] - q[2 * j + 1];
                        let r = dx.hypot(dy);
                        if r < MIN_SEPARATION {
                            return Err(Error::Singularity {
                                i,
                                j,
                                separation: r,
                            });
                        }
                        // d/dq_i of -g m_i m_j / r
                        let c = g * masses[i] * masses[j] / (r * r * r);
                        gq[2 * i] += c * dx;
                        gq[2 * i + 1] += c * dy;
                        gq[2 * j] -= c * dx;
                        gq[2 * j + 1] -= c * dy;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Value of an analytic Hamiltonian at a phase point.
pub fn hamiltonian(sys: &AnalyticSystem, x: &PhasePoint) -> Result<f64> {
    sys.value(&x.to_flat())
}

/// Exact harmonic-oscillator flow with `omega = sqrt(k / m)`.
pub fn closed_form_spring(x0: &PhasePoint, t: f64, k: f64, m: f64) -> PhasePoint {
    let w = (k / m).sqrt();
    let (s, c) = (w * t).sin_cos();
    let (q0, p0) = (x0.q[0], x0.p[0]);
    PhasePoint {
        q: vec![q0 * c + p0 / (m * w) * s],
        p: vec![p0 * c - m * w * q0 * s],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{riemann_field, symplectic_field};
    use std::f64::consts::PI;

    fn pp(q: &[f64], p: &[f64]) -> PhasePoint {
        PhasePoint::new(q.to_vec(), p.to_vec()).unwrap()
    }

    #[test]
    fn spring_energy() {
        assert_eq!(
            hamiltonian(&AnalyticSystem::mass_spring(), &pp(&[1.0], &[0.0])).unwrap(),
            0.5
        );
    }

    #[test]
    fn pendulum_energy_at_top() {
        let h = hamiltonian(&AnalyticSystem::pendulum(), &pp(&[PI], &[0.0])).unwrap();
        assert!((h - 12.0).abs() < 1e-12);
    }

    /// Brute-force pairwise sum written independently of the system code.
    fn brute_nbody(q: &[[f64; 2]], p: &[[f64; 2]], m: &[f64], g: f64) -> f64 {
        let mut e = 0.0;
        for i in 0..q.len() {
            e += (p[i][0] * p[i][0] + p[i][1] * p[i][1]) / (2.0 * m[i]);
            for j in 0..q.len() {
                if i != j {
                    let d = ((q[i][0] - q[j][0]).powi(2) + (q[i][1] - q[j][1]).powi(2)).sqrt();
                    e -= 0.5 * g * m[i] * m[j] / d;
                }
            }
        }
        e
    }

    #[test]
    fn two_body_energy() {
        let sys = AnalyticSystem::nbody(2);
        let x = pp(&[1.0, 0.0, -1.0, 0.0], &[0.0, 0.5, 0.0, -0.5]);
        let h = hamiltonian(&sys, &x).unwrap();
        assert!((h + 0.25).abs() < 1e-15);
        let brute = brute_nbody(
            &[[1.0, 0.0], [-1.0, 0.0]],
            &[[0.0, 0.5], [0.0, -0.5]],
            &[1.0, 1.0],
            1.0,
        );
        assert!((h - brute).abs() < 1e-15);
    }

    #[test]
    fn three_body_matches_brute_force() {
        let masses = vec![1.0, 2.0, 0.5];
        let sys = AnalyticSystem::NBody {
            masses: masses.clone(),
            g: 1.3,
        };
        let q = [[0.1, 0.4], [-0.7, 0.2], [0.3, -0.9]];
        let p = [[0.3, -0.1], [0.05, 0.2], [-0.4, 0.6]];
        let x = pp(&q.concat(), &p.concat());
        let brute = brute_nbody(&q, &p, &masses, 1.3);
        assert!((hamiltonian(&sys, &x).unwrap() - brute).abs() < 1e-14);
    }

    #[test]
    fn coincident_bodies_are_singular() {
        let sys = AnalyticSystem::nbody(2);
        let x = [0.5, 0.5, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0];
        assert!(matches!(sys.value(&x), Err(Error::Singularity { .. })));
        let mut g = [0.0; 8];
        assert!(matches!(
            sys.gradient(&x, &mut g),
            Err(Error::Singularity { .. })
        ));
    }

    #[test]
    fn spring_fields() {
        let sys = AnalyticSystem::mass_spring();
        let s = symplectic_field(&sys, &pp(&[0.0], &[1.0])).unwrap();
        assert_eq!((s.q[0], s.p[0]), (1.0, 0.0));
        let s = symplectic_field(&sys, &pp(&[1.0], &[0.0])).unwrap();
        assert_eq!((s.q[0], s.p[0]), (0.0, -1.0));
        let r = riemann_field(&sys, &pp(&[1.0], &[0.0])).unwrap();
        assert_eq!((r.q[0], r.p[0]), (1.0, 0.0));
        let r = riemann_field(&sys, &pp(&[0.0], &[0.0])).unwrap();
        assert_eq!((r.q[0], r.p[0]), (0.0, 0.0));
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let sys = AnalyticSystem::nbody(2);
        assert!(symplectic_field(&sys, &pp(&[0.0], &[1.0])).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let systems = [
            AnalyticSystem::mass_spring(),
            AnalyticSystem::pendulum(),
            AnalyticSystem::NBody {
                masses: vec![1.0, 1.5, 0.7],
                g: 1.0,
            },
        ];
        for sys in &systems {
            let n = 2 * sys.dof();
            let x: Vec<f64> = (0..n)
                .map(|i| 0.3 + 0.37 * i as f64 * if i % 3 == 0 { -1.0 } else { 1.0 })
                .collect();
            let mut g = vec![0.0; n];
            sys.gradient(&x, &mut g).unwrap();
            for i in 0..n {
                let h = 1e-6;
                let mut a = x.clone();
                let mut b = x.clone();
                a[i] += h;
                b[i] -= h;
                let fd = (sys.value(&a).unwrap() - sys.value(&b).unwrap()) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-7 * (1.0 + g[i].abs()), "{sys:?} {i}");
            }
        }
    }

    #[test]
    fn closed_form_spring_values() {
        let x = pp(&[1.0], &[0.0]);
        assert_eq!(closed_form_spring(&x, 0.0, 1.0, 1.0), x);
        let y = closed_form_spring(&x, 2.0 * PI, 1.0, 1.0);
        assert!((y.q[0] - 1.0).abs() < 1e-15 && y.p[0].abs() < 1e-15);
        let y = closed_form_spring(&pp(&[0.0], &[1.0]), PI / 2.0, 1.0, 1.0);
        assert!((y.q[0] - 1.0).abs() < 1e-15 && y.p[0].abs() < 1e-15);
    }
}
