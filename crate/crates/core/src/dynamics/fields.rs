use super::PhasePoint;
use crate::{Error, Result};

/// An autonomous vector field on flat states.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()>;
}

/// A scalar function of `[q.., p..]` with its gradient `(dH/dq, dH/dp)`.
pub trait Hamiltonian {
    /// Length of the flat state.
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()>;
}

impl<T: VectorField + ?Sized> VectorField for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).eval(x, out)
    }
}

impl<T: Hamiltonian + ?Sized> Hamiltonian for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).gradient(x, out)
    }
}

/// Time evolution `(dH/dp, -dH/dq)`.
#[derive(Clone, Copy, Debug)]
pub struct Symplectic<H>(pub H);

/// Steepest ascent `(dH/dq, dH/dp)`.
#[derive(Clone, Copy, Debug)]
pub struct Riemann<H>(pub H);

/// The field `-f`, used for reverse-time integration.
#[derive(Clone, Copy, Debug)]
pub struct Negated<F>(pub F);

/// Wraps a closure as a field.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) -> Result<()>> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64]) -> Result<()>> VectorField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (self.f)(x, out)
    }
}

impl<H: Hamiltonian> VectorField for Symplectic<H> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let mut g = vec![0.0; x.len()];
        self.0.gradient(x, &mut g)?;
        crate::diffcore::symplectic_permute(&g, out);
        Ok(())
    }
}

impl<H: Hamiltonian> VectorField for Riemann<H> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.0.gradient(x, out)
    }
}

impl<F: VectorField> VectorField for Negated<F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.0.eval(x, out)?;
        out.iter_mut().for_each(|v| *v = -*v);
        Ok(())
    }
}

fn check_dim(h: &impl Hamiltonian, x: &PhasePoint) -> Result<()> {
    if 2 * x.dof() != h.dim() {
        return Err(Error::Shape(format!(
            "phase point has {} coordinates, hamiltonian expects {}",
            2 * x.dof(),
            h.dim()
        )));
    }
    Ok(())
}

/// `(dq/dt, dp/dt) = (dH/dp, -dH/dq)` at `x`.
pub fn symplectic_field(h: &impl Hamiltonian, x: &PhasePoint) -> Result<PhasePoint> {
    check_dim(h, x)?;
    let flat = x.to_flat();
    let mut out = vec![0.0; flat.len()];
    Symplectic(h).eval(&flat, &mut out)?;
    PhasePoint::from_flat(&out)
}

/// `(dH/dq, dH/dp)` at `x`.
pub fn riemann_field(h: &impl Hamiltonian, x: &PhasePoint) -> Result<PhasePoint> {
    check_dim(h, x)?;
    let flat = x.to_flat();
    let mut out = vec![0.0; flat.len()];
    h.gradient(&flat, &mut out)?;
    PhasePoint::from_flat(&out)
}
