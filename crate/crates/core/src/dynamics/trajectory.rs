use std::io::Write;

use crate::{Error, Result};

/// Canonical coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhasePoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.is_empty() || q.len() != p.len() {
            return Err(Error::Shape(format!(
                "q and p must have equal non-zero length, got {} and {}",
                q.len(),
                p.len()
            )));
        }
        if q.iter().chain(&p).any(|v| !v.is_finite()) {
            return Err(Error::Numeric(
                "phase point has non-finite components".into(),
            ));
        }
        Ok(Self { q, p })
    }

    /// Splits `[q.., p..]`.
    pub fn from_flat(x: &[f64]) -> Result<Self> {
        if x.len() % 2 != 0 {
            return Err(Error::Shape(format!("state length {} is odd", x.len())));
        }
        let (q, p) = x.split_at(x.len() / 2);
        Self::new(q.to_vec(), p.to_vec())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.q.clone();
        v.extend_from_slice(&self.p);
        v
    }

    /// Degrees of freedom.
    pub fn dof(&self) -> usize {
        self.q.len()
    }

    pub fn dot(&self, other: &PhasePoint) -> f64 {
        self.q
            .iter()
            .zip(&other.q)
            .chain(self.p.iter().zip(&other.p))
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// A sampled solution curve.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
    pub derivs: Option<Vec<PhasePoint>>,
    pub energy: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<PhasePoint>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::Shape(format!(
                "{} times for {} states",
                times.len(),
                states.len()
            )));
        }
        Ok(Self {
            times,
            states,
            derivs: None,
            energy: None,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dof(&self) -> usize {
        self.states.first().map_or(0, PhasePoint::dof)
    }

    pub fn first(&self) -> &PhasePoint {
        &self.states[0]
    }

    pub fn last(&self) -> &PhasePoint {
        self.states.last().expect("non-empty trajectory")
    }

    pub fn with_derivs(mut self, derivs: Vec<PhasePoint>) -> Result<Self> {
        if derivs.len() != self.len() {
            return Err(Error::Shape("derivative count differs from states".into()));
        }
        self.derivs = Some(derivs);
        Ok(self)
    }

    pub fn with_energy(mut self, energy: Vec<f64>) -> Result<Self> {
        if energy.len() != self.len() {
            return Err(Error::Shape("energy count differs from states".into()));
        }
        self.energy = Some(energy);
        Ok(self)
    }

    /// Writes `t,q0..,p0..[,dq0dt..,dp0dt..][,energy]` with 17 significant
    /// digits per value.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.dof();
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("q{i}")));
        header.extend((0..n).map(|i| format!("p{i}")));
        if self.derivs.is_some() {
            header.extend((0..n).map(|i| format!("dq{i}dt")));
            header.extend((0..n).map(|i| format!("dp{i}dt")));
        }
        if self.energy.is_some() {
            header.push("energy".into());
        }
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut row = vec![fmt_f64(self.times[i])];
            row.extend(self.states[i].to_flat().into_iter().map(fmt_f64));
            if let Some(d) = &self.derivs {
                row.extend(d[i].to_flat().into_iter().map(fmt_f64));
            }
            if let Some(e) = &self.energy {
                row.push(fmt_f64(e[i]));
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
