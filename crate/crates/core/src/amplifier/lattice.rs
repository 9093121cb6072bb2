//! Lattice distributions and discretization of GPARVs onto them.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gparv::Gparv;
use crate::probdist::stable_sum;

/// Values within this many lattice steps of a multiple count as that multiple.
pub const SNAP_TOL: f64 = 1e-9;
/// Largest number of cells a single discretized GPARV may occupy.
pub const MAX_LATTICE_CELLS: i64 = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    /// Round values up; the result stochastically dominates the input.
    Up,
    /// Round values down; the input stochastically dominates the result.
    Down,
}

/// Masses at the points `(min_index + i) * step`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeDist {
    pub step: f64,
    pub min_index: i64,
    pub masses: Vec<f64>,
}

impl LatticeDist {
    pub fn new(step: f64, min_index: i64, masses: Vec<f64>) -> Self {
        Self { step, min_index, masses }
    }

    pub fn max_index(&self) -> i64 {
        self.min_index + self.masses.len() as i64 - 1
    }

    pub fn value(&self, i: usize) -> f64 {
        (self.min_index + i as i64) as f64 * self.step
    }

    pub fn total_mass(&self) -> f64 {
        stable_sum(self.masses.iter().copied())
    }

    /// Mass at or below lattice index `k`.
    pub fn cdf_index(&self, k: i64) -> f64 {
        if k < self.min_index {
            return 0.0;
        }
        let end = ((k - self.min_index + 1) as usize).min(self.masses.len());
        stable_sum(self.masses[..end].iter().copied())
    }

    /// Drops zero cells at both ends.
    pub fn trimmed(mut self) -> Self {
        let first = self.masses.iter().position(|&m| m > 0.0);
        let Some(first) = first else {
            return Self { step: self.step, min_index: 0, masses: vec![] };
        };
        let last = self.masses.iter().rposition(|&m| m > 0.0).unwrap();
        self.masses.truncate(last + 1);
        self.masses.drain(..first);
        self.min_index += first as i64;
        self
    }
}

/// Lattice index of `v` under the given rounding, treating values within
/// [`SNAP_TOL`] steps of a multiple as exact.
pub fn lattice_index(v: f64, step: f64, mode: Rounding) -> i64 {
    let x = v / step;
    let r = x.round();
    if (x - r).abs() <= SNAP_TOL {
        return r as i64;
    }
    match mode {
        Rounding::Up => x.ceil() as i64,
        Rounding::Down => x.floor() as i64,
    }
}

/// Rounds every value of `g` to the lattice `step * Z`. Atoms move to the
/// nearest multiple in the rounding direction; a continuous segment puts the
/// mass of each cell `(u_i, u_{i+1}]` on its upper endpoint (round up) or the
/// mass of `[u_i, u_{i+1})` on its lower endpoint (round down).
pub fn discretize(g: &Gparv, step: f64, mode: Rounding) -> Result<LatticeDist> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("lattice step must be positive, got {step}")));
    }
    let mut entries: Vec<(i64, f64)> =
        g.atoms.iter().map(|a| (lattice_index(a.value, step, mode), a.mass)).collect();
    let cont = g.continuous.filter(|c| c.weight > 0.0);
    let mut cont_range = None;
    if let Some(c) = cont {
        let (lo, hi) = c.law.support();
        let i_lo = lattice_index(lo, step, Rounding::Down);
        let i_hi = lattice_index(hi, step, Rounding::Up);
        cont_range = Some((i_lo, i_hi));
        entries.push((i_lo, 0.0));
        entries.push((i_hi, 0.0));
    }
    let (min_index, max_index) = entries
        .iter()
        .fold((i64::MAX, i64::MIN), |(lo, hi), &(i, _)| (lo.min(i), hi.max(i)));
    if entries.is_empty() {
        return Err(Error::InvalidDistribution("GPARV has no mass".into()));
    }
    let cells = max_index - min_index + 1;
    if cells > MAX_LATTICE_CELLS {
        return Err(Error::Resource(format!(
            "discretization needs {cells} cells; use a larger step than {step}"
        )));
    }
    let mut masses = vec![0.0; cells as usize];
    for (i, m) in entries {
        masses[(i - min_index) as usize] += m;
    }
    if let (Some(c), Some((i_lo, i_hi))) = (cont, cont_range) {
        match mode {
            Rounding::Up => {
                let mut prev = 0.0;
                for i in i_lo..=i_hi {
                    let f = if i == i_hi { 1.0 } else { c.law.cdf(i as f64 * step) };
                    masses[(i - min_index) as usize] += c.weight * (f - prev).max(0.0);
                    prev = prev.max(f);
                }
            }
            Rounding::Down => {
                let mut prev = 0.0;
                for i in i_lo..=i_hi {
                    let f = if i == i_hi { 1.0 } else { c.law.cdf_left((i + 1) as f64 * step) };
                    masses[(i - min_index) as usize] += c.weight * (f - prev).max(0.0);
                    prev = prev.max(f);
                }
            }
        }
    }
    Ok(LatticeDist::new(step, min_index, masses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gparv::{gparv_laplace_upper, Atom};

    fn atoms(v: &[(f64, f64)]) -> Gparv {
        Gparv::from_atoms(v.iter().map(|&(value, mass)| Atom { value, mass }).collect(), None, 1.0, 0.0)
    }

    #[test]
    fn rounding_examples() {
        assert_eq!(lattice_index(0.25, 0.1, Rounding::Up), 3);
        assert_eq!(lattice_index(0.25, 0.1, Rounding::Down), 2);
        assert_eq!(lattice_index(0.0, 0.1, Rounding::Up), 0);
        assert_eq!(lattice_index(0.0, 0.1, Rounding::Down), 0);
        // 0.3 / 0.1 is 2.9999999999999996 in floating point
        assert_eq!(lattice_index(0.3, 0.1, Rounding::Up), 3);
        assert_eq!(lattice_index(0.3, 0.1, Rounding::Down), 3);
        assert_eq!(lattice_index(-0.25, 0.1, Rounding::Up), -2);
    }

    #[test]
    fn discretize_atoms() {
        let g = atoms(&[(-0.25, 0.5), (0.0, 0.25), (0.31, 0.25)]);
        let up = discretize(&g, 0.1, Rounding::Up).unwrap();
        assert_eq!(up.min_index, -2);
        assert_eq!(up.max_index(), 4);
        assert_eq!(up.masses[0], 0.5);
        let down = discretize(&g, 0.1, Rounding::Down).unwrap();
        assert_eq!(down.min_index, -3);
        assert_eq!(down.max_index(), 3);
        assert!((up.total_mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn discretize_continuous_keeps_mass() {
        let g = gparv_laplace_upper(1.0, 0.2).unwrap();
        for mode in [Rounding::Up, Rounding::Down] {
            let d = discretize(&g, 1e-3, mode).unwrap();
            assert!((d.total_mass() - 1.0).abs() < 1e-12);
            assert!(d.masses.iter().all(|&m| m >= 0.0));
        }
    }

    #[test]
    fn trimming() {
        let d = LatticeDist::new(1.0, -2, vec![0.0, 0.5, 0.5, 0.0]).trimmed();
        assert_eq!(d.min_index, -1);
        assert_eq!(d.masses, vec![0.5, 0.5]);
    }
}
