//! Evaluation of `E[(G_1 + ... + G_n)_+] / n` on a lattice, with error terms.

use serde::Serialize;

use super::convolve::{self_convolve_windowed, DEFAULT_TAIL};
use super::lattice::{discretize, LatticeDist, Rounding};
use crate::error::Result;
use crate::gparv::Gparv;
use crate::probdist::stable_sum;

/// Sum of `value * mass` over lattice points with positive value.
pub fn positive_part_mean(d: &LatticeDist) -> f64 {
    let start = (-d.min_index + 1).max(0) as usize;
    if start >= d.masses.len() {
        return 0.0;
    }
    let k0 = d.min_index + start as i64;
    let s = stable_sum(
        d.masses[start..]
            .iter()
            .enumerate()
            .map(|(i, &m)| (k0 + i as i64) as f64 * m),
    );
    s * d.step
}

/// One lattice evaluation of the shuffled divergence for a single GPARV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaBound {
    /// Upper bound (rounding up) or lower estimate (rounding down) of delta,
    /// including the window tail correction.
    pub delta: f64,
    pub mode: Rounding,
    pub n: usize,
    pub step: f64,
    pub mass_defect: f64,
    /// Bound on `E[G^{*n}]_+ / n - delta` from discretization, in delta units:
    /// `l`, or `l * exp(-(2a^2/b^2 - l) n)` when `l <= 2a^2/b^2`.
    pub discretization_slack: f64,
    /// Correction applied for mass outside the convolution window.
    pub tail_slack: f64,
    pub fft_len: usize,
    pub windowed: bool,
}

/// Discretization error bound of the rounded-up lattice, in delta units.
pub fn discretization_slack(eps0: f64, eps: f64, n: usize, step: f64) -> f64 {
    let a = eps.exp() - 1.0;
    let b = (eps0.exp() - 1.0) * (eps.exp() + 1.0);
    let rate = 2.0 * a * a / (b * b);
    if b > 0.0 && step <= rate {
        step * (-(rate - step) * n as f64).exp().min(1.0)
    } else {
        step
    }
}

/// `E[(sum of n copies of the discretized g)_+] / n`.
///
/// With [`Rounding::Up`] the result bounds the divergence from above; with
/// [`Rounding::Down`] it is a lower estimate. When every lattice value is
/// non-positive the result is exactly 0 and no transform is run.
pub fn delta_bound(g: &Gparv, n: usize, step: f64, mode: Rounding) -> Result<DeltaBound> {
    delta_bound_with_tail(g, n, step, mode, DEFAULT_TAIL)
}

pub fn delta_bound_with_tail(g: &Gparv, n: usize, step: f64, mode: Rounding, tail: f64) -> Result<DeltaBound> {
    let lattice = discretize(g, step, mode)?.trimmed();
    let slack = discretization_slack(g.eps0, g.eps, n, step);
    if lattice.masses.is_empty() || lattice.max_index() <= 0 {
        return Ok(DeltaBound {
            delta: 0.0,
            mode,
            n,
            step,
            mass_defect: (1.0 - lattice.total_mass()).abs(),
            discretization_slack: slack,
            tail_slack: 0.0,
            fft_len: 0,
            windowed: false,
        });
    }
    let conv = self_convolve_windowed(&lattice, n, tail)?;
    let raw = positive_part_mean(&conv.dist) / n as f64;
    let nf = n as f64;
    let (delta, tail_slack) = match mode {
        Rounding::Up => {
            // mass beyond the window sits at values up to n * max * l
            let s = lattice.max_index() as f64 * step * conv.tail_right;
            ((raw + s).min(1.0), s)
        }
        Rounding::Down => {
            // wrapped-in mass inflates at most the window's largest value
            let top = conv.dist.max_index().max(0) as f64 * step;
            let s = top * (conv.tail_left + conv.tail_right) / nf;
            ((raw - s).max(0.0), s)
        }
    };
    Ok(DeltaBound {
        delta,
        mode,
        n,
        step,
        mass_defect: conv.mass_defect,
        discretization_slack: slack,
        tail_slack,
        fft_len: conv.fft_len,
        windowed: conv.windowed,
    })
}
