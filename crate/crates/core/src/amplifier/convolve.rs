//! n-fold self-convolution of lattice distributions by real FFT.
//!
//! [`self_convolve`] pads to the full support of the sum, so no wrap-around
//! occurs. [`self_convolve_windowed`] transforms only a window that holds all
//! but a Chernoff-bounded tail of the sum; mass outside the window aliases
//! into it, and the bound on that mass is returned with the result.

use realfft::num_complex::Complex;
use realfft::RealFftPlanner;
use serde::Serialize;

use super::lattice::LatticeDist;
use crate::error::{Error, Result};
use crate::probdist::stable_sum;

/// Largest transform length attempted (about 1 GiB of working memory).
pub const MAX_FFT_LEN: usize = 1 << 26;
/// Default bound on the probability mass left outside a window, per side.
pub const DEFAULT_TAIL: f64 = 1e-40;

/// Result of an n-fold convolution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Convolution {
    pub dist: LatticeDist,
    /// `|1 - sum of masses|` after clamping negative roundoff to 0.
    pub mass_defect: f64,
    /// Bound on the sum's mass below the returned index range.
    pub tail_left: f64,
    /// Bound on the sum's mass above the returned index range.
    pub tail_right: f64,
    pub fft_len: usize,
    pub windowed: bool,
}

/// Smallest `2^a 3^b 5^c` that is at least `n`.
pub fn fft_friendly_len(n: usize) -> usize {
    let n = n.max(1);
    let mut best = n.next_power_of_two();
    let mut p5 = 1usize;
    while p5 < best {
        let mut p35 = p5;
        while p35 < best {
            let mut v = p35;
            while v < n {
                v *= 2;
            }
            best = best.min(v);
            p35 *= 3;
        }
        p5 *= 5;
    }
    best
}

fn check_n(n: usize) -> Result<u32> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    u32::try_from(n).map_err(|_| Error::InvalidParameter(format!("n = {n} is too large")))
}

fn check_len(len: usize, what: &str) -> Result<()> {
    if len > MAX_FFT_LEN {
        return Err(Error::Resource(format!(
            "{what} needs a transform of length {len} (limit {MAX_FFT_LEN}); use a larger lattice step"
        )));
    }
    Ok(())
}

/// Cyclic n-fold self-convolution of `input` (already folded to length `len`).
fn cyclic_power(mut input: Vec<f64>, n: u32) -> Vec<f64> {
    let len = input.len();
    let mut planner = RealFftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(len);
    let inverse = planner.plan_fft_inverse(len);
    let mut spectrum = forward.make_output_vec();
    forward.process(&mut input, &mut spectrum).expect("buffer sizes match the plan");
    for z in spectrum.iter_mut() {
        *z = z.powu(n);
    }
    // the inverse transform requires purely real end points
    spectrum[0] = Complex::new(spectrum[0].re, 0.0);
    if len % 2 == 0 {
        let last = spectrum.len() - 1;
        spectrum[last] = Complex::new(spectrum[last].re, 0.0);
    }
    let mut out = inverse.make_output_vec();
    inverse.process(&mut spectrum, &mut out).expect("buffer sizes match the plan");
    let scale = 1.0 / len as f64;
    for v in out.iter_mut() {
        *v *= scale;
    }
    out
}

fn finish(
    step: f64,
    min_index: i64,
    mut masses: Vec<f64>,
    fft_len: usize,
    windowed: bool,
    tails: (f64, f64),
) -> Convolution {
    for m in masses.iter_mut() {
        if *m < 0.0 {
            *m = 0.0;
        }
    }
    let mass_defect = (1.0 - stable_sum(masses.iter().copied())).abs();
    Convolution {
        dist: LatticeDist::new(step, min_index, masses),
        mass_defect,
        tail_left: tails.0,
        tail_right: tails.1,
        fft_len,
        windowed,
    }
}

/// Distribution of the sum of `n` independent copies of `d`, on the full
/// index range `[n * min_index, n * max_index]`.
pub fn self_convolve(d: &LatticeDist, n: usize) -> Result<Convolution> {
    let n32 = check_n(n)?;
    let width = d.masses.len();
    if width == 0 {
        return Err(Error::InvalidDistribution("empty lattice".into()));
    }
    if n == 1 {
        return Ok(finish(d.step, d.min_index, d.masses.clone(), 0, false, (0.0, 0.0)));
    }
    let support = (width - 1)
        .checked_mul(n)
        .and_then(|v| v.checked_add(1))
        .ok_or_else(|| Error::Resource("support of the sum overflows".into()))?;
    let len = fft_friendly_len(support);
    check_len(len, "full convolution")?;
    let mut input = vec![0.0; len];
    input[..width].copy_from_slice(&d.masses);
    let mut out = cyclic_power(input, n32);
    out.truncate(support);
    Ok(finish(d.step, d.min_index * n as i64, out, len, false, (0.0, 0.0)))
}

/// Nonzero cells as `(index, ln mass)`.
fn log_points(d: &LatticeDist) -> Vec<(f64, f64)> {
    d.masses
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0.0)
        .map(|(i, &m)| ((d.min_index + i as i64) as f64, m.ln()))
        .collect()
}

fn log_mgf(points: &[(f64, f64)], lambda: f64) -> f64 {
    let max = points.iter().map(|&(k, lm)| lambda * k + lm).fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = points.iter().map(|&(k, lm)| (lambda * k + lm - max).exp()).sum();
    max + s.ln()
}

/// Chernoff cut in index units: for `side = 1`, a `t` with
/// `P(S >= t) <= tail`; for `side = -1`, a `t` with `P(S <= t) <= tail`.
fn chernoff_cut(points: &[(f64, f64)], n: usize, tail: f64, side: f64) -> f64 {
    let nf = n as f64;
    let log_tail = tail.ln();
    // cut(lambda) = (n log M(lambda) - log tail) / lambda, lambda = side * e^u
    let cut = |u: f64| {
        let lambda = side * u.exp();
        (nf * log_mgf(points, lambda) - log_tail) / lambda
    };
    let better = |x: f64, y: f64| if side > 0.0 { x < y } else { x > y };
    let (lo, hi, steps) = (-30.0f64, 6.0f64, 144);
    let h = (hi - lo) / steps as f64;
    let mut best_u = lo;
    let mut best = cut(lo);
    for k in 1..=steps {
        let u = lo + h * k as f64;
        let v = cut(u);
        if v.is_finite() && (!best.is_finite() || better(v, best)) {
            best = v;
            best_u = u;
        }
    }
    // golden-section refinement around the best grid point
    let (mut a, mut b) = (best_u - h, best_u + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        let (f1, f2) = (cut(x1), cut(x2));
        if f1.is_finite() && (!f2.is_finite() || better(f1, f2)) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let refined = cut(0.5 * (a + b));
    if refined.is_finite() && better(refined, best) {
        refined
    } else {
        best
    }
}

/// Index window `[lo, hi]` outside of which the n-fold sum has at most
/// `tail` mass on each side, with the tail bound that applies per side.
pub fn chernoff_window(d: &LatticeDist, n: usize, tail: f64) -> (i64, i64, f64, f64) {
    let full_lo = d.min_index * n as i64;
    let full_hi = d.max_index() * n as i64;
    let points = log_points(d);
    let right = chernoff_cut(&points, n, tail, 1.0);
    let left = chernoff_cut(&points, n, tail, -1.0);
    let (hi, tail_right) = if right.is_finite() && right.ceil() < full_hi as f64 {
        (right.ceil() as i64, tail)
    } else {
        (full_hi, 0.0)
    };
    let (lo, tail_left) = if left.is_finite() && left.floor() > full_lo as f64 {
        (left.floor() as i64, tail)
    } else {
        (full_lo, 0.0)
    };
    if lo > hi {
        return (full_lo, full_hi, 0.0, 0.0);
    }
    (lo, hi, tail_left, tail_right)
}

/// n-fold convolution over a Chernoff window. Masses outside the window
/// (at most `tail` per side) wrap around into it. Falls back to
/// [`self_convolve`] when the window is not shorter than the full support.
pub fn self_convolve_windowed(d: &LatticeDist, n: usize, tail: f64) -> Result<Convolution> {
    let n32 = check_n(n)?;
    let d = d.clone().trimmed();
    if d.masses.is_empty() {
        return Err(Error::InvalidDistribution("empty lattice".into()));
    }
    let width = d.masses.len();
    let full = (width - 1).saturating_mul(n).saturating_add(1);
    if n == 1 || width == 1 {
        return self_convolve(&d, n);
    }
    let (lo, hi, tail_left, tail_right) = chernoff_window(&d, n, tail);
    let window = (hi - lo + 1) as usize;
    let len = fft_friendly_len(window);
    if len >= fft_friendly_len(full) {
        return self_convolve(&d, n);
    }
    check_len(len, "windowed convolution")?;
    let mut input = vec![0.0; len];
    for (i, &m) in d.masses.iter().enumerate() {
        input[i % len] += m;
    }
    let out = cyclic_power(input, n32);
    // position p holds the sums with index congruent to p + n * min_index
    let shift = d.min_index * n as i64 - lo;
    let l = len as i64;
    let mut masses = vec![0.0; len];
    for (p, v) in out.into_iter().enumerate() {
        let s = (p as i64 + shift).rem_euclid(l);
        masses[s as usize] = v;
    }
    Ok(finish(d.step, lo, masses, len, true, (tail_left, tail_right)))
}

/// Direct convolution of two lattices with the same step.
pub fn convolve_naive(x: &LatticeDist, y: &LatticeDist) -> LatticeDist {
    let mut out = vec![0.0; x.masses.len() + y.masses.len() - 1];
    for (i, &a) in x.masses.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for (j, &b) in y.masses.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    LatticeDist::new(x.step, x.min_index + y.min_index, out)
}

/// `n`-fold convolution by repeated direct convolution.
pub fn self_convolve_naive(d: &LatticeDist, n: usize) -> LatticeDist {
    let mut acc = d.clone();
    for _ in 1..n {
        acc = convolve_naive(&acc, d);
    }
    acc
}
