//! Exact evaluation for small `n` by enumerating atom count vectors.

use crate::error::{Error, Result};
use crate::gparv::Gparv;

pub const MAX_EXACT_ATOMS: usize = 8;
pub const MAX_EXACT_N: usize = 12;

/// `E[(G_1 + ... + G_n)_+] / n` computed by summing the multinomial law of
/// the atom counts.
pub fn delta_exact_smalln(g: &Gparv, n: usize) -> Result<f64> {
    if g.has_continuous() {
        return Err(Error::UnsupportedKind("exact evaluation needs a purely atomic GPARV".into()));
    }
    if g.atoms.len() > MAX_EXACT_ATOMS || n == 0 || n > MAX_EXACT_N {
        return Err(Error::SizeLimit(format!(
            "exact evaluation supports at most {MAX_EXACT_ATOMS} atoms and 1 <= n <= {MAX_EXACT_N} \
             (got {} atoms, n = {n})",
            g.atoms.len()
        )));
    }
    let mut fact = [1.0f64; MAX_EXACT_N + 1];
    for i in 1..=MAX_EXACT_N {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut counts = vec![0usize; g.atoms.len()];
    let mut total = 0.0;
    enumerate(g, n, 0, &mut counts, &fact, &mut total);
    Ok(total / n as f64)
}

fn enumerate(g: &Gparv, left: usize, j: usize, counts: &mut [usize], fact: &[f64], total: &mut f64) {
    if j + 1 == counts.len() {
        counts[j] = left;
        let mut sum = 0.0;
        let mut prob = fact[counts.iter().sum::<usize>()];
        for (c, atom) in counts.iter().zip(&g.atoms) {
            sum += *c as f64 * atom.value;
            prob *= atom.mass.powi(*c as i32) / fact[*c];
        }
        if sum > 0.0 {
            *total += sum * prob;
        }
        return;
    }
    for c in 0..=left {
        counts[j] = c;
        enumerate(g, left - c, j + 1, counts, fact, total);
    }
}
