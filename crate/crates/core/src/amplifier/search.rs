//! Searches over `eps` and `eps0`, and amplification curves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bound::{delta_bound, DeltaBound};
use super::lattice::Rounding;
use crate::error::{Error, Result};
use crate::gparv::GparvFamily;

pub const DEFAULT_EPS_TOL: f64 = 1e-3;
pub const DEFAULT_EPS0_GRID: f64 = 0.01;
pub const DEFAULT_MAX_EPS0: f64 = 10.0;

/// Lattice step as a function of the local budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// `l = (e^eps0 - 1) / divisor`.
    Relative(f64),
    Fixed(f64),
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Relative(1000.0)
    }
}

impl StepRule {
    pub fn step(&self, eps0: f64) -> f64 {
        match *self {
            StepRule::Relative(divisor) => eps0.exp_m1() / divisor,
            StepRule::Fixed(l) => l,
        }
    }

    /// The same rule with half the step.
    pub fn halved(&self) -> Self {
        match *self {
            StepRule::Relative(divisor) => StepRule::Relative(2.0 * divisor),
            StepRule::Fixed(l) => StepRule::Fixed(l / 2.0),
        }
    }
}

/// Worst case over the cases of a family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyDelta {
    pub bound: DeltaBound,
    /// Index of the maximizing case.
    pub case: usize,
}

pub fn family_delta(
    family: &dyn GparvFamily,
    eps: f64,
    n: usize,
    step: f64,
    mode: Rounding,
) -> Result<FamilyDelta> {
    let mut best: Option<FamilyDelta> = None;
    for (case, g) in family.at(eps)?.iter().enumerate() {
        let bound = delta_bound(g, n, step, mode)?;
        if best.as_ref().map_or(true, |b| bound.delta > b.bound.delta) {
            best = Some(FamilyDelta { bound, case });
        }
    }
    best.ok_or(Error::EmptyComposition)
}

/// Bisection on `eps` in `[0, hi]` for the level where `delta(eps)` drops
/// to `target`. Returns `(lo, hi)` with `delta(lo) > target >= delta(hi)`
/// and `hi - lo <= tol`, or `(0, 0)` if `delta(0) <= target`.
fn bisect(
    family: &dyn GparvFamily,
    n: usize,
    target: f64,
    step: f64,
    mode: Rounding,
    tol: f64,
    hi: f64,
) -> Result<(f64, f64)> {
    let delta = |eps: f64| family_delta(family, eps, n, step, mode).map(|d| d.bound.delta);
    if delta(0.0)? <= target {
        return Ok((0.0, 0.0));
    }
    if delta(hi)? > target {
        return Ok((hi, hi));
    }
    let (mut lo, mut hi) = (0.0, hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if delta(mid)? <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo, hi))
}

fn check_target(delta_target: f64) -> Result<()> {
    if !(delta_target > 0.0 && delta_target < 1.0) {
        return Err(Error::InvalidParameter(format!("delta target must be in (0, 1), got {delta_target}")));
    }
    Ok(())
}

/// Smallest `eps` (to within `tol`, rounded towards larger `eps`) with
/// upper bound `delta(eps) <= delta_target`.
pub fn find_epsilon(
    family: &dyn GparvFamily,
    n: usize,
    delta_target: f64,
    step: f64,
    tol: f64,
) -> Result<f64> {
    check_target(delta_target)?;
    let eps0 = family.eps0();
    let (_, hi) = bisect(family, n, delta_target, step, Rounding::Up, tol, eps0)?;
    let at_top = family_delta(family, hi, n, step, Rounding::Up)?.bound.delta;
    if at_top > delta_target {
        return Err(Error::SearchRange(format!(
            "delta({hi}) = {at_top} exceeds the target {delta_target}"
        )));
    }
    Ok(hi)
}

/// Largest `eps` (to within `tol`, rounded towards smaller `eps`) in
/// `[0, limit]` whose lower estimate `delta(eps)` still exceeds
/// `delta_target`: no smaller privacy level can be certified.
pub fn find_epsilon_lower(
    family: &dyn GparvFamily,
    n: usize,
    delta_target: f64,
    step: f64,
    tol: f64,
    limit: f64,
) -> Result<f64> {
    check_target(delta_target)?;
    let (lo, _) = bisect(family, n, delta_target, step, Rounding::Down, tol, limit)?;
    Ok(lo)
}

/// Builds the family of a randomizer at a given local budget.
pub type FamilyBuilder<'a> = dyn Fn(f64) -> Result<Box<dyn GparvFamily>> + Sync + 'a;

/// Largest `eps0` on the grid `grid_step * {1, 2, ...}` (up to `max_eps0`)
/// whose upper bound satisfies `delta(eps_target) <= delta_target`, assuming
/// the bound grows with `eps0`.
pub fn find_eps0(
    builder: &FamilyBuilder<'_>,
    n: usize,
    delta_target: f64,
    eps_target: f64,
    grid_step: f64,
    step_rule: StepRule,
    max_eps0: f64,
) -> Result<f64> {
    check_target(delta_target)?;
    if !(grid_step > 0.0) || !(max_eps0 >= grid_step) {
        return Err(Error::InvalidParameter("eps0 grid needs 0 < grid_step <= max_eps0".into()));
    }
    let count = (max_eps0 / grid_step + 1e-9).floor() as usize;
    let point = |i: usize| ((i as f64 * grid_step) * 1e10).round() / 1e10;
    let feasible = |i: usize| -> Result<bool> {
        let eps0 = point(i);
        if eps_target >= eps0 {
            return Ok(true);
        }
        let family = builder(eps0)?;
        let d = family_delta(family.as_ref(), eps_target, n, step_rule.step(eps0), Rounding::Up)?;
        Ok(d.bound.delta <= delta_target)
    };
    if !feasible(1)? {
        return Err(Error::SearchRange(format!(
            "even eps0 = {} misses the target (eps = {eps_target}, delta = {delta_target})",
            point(1)
        )));
    }
    if feasible(count)? {
        return Err(Error::SearchRange(format!(
            "target is met for every eps0 up to {}; raise the search range",
            point(count)
        )));
    }
    let (mut good, mut bad) = (1usize, count);
    while bad - good > 1 {
        let mid = (good + bad) / 2;
        if feasible(mid)? {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(point(good))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub eps0: f64,
    pub n: usize,
    pub eps_upper: f64,
    pub eps_lower: Option<f64>,
    pub delta_target: f64,
    pub grid_step: f64,
}

/// Upper and (optionally) lower privacy levels for each `eps0`. The lower
/// search runs on `[0, eps_upper]`, so `eps_lower <= eps_upper`.
pub fn curve(
    upper: &FamilyBuilder<'_>,
    lower: Option<&FamilyBuilder<'_>>,
    n: usize,
    delta_target: f64,
    eps0_values: &[f64],
    step_rule: StepRule,
    tol: f64,
) -> Result<Vec<CurveRow>> {
    check_target(delta_target)?;
    eps0_values
        .par_iter()
        .map(|&eps0| {
            let step = step_rule.step(eps0);
            let eps_upper = find_epsilon(upper(eps0)?.as_ref(), n, delta_target, step, tol)?;
            let eps_lower = match lower {
                Some(build) => Some(find_epsilon_lower(
                    build(eps0)?.as_ref(),
                    n,
                    delta_target,
                    step,
                    tol,
                    eps_upper,
                )?),
                None => None,
            };
            Ok(CurveRow { eps0, n, eps_upper, eps_lower, delta_target, grid_step: step })
        })
        .collect()
}
