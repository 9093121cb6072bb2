//! Combined upper/lower report at one privacy level.

use serde::Serialize;

use super::lattice::Rounding;
use super::search::family_delta;
use crate::error::Result;
use crate::gparv::GparvFamily;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub delta_upper: f64,
    pub delta_lower: Option<f64>,
    pub eps: f64,
    pub eps0: f64,
    pub n: usize,
    pub step: f64,
    /// Largest `|1 - sum of masses|` over the convolutions performed.
    pub mass_defect: f64,
    /// Bound on the rounding error of `delta_upper`, in delta units.
    pub discretization_slack: f64,
    /// Largest correction for mass outside a convolution window.
    pub tail_slack: f64,
    /// Maximizing case of the upper family (direction or input pair).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_case: Option<String>,
}

/// Upper bound from `upper` (rounded up) and, if given, lower estimate from
/// `lower` (rounded down), both at level `eps`.
pub fn bound_report(
    upper: &dyn GparvFamily,
    lower: Option<&dyn GparvFamily>,
    eps: f64,
    n: usize,
    step: f64,
) -> Result<BoundReport> {
    let up = family_delta(upper, eps, n, step, Rounding::Up)?;
    let low = lower.map(|f| family_delta(f, eps, n, step, Rounding::Down)).transpose()?;
    let mut mass_defect = up.bound.mass_defect;
    let mut tail_slack = up.bound.tail_slack;
    if let Some(l) = &low {
        mass_defect = mass_defect.max(l.bound.mass_defect);
        tail_slack = tail_slack.max(l.bound.tail_slack);
    }
    Ok(BoundReport {
        delta_upper: up.bound.delta,
        delta_lower: low.map(|l| l.bound.delta),
        eps,
        eps0: upper.eps0(),
        n,
        step,
        mass_defect,
        discretization_slack: up.bound.discretization_slack,
        tail_slack,
        worst_case: upper.case_label(up.case),
    })
}
