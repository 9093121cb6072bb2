//! General-clone decompositions.
//!
//! A decomposition describes `R(x0)`, `R(x1)` and the part shared by every
//! `R(x)` over common components: component `j` carries mass `a_j` under
//! `R(x0)`, `b_j` under `R(x1)` and `c_j` in the shared part, and `beta` is
//! the leftover mass outside the shared part.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::probdist::{stable_sum, FiniteDist, Kernel, Label};
use crate::randomizers::PqrGamma;

/// Tolerance of [`validate`].
pub const VALIDATE_TOL: f64 = 1e-10;
/// Relative tolerance under which two ratio pairs are merged.
pub const RATIO_MERGE_TOL: f64 = 1e-9;
/// Tolerance on composition weights summing to 1.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CloneComponent {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Ratio pair `(a / c, b / c)` after merging.
    #[serde(skip)]
    pub tag: Option<(f64, f64)>,
}

impl CloneComponent {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c, tag: None }
    }

    pub fn ratios(&self) -> Option<(f64, f64)> {
        (self.c > 0.0).then(|| (self.a / self.c, self.b / self.c))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CloneDecomposition {
    pub components: Vec<CloneComponent>,
    pub beta: f64,
}

impl CloneDecomposition {
    pub fn new(components: Vec<CloneComponent>, beta: f64) -> Self {
        Self { components, beta }
    }

    /// Decomposition of a mechanism with a constant output.
    pub fn bot() -> Self {
        Self::new(vec![CloneComponent::new(1.0, 1.0, 1.0)], 0.0)
    }

    /// Shared mass `sum c_j = 1 - beta`.
    pub fn gamma(&self) -> f64 {
        stable_sum(self.components.iter().map(|c| c.c))
    }

    /// Same decomposition with the roles of `x0` and `x1` exchanged.
    pub fn swapped(&self) -> Self {
        let components = self
            .components
            .iter()
            .map(|c| CloneComponent { a: c.b, b: c.a, c: c.c, tag: c.tag.map(|(r0, r1)| (r1, r0)) })
            .collect();
        Self::new(components, self.beta)
    }

    /// True when swapping `x0` and `x1` yields the same merged decomposition.
    pub fn is_symmetric(&self) -> bool {
        match (simplify(self), simplify(&self.swapped())) {
            (Ok(a), Ok(b)) => approx_equal(&a, &b, 1e-12),
            _ => false,
        }
    }

    /// Per-outcome components `(a0(y), a1(y), a2(y))` with no leftover mass.
    /// Used for lower bounds where every other user holds the input of `a2`.
    pub fn from_triple(a0: &FiniteDist, a1: &FiniteDist, a2: &FiniteDist) -> Result<Self> {
        let m1 = a0.aligned(a1)?;
        let m2 = a0.aligned(a2)?;
        let components = a0
            .masses()
            .iter()
            .zip(m1.iter().zip(&m2))
            .filter(|(a, (b, c))| **a > 0.0 || **b > 0.0 || **c > 0.0)
            .map(|(&a, (&b, &c))| CloneComponent::new(a, b, c))
            .collect();
        Ok(Self::new(components, 0.0))
    }
}

/// Componentwise comparison of two canonically ordered decompositions.
pub fn approx_equal(x: &CloneDecomposition, y: &CloneDecomposition, tol: f64) -> bool {
    x.components.len() == y.components.len()
        && (x.beta - y.beta).abs() <= tol
        && x.components.iter().zip(&y.components).all(|(p, q)| {
            (p.a - q.a).abs() <= tol && (p.b - q.b).abs() <= tol && (p.c - q.c).abs() <= tol
        })
}

/// Invariant violations found by [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub sum_a_deficit: f64,
    pub sum_b_deficit: f64,
    pub sum_c_beta_deficit: f64,
    pub violations: Vec<String>,
}

impl Diagnostics {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `sum a = sum b = beta + sum c = 1`, `beta >= 0` and non-negative
/// finite masses, all within [`VALIDATE_TOL`].
pub fn validate(dec: &CloneDecomposition) -> Diagnostics {
    let sa = stable_sum(dec.components.iter().map(|c| c.a));
    let sb = stable_sum(dec.components.iter().map(|c| c.b));
    let sc = stable_sum(dec.components.iter().map(|c| c.c)) + dec.beta;
    let mut violations = Vec::new();
    for (name, s) in [("sum a", sa), ("sum b", sb), ("beta + sum c", sc)] {
        if !((s - 1.0).abs() <= VALIDATE_TOL) {
            violations.push(format!("{name} = {s}, deficit {}", 1.0 - s));
        }
    }
    if !(dec.beta >= -VALIDATE_TOL) {
        violations.push(format!("beta = {} is negative", dec.beta));
    }
    for (j, c) in dec.components.iter().enumerate() {
        for (name, v) in [("a", c.a), ("b", c.b), ("c", c.c)] {
            if !(v.is_finite() && v >= -VALIDATE_TOL) {
                violations.push(format!("component {j}: {name} = {v}"));
            }
        }
    }
    Diagnostics {
        sum_a_deficit: 1.0 - sa,
        sum_b_deficit: 1.0 - sb,
        sum_c_beta_deficit: 1.0 - sc,
        violations,
    }
}

pub(crate) fn ensure_valid(dec: &CloneDecomposition) -> Result<()> {
    let d = validate(dec);
    if d.passed() {
        Ok(())
    } else {
        Err(Error::InvalidDecomposition(d.violations.join("; ")))
    }
}

fn optimal_components(kernel: &Kernel, i0: usize, i1: usize) -> CloneDecomposition {
    let min = kernel.column_min();
    let (r0, r1) = (&kernel.rows()[i0], &kernel.rows()[i1]);
    let components = (0..min.len())
        .filter(|&j| r0[j] > 0.0 || r1[j] > 0.0 || min[j] > 0.0)
        .map(|j| CloneComponent::new(r0[j], r1[j], min[j]))
        .collect();
    let beta = (1.0 - stable_sum(min.iter().copied())).max(0.0);
    CloneDecomposition::new(components, beta)
}

/// One component per output with `a = R(x0)(y)`, `b = R(x1)(y)` and
/// `c = min_x R(x)(y)`.
pub fn primary_optimal(kernel: &Kernel, x0: &Label, x1: &Label) -> Result<CloneDecomposition> {
    let i0 = kernel.input_index(x0)?;
    let i1 = kernel.input_index(x1)?;
    if i0 == i1 {
        return Err(Error::InvalidParameter(format!(
            "the two inputs must differ (got {x0} twice); use primary_optimal_unchanged"
        )));
    }
    Ok(optimal_components(kernel, i0, i1))
}

/// Decomposition for a coordinate whose input is the same in both
/// neighbouring datasets (`a = b = R(x)(y)`).
pub fn primary_optimal_unchanged(kernel: &Kernel, x: &Label) -> Result<CloneDecomposition> {
    let i = kernel.input_index(x)?;
    Ok(optimal_components(kernel, i, i))
}

fn same_ratio(x: f64, y: f64) -> bool {
    (x - y).abs() <= RATIO_MERGE_TOL * x.abs().max(y.abs())
}

fn cluster_by<T>(items: &mut [T], key: impl Fn(&T) -> f64) -> Vec<std::ops::Range<usize>> {
    items.sort_by(|p, q| key(p).total_cmp(&key(q)));
    let mut ranges = Vec::new();
    let mut start = 0;
    for i in 1..=items.len() {
        if i == items.len() || !same_ratio(key(&items[start]), key(&items[i])) {
            ranges.push(start..i);
            start = i;
        }
    }
    ranges
}

/// Merges components sharing the ratio pair `(a / c, b / c)` (relative
/// tolerance [`RATIO_MERGE_TOL`]) and orders the result by ratio pair.
/// Empty components are dropped; `beta` is unchanged.
pub fn simplify(dec: &CloneDecomposition) -> Result<CloneDecomposition> {
    let mut keyed: Vec<(f64, f64, &CloneComponent)> = Vec::with_capacity(dec.components.len());
    for comp in &dec.components {
        if comp.c > 0.0 {
            keyed.push((comp.a / comp.c, comp.b / comp.c, comp));
        } else if comp.a > 0.0 || comp.b > 0.0 {
            return Err(Error::NotBlanketDecomposition(format!(
                "component with c = 0 has a = {}, b = {}",
                comp.a, comp.b
            )));
        }
    }
    let mut merged = Vec::new();
    for outer in cluster_by(&mut keyed, |k| k.0) {
        let group = &mut keyed[outer];
        for inner in cluster_by(group, |k| k.1) {
            let members = &group[inner];
            let a = stable_sum(members.iter().map(|m| m.2.a));
            let b = stable_sum(members.iter().map(|m| m.2.b));
            let c = stable_sum(members.iter().map(|m| m.2.c));
            merged.push(CloneComponent { a, b, c, tag: Some((a / c, b / c)) });
        }
    }
    // ratios equal within the merge tolerance compare equal, so roundoff
    // cannot reorder otherwise identical decompositions
    let cmp = |x: f64, y: f64| {
        if same_ratio(x, y) {
            std::cmp::Ordering::Equal
        } else {
            x.total_cmp(&y)
        }
    };
    merged.sort_by(|p, q| {
        let (x, y) = (p.tag.unwrap(), q.tag.unwrap());
        cmp(x.0, y.0).then(cmp(x.1, y.1))
    });
    Ok(CloneDecomposition::new(merged, dec.beta))
}

/// The five-component form `[(e p, p, p), (p, e p, p), (e q, e q, q),
/// (r, r, r)]` with `e = exp(eps0)` and `beta = 1 - 2p - q - r`.
pub fn five_component(pqr: &PqrGamma, eps0: f64) -> CloneDecomposition {
    let e = eps0.exp();
    let (p, q, r) = (pqr.p, pqr.q, pqr.r);
    let components = [(e * p, p, p), (p, e * p, p), (e * q, e * q, q), (r, r, r)]
        .into_iter()
        .filter(|&(_, _, c)| c > 0.0)
        .map(|(a, b, c)| CloneComponent { a, b, c, tag: Some((a / c, b / c)) })
        .collect();
    let mut dec = CloneDecomposition::new(components, pqr.beta);
    dec.components.sort_by(|x, y| {
        let (s, t) = (x.tag.unwrap(), y.tag.unwrap());
        s.0.total_cmp(&t.0).then(s.1.total_cmp(&t.1))
    });
    dec
}

/// Decomposition of a five-component randomizer whose input is unchanged:
/// `[(e(p+q), e(p+q), p+q), (p+r, p+r, p+r)]`, same `beta`.
pub fn five_component_unchanged(pqr: &PqrGamma, eps0: f64) -> CloneDecomposition {
    let e = eps0.exp();
    let (hi, lo) = (pqr.p + pqr.q, pqr.p + pqr.r);
    let components = [(lo, 1.0), (hi, e)]
        .into_iter()
        .filter(|&(c, _)| c > 0.0)
        .map(|(c, ratio)| CloneComponent { a: ratio * c, b: ratio * c, c, tag: Some((ratio, ratio)) })
        .collect();
    CloneDecomposition::new(components, pqr.beta)
}

fn joint_pair(x: &CloneDecomposition, y: &CloneDecomposition) -> Result<CloneDecomposition> {
    let mut components = Vec::with_capacity(x.components.len() * y.components.len());
    for u in &x.components {
        for v in &y.components {
            components.push(CloneComponent::new(u.a * v.a, u.b * v.b, u.c * v.c));
        }
    }
    let beta = (1.0 - x.gamma() * y.gamma()).max(0.0);
    simplify(&CloneDecomposition::new(components, beta))
}

/// Cartesian-product composition of per-coordinate decompositions, merged
/// after each pairwise product.
pub fn joint(decs: &[CloneDecomposition]) -> Result<CloneDecomposition> {
    let (first, rest) = decs.split_first().ok_or(Error::EmptyComposition)?;
    let mut acc = first.clone();
    for d in rest {
        acc = joint_pair(&acc, d)?;
    }
    Ok(acc)
}

/// Weighted combination: union of components scaled by their weight,
/// `beta = sum p_i beta_i`, then merged.
pub fn parallel(weighted: &[(f64, CloneDecomposition)]) -> Result<CloneDecomposition> {
    if weighted.is_empty() {
        return Err(Error::EmptyComposition);
    }
    if let Some((w, _)) = weighted.iter().find(|(w, _)| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidWeight(format!("weight {w} is negative or not finite")));
    }
    let total = stable_sum(weighted.iter().map(|(w, _)| *w));
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InvalidWeight(format!("weights sum to {total}, expected 1")));
    }
    let mut components = Vec::new();
    for (w, d) in weighted {
        if *w == 0.0 {
            continue;
        }
        components.extend(d.components.iter().map(|c| CloneComponent::new(w * c.a, w * c.b, w * c.c)));
    }
    let beta = stable_sum(weighted.iter().map(|(w, d)| w * d.beta));
    simplify(&CloneDecomposition::new(components, beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomizers::{build_table, closed_form_pqr, RandomizerSpec};

    fn krr_dec(k: usize, eps0: f64) -> CloneDecomposition {
        let t = build_table(&RandomizerSpec::krr(k, eps0).unwrap()).unwrap();
        primary_optimal(&t, &0.into(), &1.into()).unwrap()
    }

    #[test]
    fn krr3_primary_optimal() {
        let eps0 = 0.9f64;
        let e = eps0.exp();
        let d = krr_dec(3, eps0);
        assert_eq!(d.components.len(), 3);
        for c in &d.components {
            assert!((c.c - 1.0 / (e + 2.0)).abs() < 1e-15);
        }
        assert!((d.beta - (e - 1.0) / (e + 2.0)).abs() < 1e-15);
        assert!(validate(&d).passed());
    }

    #[test]
    fn constant_kernel_has_no_leftover() {
        let k = Kernel::new(
            vec![0.into(), 1.into()],
            vec![0.into(), 1.into(), 2.into()],
            vec![vec![0.2, 0.3, 0.5], vec![0.2, 0.3, 0.5]],
        )
        .unwrap();
        let d = primary_optimal(&k, &0.into(), &1.into()).unwrap();
        assert!(d.beta.abs() < 1e-15);
        assert!(d.components.iter().all(|c| c.a == c.b && c.b == c.c));
    }

    #[test]
    fn krr10_simplifies_to_three_components() {
        let eps0 = 1.3f64;
        let e = eps0.exp();
        let s = simplify(&krr_dec(10, eps0)).unwrap();
        let tags: Vec<(f64, f64)> = s.components.iter().map(|c| c.tag.unwrap()).collect();
        assert_eq!(tags.len(), 3);
        assert!((tags[0].0 - 1.0).abs() < 1e-12 && (tags[0].1 - 1.0).abs() < 1e-12);
        assert!((tags[1].0 - 1.0).abs() < 1e-12 && (tags[1].1 - e).abs() < 1e-12);
        assert!((tags[2].0 - e).abs() < 1e-12 && (tags[2].1 - 1.0).abs() < 1e-12);
        let five = five_component(&closed_form_pqr(&RandomizerSpec::krr(10, eps0).unwrap()).unwrap(), eps0);
        assert!(approx_equal(&s, &five, 1e-14));
        assert!(approx_equal(&simplify(&s).unwrap(), &s, 0.0));
    }

    #[test]
    fn simplify_rejects_unshared_mass() {
        let d = CloneDecomposition::new(vec![CloneComponent::new(1.0, 0.0, 0.0), CloneComponent::new(0.0, 1.0, 1.0)], 0.0);
        assert!(matches!(simplify(&d), Err(Error::NotBlanketDecomposition(_))));
    }

    #[test]
    fn validate_reports_deficit() {
        let d = CloneDecomposition::new(vec![CloneComponent::new(0.9, 1.0, 1.0)], 0.0);
        let diag = validate(&d);
        assert!(!diag.passed());
        assert!((diag.sum_a_deficit - 0.1).abs() < 1e-15);
    }

    #[test]
    fn two_joint_krr_masses() {
        // each coordinate: (e p, p, p), (p, e p, p), (r, r, r) at eps0 / 2
        let eps0 = 1.0f64;
        let spec = RandomizerSpec::krr(4, eps0 / 2.0).unwrap();
        let pqr = closed_form_pqr(&spec).unwrap();
        let one = five_component(&pqr, eps0 / 2.0);
        let two = joint(&[one.clone(), one.clone()]).unwrap();
        assert!(validate(&two).passed());
        assert!((1.0 - two.beta - pqr.gamma * pqr.gamma).abs() < 1e-15);
        let e = (eps0 / 2.0).exp();
        // ratio (e^2, 1) carries c = p^2
        let top = two.components.iter().find(|c| {
            let (r0, r1) = c.tag.unwrap();
            (r0 - e * e).abs() < 1e-9 && (r1 - 1.0).abs() < 1e-9
        });
        assert!((top.unwrap().c - pqr.p * pqr.p).abs() < 1e-15);
        // ratio (e, e) collects (e p, p) x (p, e p) in both orders: c = 2 p^2
        let mid = two.components.iter().find(|c| {
            let (r0, r1) = c.tag.unwrap();
            (r0 - e).abs() < 1e-9 && (r1 - e).abs() < 1e-9
        });
        assert!((mid.unwrap().c - 2.0 * pqr.p * pqr.p).abs() < 1e-15);
        assert!(approx_equal(&joint(&[one.clone()]).unwrap(), &one, 0.0));
        assert!(matches!(joint(&[]), Err(Error::EmptyComposition)));
    }

    #[test]
    fn subsampling_scales_leftover() {
        let eps0 = 2.0;
        let d = simplify(&krr_dec(10, eps0)).unwrap();
        let sub = parallel(&[(0.3, d.clone()), (0.7, CloneDecomposition::bot())]).unwrap();
        assert!((sub.beta - 0.3 * d.beta).abs() < 1e-15);
        assert!(validate(&sub).passed());
        let first = parallel(&[(1.0, d.clone()), (0.0, CloneDecomposition::bot())]).unwrap();
        assert!(approx_equal(&first, &d, 1e-15));
        assert!(matches!(
            parallel(&[(0.7, d.clone()), (0.7, d)]),
            Err(Error::InvalidWeight(_))
        ));
    }

    #[test]
    fn unchanged_coordinate_matches_table() {
        let eps0 = 0.6;
        let spec = RandomizerSpec::rappor(3, eps0).unwrap();
        let t = build_table(&spec).unwrap();
        let from_table = simplify(&primary_optimal_unchanged(&t, &0.into()).unwrap()).unwrap();
        let closed = five_component_unchanged(&closed_form_pqr(&spec).unwrap(), eps0);
        assert!(approx_equal(&from_table, &closed, 1e-14));
    }

    #[test]
    fn symmetric_detection() {
        assert!(krr_dec(5, 1.0).is_symmetric());
        let k = Kernel::new(
            vec![0.into(), 1.into()],
            vec![0.into(), 1.into(), 2.into()],
            vec![vec![0.5, 0.3, 0.2], vec![0.25, 0.35, 0.4]],
        )
        .unwrap();
        assert!(!primary_optimal(&k, &0.into(), &1.into()).unwrap().is_symmetric());
    }
}
