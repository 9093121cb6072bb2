//! Generalized privacy amplification random variables (GPARVs).
//!
//! For a decomposition with components `(a_j, b_j, c_j)` and leftover mass
//! `beta`, the GPARV at level `eps` takes value `(a_j - e^eps b_j) / c_j` with
//! probability `c_j` and value 0 with probability `beta`. The shuffled
//! divergence at `e^eps` is bounded by `E[(G_1 + ... + G_n)_+] / n`.

use serde::Serialize;

use crate::decomposition::{ensure_valid, simplify, CloneDecomposition};
use crate::error::{Error, Result};
use crate::probdist::{stable_sum, FiniteDist};
use crate::randomizers::{laplace01_cdf_parv, laplace01_cdf_parv_left};

/// Atoms closer than this (times `e^(eps0 + eps)`) are merged.
pub const COALESCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub value: f64,
    pub mass: f64,
}

/// Analytic laws with a continuous part. Their CDFs include any point
/// masses at the support endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum ContinuousLaw {
    /// `L / gamma` for the Laplace mechanism on inputs {0, 1}, conditioned on
    /// sampling from the blanket.
    LaplaceUpper { eps0: f64, eps: f64 },
    /// `exp(eps0 (|y - 1| - |y|)) - e^eps` with `y ~ Laplace(1, 1 / eps0)`.
    LaplaceLower { eps0: f64, eps: f64 },
}

impl ContinuousLaw {
    pub fn support(&self) -> (f64, f64) {
        match *self {
            ContinuousLaw::LaplaceUpper { eps0, eps } => {
                (1.0 - (eps0 + eps).exp(), eps0.exp() - eps.exp())
            }
            ContinuousLaw::LaplaceLower { eps0, eps } => {
                ((-eps0).exp() - eps.exp(), eps0.exp() - eps.exp())
            }
        }
    }

    /// Right-continuous CDF.
    pub fn cdf(&self, t: f64) -> f64 {
        match *self {
            ContinuousLaw::LaplaceUpper { eps0, eps } => {
                laplace01_cdf_parv(eps0, eps, (-eps0 / 2.0).exp() * t)
            }
            ContinuousLaw::LaplaceLower { eps0, eps } => {
                let (lo, hi) = self.support();
                if t < lo {
                    0.0
                } else if t < hi {
                    laplace_lower_middle(eps0, eps, t)
                } else {
                    1.0
                }
            }
        }
    }

    /// Left limit of the CDF.
    pub fn cdf_left(&self, t: f64) -> f64 {
        match *self {
            ContinuousLaw::LaplaceUpper { eps0, eps } => {
                laplace01_cdf_parv_left(eps0, eps, (-eps0 / 2.0).exp() * t)
            }
            ContinuousLaw::LaplaceLower { eps0, eps } => {
                let (lo, hi) = self.support();
                if t <= lo {
                    0.0
                } else if t <= hi {
                    laplace_lower_middle(eps0, eps, t)
                } else {
                    1.0
                }
            }
        }
    }

    /// Mean computed as `hi - integral of the CDF over [lo, hi]`.
    pub fn mean(&self) -> f64 {
        let (lo, hi) = self.support();
        let integral = match *self {
            ContinuousLaw::LaplaceUpper { eps, .. } => {
                let mid = 1.0 - eps.exp();
                let e = eps.exp();
                // antiderivatives: -sqrt(e^eps (1 - g)) and g - sqrt(g + e^eps)
                let left = (e * (1.0 - lo)).sqrt() - (e * (1.0 - mid)).sqrt();
                let right = (hi - mid) - ((hi + e).sqrt() - (mid + e).sqrt());
                left + right
            }
            ContinuousLaw::LaplaceLower { eps0, eps } => {
                let e = eps.exp();
                (hi - lo) - (-eps0 / 2.0).exp() * ((hi + e).sqrt() - (lo + e).sqrt())
            }
        };
        hi - integral
    }
}

fn laplace_lower_middle(eps0: f64, eps: f64, t: f64) -> f64 {
    1.0 - 0.5 * (-eps0 / 2.0).exp() / (t + eps.exp()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuousPart {
    #[serde(flatten)]
    pub law: ContinuousLaw,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gparv {
    /// Sorted by value, distinct values.
    pub atoms: Vec<Atom>,
    pub continuous: Option<ContinuousPart>,
    pub eps0: f64,
    pub eps: f64,
}

impl Gparv {
    /// Builds a GPARV from raw atoms, dropping zero masses and merging values
    /// within `COALESCE_TOL * e^(eps0 + eps)`.
    pub fn from_atoms(atoms: Vec<Atom>, continuous: Option<ContinuousPart>, eps0: f64, eps: f64) -> Self {
        let tol = COALESCE_TOL * (eps0 + eps).exp();
        let mut atoms: Vec<Atom> = atoms.into_iter().filter(|a| a.mass > 0.0).collect();
        atoms.sort_by(|x, y| x.value.total_cmp(&y.value));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        let mut start_value = f64::NAN;
        for atom in atoms {
            match merged.last_mut() {
                Some(last) if (atom.value - start_value).abs() <= tol => {
                    let m = last.mass + atom.mass;
                    last.value = (last.value * last.mass + atom.value * atom.mass) / m;
                    last.mass = m;
                }
                _ => {
                    start_value = atom.value;
                    merged.push(atom);
                }
            }
        }
        Self { atoms: merged, continuous, eps0, eps }
    }

    pub fn total_mass(&self) -> f64 {
        stable_sum(self.atoms.iter().map(|a| a.mass).chain(self.continuous.map(|c| c.weight)))
    }

    pub fn mean(&self) -> f64 {
        stable_sum(
            self.atoms
                .iter()
                .map(|a| a.value * a.mass)
                .chain(self.continuous.map(|c| c.weight * c.law.mean())),
        )
    }

    /// Smallest and largest value carrying mass.
    pub fn support(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for a in &self.atoms {
            lo = lo.min(a.value);
            hi = hi.max(a.value);
        }
        if let Some(c) = self.continuous.filter(|c| c.weight > 0.0) {
            let (l, h) = c.law.support();
            lo = lo.min(l);
            hi = hi.max(h);
        }
        (lo, hi)
    }

    /// Right-continuous CDF.
    pub fn cdf(&self, t: f64) -> f64 {
        let atoms = stable_sum(self.atoms.iter().filter(|a| a.value <= t).map(|a| a.mass));
        atoms + self.continuous.map_or(0.0, |c| c.weight * c.law.cdf(t))
    }

    /// Left limit of the CDF.
    pub fn cdf_left(&self, t: f64) -> f64 {
        let atoms = stable_sum(self.atoms.iter().filter(|a| a.value < t).map(|a| a.mass));
        atoms + self.continuous.map_or(0.0, |c| c.weight * c.law.cdf_left(t))
    }

    /// `|mean - (1 - e^eps)|`.
    pub fn mean_error(&self) -> f64 {
        (self.mean() - (1.0 - self.eps.exp())).abs()
    }

    /// Whether every value lies in `[1 - e^(eps0 + eps), e^eps0 - e^eps]`
    /// (with a relative slack of 1e-12).
    pub fn support_within_bound(&self) -> bool {
        let lo = 1.0 - (self.eps0 + self.eps).exp();
        let hi = self.eps0.exp() - self.eps.exp();
        let slack = 1e-12 * (self.eps0 + self.eps).exp();
        let (s_lo, s_hi) = self.support();
        s_lo >= lo - slack && s_hi <= hi + slack
    }

    pub fn has_continuous(&self) -> bool {
        self.continuous.is_some_and(|c| c.weight > 0.0)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be non-negative, got {eps}")));
    }
    Ok(())
}

/// GPARV of a clone decomposition.
pub fn gparv_upper(dec: &CloneDecomposition, eps: f64, eps0: f64, direction: Direction) -> Result<Gparv> {
    check_eps(eps)?;
    ensure_valid(dec)?;
    let e = eps.exp();
    let mut atoms = Vec::with_capacity(dec.components.len() + 1);
    for comp in &dec.components {
        let (a, b) = match direction {
            Direction::Forward => (comp.a, comp.b),
            Direction::Reverse => (comp.b, comp.a),
        };
        if comp.c > 0.0 {
            atoms.push(Atom { value: (a - e * b) / comp.c, mass: comp.c });
        } else if a > 0.0 || b > 0.0 {
            return Err(Error::DominanceViolation(format!(
                "component with c = 0 carries a = {a}, b = {b}"
            )));
        }
    }
    atoms.push(Atom { value: 0.0, mass: dec.beta });
    Ok(Gparv::from_atoms(atoms, None, eps0, eps))
}

/// Lower-bound GPARV for the neighbouring pair `(x0, x1)` when every other
/// user holds `x2`: value `(a0(y) - e^eps a1(y)) / a2(y)` with mass `a2(y)`.
pub fn gparv_lower(a0: &FiniteDist, a1: &FiniteDist, a2: &FiniteDist, eps: f64) -> Result<Gparv> {
    check_eps(eps)?;
    let m1 = a0.aligned(a1)?;
    let m2 = a0.aligned(a2)?;
    let e = eps.exp();
    let mut atoms = Vec::with_capacity(a0.len());
    let mut max_ratio = 1.0f64;
    for ((&p0, &p1), &p2) in a0.masses().iter().zip(&m1).zip(&m2) {
        if p2 > 0.0 {
            atoms.push(Atom { value: (p0 - e * p1) / p2, mass: p2 });
            max_ratio = max_ratio.max(p0 / p2).max(p1 / p2);
        } else if p0 > 0.0 || p1 > 0.0 {
            return Err(Error::DominanceViolation(format!(
                "outcome with a2 = 0 carries a0 = {p0}, a1 = {p1}"
            )));
        }
    }
    Ok(Gparv::from_atoms(atoms, None, max_ratio.ln(), eps))
}

/// Upper-bound GPARV of the Laplace mechanism on {0, 1}: `L / gamma` with
/// probability `gamma = exp(-eps0 / 2)`, otherwise 0.
pub fn gparv_laplace_upper(eps0: f64, eps: f64) -> Result<Gparv> {
    check_eps(eps)?;
    let gamma = (-eps0 / 2.0).exp();
    Ok(Gparv {
        atoms: vec![Atom { value: 0.0, mass: 1.0 - gamma }],
        continuous: Some(ContinuousPart { law: ContinuousLaw::LaplaceUpper { eps0, eps }, weight: gamma }),
        eps0,
        eps,
    })
}

/// Lower-bound GPARV of the Laplace mechanism on {0, 1} with `x0 = 0` and
/// `x1 = x2 = 1`.
pub fn gparv_laplace_lower(eps0: f64, eps: f64) -> Result<Gparv> {
    check_eps(eps)?;
    Ok(Gparv {
        atoms: Vec::new(),
        continuous: Some(ContinuousPart { law: ContinuousLaw::LaplaceLower { eps0, eps }, weight: 1.0 }),
        eps0,
        eps,
    })
}

/// GPARV of the standard clone reduction, where a user's message is a fresh
/// uniform draw with probability `e^-eps0`.
pub fn gparv_std_clone(eps0: f64, eps: f64, direction: Direction) -> Result<Gparv> {
    check_eps(eps)?;
    let e0 = eps0.exp();
    let hi = e0 / (e0 + 1.0);
    let lo = 1.0 / (e0 + 1.0);
    let a0 = [hi, lo, 0.0];
    let a1 = [lo, hi, 0.0];
    let a2 = [0.5 / e0, 0.5 / e0, 1.0 - 1.0 / e0];
    let e = eps.exp();
    let atoms = (0..3)
        .map(|j| {
            let (x, y) = match direction {
                Direction::Forward => (a0[j], a1[j]),
                Direction::Reverse => (a1[j], a0[j]),
            };
            Atom { value: (x - e * y) / a2[j], mass: a2[j] }
        })
        .collect();
    Ok(Gparv::from_atoms(atoms, None, eps0, eps))
}

/// A map from `eps` to the GPARVs whose worst case bounds the divergence.
pub trait GparvFamily: Send + Sync {
    /// Local budget used for the default lattice step.
    fn eps0(&self) -> f64;

    /// One GPARV per case that must be checked (directions, input pairs).
    fn at(&self, eps: f64) -> Result<Vec<Gparv>>;

    /// Human-readable name of case `index` (e.g. the input pair).
    fn case_label(&self, _index: usize) -> Option<String> {
        None
    }
}

/// Family built from one or more clone decompositions. Directions that are
/// mirror images of each other are evaluated once.
#[derive(Debug, Clone)]
pub struct DecompositionFamily {
    cases: Vec<(CloneDecomposition, Direction, Option<String>)>,
    eps0: f64,
}

impl DecompositionFamily {
    pub fn new(dec: &CloneDecomposition, eps0: f64) -> Result<Self> {
        ensure_valid(dec)?;
        let dec = simplify(dec)?;
        let mut cases = vec![(dec.clone(), Direction::Forward, None)];
        if !dec.is_symmetric() {
            cases.push((dec, Direction::Reverse, None));
        }
        Ok(Self { cases, eps0 })
    }

    /// Family over several labelled decompositions, each in the forward
    /// direction only (e.g. every ordered input pair of a table).
    pub fn from_cases(decs: Vec<(String, CloneDecomposition)>, eps0: f64) -> Result<Self> {
        if decs.is_empty() {
            return Err(Error::EmptyComposition);
        }
        let mut cases = Vec::with_capacity(decs.len());
        for (label, dec) in decs {
            ensure_valid(&dec)?;
            cases.push((simplify(&dec)?, Direction::Forward, Some(label)));
        }
        Ok(Self { cases, eps0 })
    }

    pub fn decompositions(&self) -> impl Iterator<Item = &CloneDecomposition> {
        self.cases.iter().map(|c| &c.0)
    }
}

impl GparvFamily for DecompositionFamily {
    fn eps0(&self) -> f64 {
        self.eps0
    }

    fn at(&self, eps: f64) -> Result<Vec<Gparv>> {
        self.cases.iter().map(|(d, dir, _)| gparv_upper(d, eps, self.eps0, *dir)).collect()
    }

    fn case_label(&self, index: usize) -> Option<String> {
        let (_, dir, label) = self.cases.get(index)?;
        match (label, dir) {
            (Some(l), _) => Some(l.clone()),
            (None, Direction::Forward) => Some("forward".into()),
            (None, Direction::Reverse) => Some("reverse".into()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LaplaceUpperFamily {
    pub eps0: f64,
}

impl GparvFamily for LaplaceUpperFamily {
    fn eps0(&self) -> f64 {
        self.eps0
    }

    fn at(&self, eps: f64) -> Result<Vec<Gparv>> {
        Ok(vec![gparv_laplace_upper(self.eps0, eps)?])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LaplaceLowerFamily {
    pub eps0: f64,
}

impl GparvFamily for LaplaceLowerFamily {
    fn eps0(&self) -> f64 {
        self.eps0
    }

    fn at(&self, eps: f64) -> Result<Vec<Gparv>> {
        Ok(vec![gparv_laplace_lower(self.eps0, eps)?])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StdCloneFamily {
    pub eps0: f64,
}

impl GparvFamily for StdCloneFamily {
    fn eps0(&self) -> f64 {
        self.eps0
    }

    fn at(&self, eps: f64) -> Result<Vec<Gparv>> {
        Ok(vec![gparv_std_clone(self.eps0, eps, Direction::Forward)?])
    }
}
