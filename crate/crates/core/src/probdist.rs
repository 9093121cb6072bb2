//! Finite probability distributions over opaque labels, and conditional
//! kernels (one row per input) used to describe local randomizers.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a [`FiniteDist`].
pub const MASS_TOL: f64 = 1e-12;

/// Opaque outcome or input label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Int(i64),
    Text(String),
    Tuple(Vec<Label>),
}

impl Label {
    pub fn pair(a: Label, b: Label) -> Label {
        Label::Tuple(vec![a, b])
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Int(v) => write!(f, "{v}"),
            Label::Text(s) => write!(f, "{s}"),
            Label::Tuple(items) => {
                write!(f, "(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl From<i64> for Label {
    fn from(v: i64) -> Self {
        Label::Int(v)
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::Text(s.to_string())
    }
}

/// Compensated (Neumaier) summation.
pub fn stable_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn check_masses(masses: &[f64], tol: f64) -> Result<()> {
    if let Some(m) = masses.iter().find(|m| !m.is_finite() || **m < 0.0) {
        return Err(Error::InvalidDistribution(format!("mass {m} is negative or not finite")));
    }
    let total = stable_sum(masses.iter().copied());
    if (total - 1.0).abs() > tol {
        return Err(Error::InvalidDistribution(format!(
            "masses sum to {total}, expected 1 within {tol:e}"
        )));
    }
    Ok(())
}

fn check_distinct(labels: &[Label]) -> Result<()> {
    let mut seen = HashSet::with_capacity(labels.len());
    for l in labels {
        if !seen.insert(l) {
            return Err(Error::InvalidDistribution(format!("duplicate label {l}")));
        }
    }
    Ok(())
}

/// Probability mass function over labeled outcomes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteDist {
    outcomes: Vec<Label>,
    masses: Vec<f64>,
}

impl FiniteDist {
    pub fn new(outcomes: Vec<Label>, masses: Vec<f64>) -> Result<Self> {
        if outcomes.len() != masses.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} outcomes but {} masses",
                outcomes.len(),
                masses.len()
            )));
        }
        check_masses(&masses, MASS_TOL)?;
        check_distinct(&outcomes)?;
        Ok(Self { outcomes, masses })
    }

    /// Distribution over integer labels `0..masses.len()`.
    pub fn from_masses(masses: Vec<f64>) -> Result<Self> {
        let outcomes = (0..masses.len() as i64).map(Label::Int).collect();
        Self::new(outcomes, masses)
    }

    pub fn point(label: Label) -> Self {
        Self { outcomes: vec![label], masses: vec![1.0] }
    }

    pub fn outcomes(&self) -> &[Label] {
        &self.outcomes
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn mass_of(&self, label: &Label) -> f64 {
        self.outcomes
            .iter()
            .position(|l| l == label)
            .map_or(0.0, |i| self.masses[i])
    }

    /// Masses of `other` re-indexed to follow this distribution's outcome order.
    /// Fails unless both distributions have the same outcome set.
    pub fn aligned(&self, other: &FiniteDist) -> Result<Vec<f64>> {
        if self.outcomes == other.outcomes {
            return Ok(other.masses.clone());
        }
        if self.len() != other.len() {
            return Err(Error::DomainMismatch(format!(
                "{} outcomes vs {} outcomes",
                self.len(),
                other.len()
            )));
        }
        let index: HashMap<&Label, usize> =
            other.outcomes.iter().enumerate().map(|(i, l)| (l, i)).collect();
        self.outcomes
            .iter()
            .map(|l| {
                index
                    .get(l)
                    .map(|&i| other.masses[i])
                    .ok_or_else(|| Error::DomainMismatch(format!("outcome {l} missing")))
            })
            .collect()
    }
}

/// Hockey-stick divergence: sum over outcomes of max(0, p(y) - alpha q(y)).
pub fn hockey_stick(p: &FiniteDist, q: &FiniteDist, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let qm = p.aligned(q)?;
    let d = stable_sum(p.masses.iter().zip(&qm).map(|(&a, &b)| (a - alpha * b).max(0.0)));
    Ok(d.clamp(0.0, 1.0))
}

/// Pointwise weighted sum of distributions. Outcomes absent from a part
/// count as mass 0; the result lists outcomes in first-seen order.
pub fn mixture(parts: &[(f64, FiniteDist)]) -> Result<FiniteDist> {
    if parts.is_empty() {
        return Err(Error::EmptyComposition);
    }
    if let Some((w, _)) = parts.iter().find(|(w, _)| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidWeight(format!("weight {w} is negative or not finite")));
    }
    let total = stable_sum(parts.iter().map(|(w, _)| *w));
    if (total - 1.0).abs() > MASS_TOL {
        return Err(Error::InvalidWeight(format!("weights sum to {total}, expected 1")));
    }
    let mut index: HashMap<Label, usize> = HashMap::new();
    let mut outcomes = Vec::new();
    let mut masses: Vec<f64> = Vec::new();
    for (w, dist) in parts {
        for (label, m) in dist.outcomes.iter().zip(&dist.masses) {
            let i = *index.entry(label.clone()).or_insert_with(|| {
                outcomes.push(label.clone());
                masses.push(0.0);
                outcomes.len() - 1
            });
            masses[i] += w * m;
        }
    }
    FiniteDist::new(outcomes, masses)
}

/// Product distribution over pair labels `(a, b)`.
pub fn product(p: &FiniteDist, q: &FiniteDist) -> FiniteDist {
    let mut outcomes = Vec::with_capacity(p.len() * q.len());
    let mut masses = Vec::with_capacity(p.len() * q.len());
    for (a, pa) in p.outcomes.iter().zip(&p.masses) {
        for (b, qb) in q.outcomes.iter().zip(&q.masses) {
            outcomes.push(Label::pair(a.clone(), b.clone()));
            masses.push(pa * qb);
        }
    }
    FiniteDist { outcomes, masses }
}

/// Conditional law of a local randomizer: one probability row per input,
/// all rows over the same ordered output set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Kernel {
    inputs: Vec<Label>,
    outputs: Vec<Label>,
    rows: Vec<Vec<f64>>,
}

impl Kernel {
    /// Builds a kernel, requiring every row to sum to 1 within `tol`.
    pub fn with_tolerance(
        inputs: Vec<Label>,
        outputs: Vec<Label>,
        rows: Vec<Vec<f64>>,
        tol: f64,
    ) -> Result<Self> {
        if inputs.is_empty() || outputs.is_empty() {
            return Err(Error::InvalidDistribution("kernel needs inputs and outputs".into()));
        }
        if rows.len() != inputs.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} inputs but {} rows",
                inputs.len(),
                rows.len()
            )));
        }
        check_distinct(&inputs)?;
        check_distinct(&outputs)?;
        for (x, row) in inputs.iter().zip(&rows) {
            if row.len() != outputs.len() {
                return Err(Error::InvalidDistribution(format!(
                    "row {x} has {} entries, expected {}",
                    row.len(),
                    outputs.len()
                )));
            }
            check_masses(row, tol)
                .map_err(|e| Error::InvalidDistribution(format!("row {x}: {e}")))?;
        }
        Ok(Self { inputs, outputs, rows })
    }

    pub fn new(inputs: Vec<Label>, outputs: Vec<Label>, rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_tolerance(inputs, outputs, rows, MASS_TOL)
    }

    pub fn inputs(&self) -> &[Label] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Label] {
        &self.outputs
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn input_index(&self, x: &Label) -> Result<usize> {
        self.inputs
            .iter()
            .position(|l| l == x)
            .ok_or_else(|| Error::UnknownLabel(x.to_string()))
    }

    pub fn row_masses(&self, x: &Label) -> Result<&[f64]> {
        Ok(&self.rows[self.input_index(x)?])
    }

    pub fn row(&self, x: &Label) -> Result<FiniteDist> {
        let i = self.input_index(x)?;
        Ok(FiniteDist { outcomes: self.outputs.clone(), masses: self.rows[i].clone() })
    }

    /// Per-output minimum over all inputs.
    pub fn column_min(&self) -> Vec<f64> {
        let mut min = self.rows[0].clone();
        for row in &self.rows[1..] {
            for (m, v) in min.iter_mut().zip(row) {
                *m = m.min(*v);
            }
        }
        min
    }

    /// Largest log ratio R(x)(y) / R(x')(y) over all outputs and input pairs;
    /// infinite if some output has zero mass under one input only.
    pub fn max_log_ratio(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.outputs.len() {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for row in &self.rows {
                lo = lo.min(row[j]);
                hi = hi.max(row[j]);
            }
            if hi == 0.0 {
                continue;
            }
            if lo == 0.0 {
                return f64::INFINITY;
            }
            worst = worst.max((hi / lo).ln());
        }
        worst
    }

    /// Kernel of independent products: input (x, x'), output (y, y').
    pub fn product(&self, other: &Kernel) -> Kernel {
        let mut inputs = Vec::new();
        let mut rows = Vec::new();
        for (x, r) in self.inputs.iter().zip(&self.rows) {
            for (x2, r2) in other.inputs.iter().zip(&other.rows) {
                inputs.push(Label::pair(x.clone(), x2.clone()));
                rows.push(r.iter().flat_map(|a| r2.iter().map(move |b| a * b)).collect());
            }
        }
        let outputs = self
            .outputs
            .iter()
            .flat_map(|y| other.outputs.iter().map(move |y2| Label::pair(y.clone(), y2.clone())))
            .collect();
        Kernel { inputs, outputs, rows }
    }
}
