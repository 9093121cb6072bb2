//! Catalog of local randomizers: k-ary randomized response, binary local
//! hashing, RAPPOR, optimized unary encoding, Hadamard response, the Laplace
//! mechanism on {0, 1}, and user-supplied tables.
//!
//! Catalog entries carry closed-form `(p, q, r)` parameters of their
//! five-component optimal decomposition. Explicit tables are available for
//! small domains and serve as oracles for the closed forms.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probdist::{FiniteDist, Kernel, Label};

/// Largest output space for which explicit tables are built.
pub const MAX_TABLE_OUTPUTS: usize = 1 << 20;
/// Largest number of table entries (inputs times outputs).
pub const MAX_TABLE_ENTRIES: usize = 1 << 26;
/// Row-sum tolerance for tables loaded from JSON.
pub const LOAD_ROW_TOL: f64 = 1e-9;
/// Relative slack on the LDP ratio check of supplied tables.
pub const LDP_RATIO_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Kind {
    Krr,
    Blh,
    Rappor,
    Oue,
    Hr,
    Laplace01,
    Tabular,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Krr => "krr",
            Kind::Blh => "blh",
            Kind::Rappor => "rappor",
            Kind::Oue => "oue",
            Kind::Hr => "hr",
            Kind::Laplace01 => "laplace01",
            Kind::Tabular => "tabular",
        }
    }

    pub fn has_closed_form(self) -> bool {
        matches!(self, Kind::Krr | Kind::Blh | Kind::Rappor | Kind::Oue | Kind::Hr)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "krr" | "k-rr" | "rr" => Ok(Kind::Krr),
            "blh" => Ok(Kind::Blh),
            "rappor" => Ok(Kind::Rappor),
            "oue" => Ok(Kind::Oue),
            "hr" => Ok(Kind::Hr),
            "laplace01" | "laplace" => Ok(Kind::Laplace01),
            "tabular" | "table" => Ok(Kind::Tabular),
            other => Err(Error::UnsupportedKind(format!("unknown randomizer kind '{other}'"))),
        }
    }
}

/// A local randomizer with its privacy budget.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizerSpec {
    pub kind: Kind,
    /// Local budget in nats.
    pub eps0: f64,
    /// `k` for KRR, domain size `D` for BLH, RAPPOR, OUE and HR.
    pub size: Option<usize>,
    /// Use the large-domain limit of the closed forms even if `size` is set.
    pub asymptotic: bool,
    pub table: Option<Arc<Kernel>>,
}

impl RandomizerSpec {
    pub fn new(kind: Kind, eps0: f64, size: Option<usize>) -> Result<Self> {
        let spec = Self { kind, eps0, size, asymptotic: false, table: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn krr(k: usize, eps0: f64) -> Result<Self> {
        Self::new(Kind::Krr, eps0, Some(k))
    }

    pub fn blh(d: usize, eps0: f64) -> Result<Self> {
        Self::new(Kind::Blh, eps0, Some(d))
    }

    pub fn rappor(d: usize, eps0: f64) -> Result<Self> {
        Self::new(Kind::Rappor, eps0, Some(d))
    }

    pub fn oue(d: usize, eps0: f64) -> Result<Self> {
        Self::new(Kind::Oue, eps0, Some(d))
    }

    pub fn hr(d: usize, eps0: f64) -> Result<Self> {
        Self::new(Kind::Hr, eps0, Some(d))
    }

    pub fn laplace01(eps0: f64) -> Result<Self> {
        Self::new(Kind::Laplace01, eps0, None)
    }

    /// Large-domain form of BLH, RAPPOR, OUE or HR.
    pub fn asymptotic(kind: Kind, eps0: f64) -> Result<Self> {
        let spec = Self { kind, eps0, size: None, asymptotic: true, table: None };
        spec.validate()?;
        Ok(spec)
    }

    /// Wraps a user-supplied kernel after checking it is `eps0`-LDP.
    pub fn tabular(kernel: Kernel, eps0: f64) -> Result<Self> {
        let spec = Self {
            kind: Kind::Tabular,
            eps0,
            size: None,
            asymptotic: false,
            table: Some(Arc::new(kernel)),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Same randomizer at a different budget. Not available for tables.
    pub fn with_eps0(&self, eps0: f64) -> Result<Self> {
        if self.kind == Kind::Tabular {
            return Err(Error::UnsupportedKind("a table has a fixed budget".into()));
        }
        let spec = Self { eps0, ..self.clone() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn uses_asymptotic(&self) -> bool {
        self.asymptotic || self.size.is_none()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps0 must be positive, got {}", self.eps0)));
        }
        match self.kind {
            Kind::Krr => match self.size {
                Some(k) if k >= 2 => Ok(()),
                _ => Err(Error::InvalidParameter("KRR needs k >= 2".into())),
            },
            Kind::Blh | Kind::Rappor | Kind::Oue => match self.size {
                Some(d) if d < 2 => Err(Error::InvalidParameter(format!("{} needs D >= 2", self.kind))),
                Some(_) => Ok(()),
                None if self.asymptotic => Ok(()),
                None => Err(Error::InvalidParameter(format!("{} needs D or the asymptotic flag", self.kind))),
            },
            Kind::Hr => match self.size {
                Some(d) if d < 2 || !d.is_power_of_two() => {
                    Err(Error::InvalidParameter(format!("HR needs D a power of two >= 2, got {d}")))
                }
                Some(_) => Ok(()),
                None if self.asymptotic => Ok(()),
                None => Err(Error::InvalidParameter("HR needs D or the asymptotic flag".into())),
            },
            Kind::Laplace01 => Ok(()),
            Kind::Tabular => {
                let table = self
                    .table
                    .as_ref()
                    .ok_or_else(|| Error::InvalidParameter("TABULAR needs a table".into()))?;
                check_ldp(table, self.eps0)
            }
        }
    }
}

impl fmt::Display for RandomizerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.kind)?;
        match (self.kind, self.size) {
            (Kind::Krr, Some(k)) => write!(f, "k={k},")?,
            (_, Some(d)) if !self.asymptotic => write!(f, "d={d},")?,
            _ => {}
        }
        write!(f, "eps0={})", self.eps0)
    }
}

/// Fails unless every ratio R(x)(y) / R(x')(y) is at most e^eps0 (with a
/// relative slack of [`LDP_RATIO_SLACK`]).
pub fn check_ldp(kernel: &Kernel, eps0: f64) -> Result<()> {
    let bound = eps0.exp() * (1.0 + LDP_RATIO_SLACK);
    for (j, y) in kernel.outputs().iter().enumerate() {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for row in kernel.rows() {
            lo = lo.min(row[j]);
            hi = hi.max(row[j]);
        }
        if hi > 0.0 && hi > bound * lo {
            return Err(Error::LdpViolation(format!(
                "output {y}: ratio {} exceeds e^{eps0}",
                if lo == 0.0 { f64::INFINITY } else { hi / lo }
            )));
        }
    }
    Ok(())
}

#[derive(Deserialize)]
struct KernelDocument {
    inputs: Vec<Label>,
    outputs: Vec<Label>,
    rows: Vec<Vec<f64>>,
}

/// Parses `{"inputs": [...], "outputs": [...], "rows": [[...], ...]}`.
/// Rows must sum to 1 within 1e-9 and are then renormalized exactly.
pub fn kernel_from_json(text: &str) -> Result<Kernel> {
    let doc: KernelDocument = serde_json::from_str(text)?;
    let checked = Kernel::with_tolerance(doc.inputs, doc.outputs, doc.rows, LOAD_ROW_TOL)?;
    let rows = checked
        .rows()
        .iter()
        .map(|row| {
            let s: f64 = crate::probdist::stable_sum(row.iter().copied());
            row.iter().map(|v| v / s).collect()
        })
        .collect();
    Kernel::with_tolerance(checked.inputs().to_vec(), checked.outputs().to_vec(), rows, 1e-12)
}

pub fn load_kernel(path: &Path) -> Result<Kernel> {
    kernel_from_json(&std::fs::read_to_string(path)?)
}

/// Masses `(p, q, r)` of the five-component decomposition and the total
/// variation similarity `gamma = 2p + q + r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PqrGamma {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub gamma: f64,
    pub beta: f64,
}

impl PqrGamma {
    pub fn new(p: f64, q: f64, r: f64) -> Result<Self> {
        let gamma = 2.0 * p + q + r;
        let beta = 1.0 - gamma;
        let tol = 1e-12;
        if p < -tol || q < -tol || r < -tol || beta < -tol {
            return Err(Error::InvalidDecomposition(format!(
                "(p, q, r) = ({p}, {q}, {r}) is not a valid five-component parameter set"
            )));
        }
        Ok(Self { p: p.max(0.0), q: q.max(0.0), r: r.max(0.0), gamma, beta: beta.max(0.0) })
    }
}

/// Closed-form `(p, q, r)` of the simplified optimal decomposition.
pub fn closed_form_pqr(spec: &RandomizerSpec) -> Result<PqrGamma> {
    let e = spec.eps0.exp();
    let asym = spec.uses_asymptotic();
    let half = 1.0 / (2.0 * (e + 1.0));
    match spec.kind {
        Kind::Krr => {
            let k = spec.size.expect("validated") as f64;
            PqrGamma::new(1.0 / (e + k - 1.0), 0.0, (k - 2.0) / (e + k - 1.0))
        }
        Kind::Blh => {
            if asym {
                return PqrGamma::new(half, half, half);
            }
            let t = 2f64.powi(spec.size.expect("validated") as i32 - 1) * (e + 1.0);
            PqrGamma::new(half, half - 1.0 / t, half + e / t)
        }
        Kind::Rappor => {
            let s = (spec.eps0 / 2.0).exp();
            let p = 1.0 / ((s + 1.0) * (s + 1.0));
            if asym {
                return PqrGamma::new(p, p / s, p * s);
            }
            let tail = (s + 1.0).powi(-(spec.size.expect("validated") as i32));
            PqrGamma::new(p, (p - tail) / s, s * (p + tail))
        }
        Kind::Oue => {
            if asym {
                return PqrGamma::new(half, half / e, half * e);
            }
            let tail = 1.0 / (2.0 * (e + 1.0).powi(spec.size.expect("validated") as i32 - 1));
            PqrGamma::new(half, (half - tail) / e, half * e + tail)
        }
        Kind::Hr => {
            if asym {
                return PqrGamma::new(half, half, half);
            }
            // Output index 0 has H(x, 0) = 1 for every input, so it falls in
            // the (1, 1) ratio class, not in the (e, e) one.
            let d = spec.size.expect("validated") as f64;
            PqrGamma::new(half, half - 2.0 / (d * (e + 1.0)), half + 2.0 * e / (d * (e + 1.0)))
        }
        Kind::Laplace01 | Kind::Tabular => Err(Error::UnsupportedKind(format!(
            "{} has no five-component closed form",
            spec.kind
        ))),
    }
}

fn int_labels(range: std::ops::Range<usize>) -> Vec<Label> {
    range.map(|i| Label::Int(i as i64)).collect()
}

fn check_size(kind: Kind, inputs: usize, outputs: usize) -> Result<()> {
    if outputs > MAX_TABLE_OUTPUTS || inputs.saturating_mul(outputs) > MAX_TABLE_ENTRIES {
        return Err(Error::SizeLimit(format!(
            "{kind} table with {inputs} inputs and {outputs} outputs exceeds the table size limit"
        )));
    }
    Ok(())
}

fn output_count(kind: Kind, d: usize) -> Option<usize> {
    let pow = |bits: usize| if bits < usize::BITS as usize - 1 { Some(1usize << bits) } else { None };
    match kind {
        Kind::Blh => pow(d + 1),
        Kind::Rappor | Kind::Oue => pow(d),
        _ => Some(d),
    }
}

/// Explicit probability table of a catalog randomizer (or the supplied table).
pub fn build_table(spec: &RandomizerSpec) -> Result<Kernel> {
    spec.validate()?;
    if spec.kind == Kind::Tabular {
        return Ok(spec.table.as_ref().expect("validated").as_ref().clone());
    }
    if spec.kind == Kind::Laplace01 {
        return Err(Error::UnsupportedKind("laplace01 has a continuous output space".into()));
    }
    let d = spec
        .size
        .ok_or_else(|| Error::InvalidParameter(format!("{} table needs an explicit size", spec.kind)))?;
    let inputs = if spec.kind == Kind::Hr { d - 1 } else { d };
    let outputs = output_count(spec.kind, d).ok_or_else(|| {
        Error::SizeLimit(format!("{} output space for D = {d} is too large", spec.kind))
    })?;
    check_size(spec.kind, inputs, outputs)?;
    let eps0 = spec.eps0;
    let e = eps0.exp();
    let (ins, outs, rows) = match spec.kind {
        Kind::Krr => {
            let z = e + d as f64 - 1.0;
            let rows = (0..d)
                .map(|x| (0..d).map(|y| if x == y { e / z } else { 1.0 / z }).collect())
                .collect();
            (int_labels(0..d), int_labels(0..d), rows)
        }
        Kind::Blh => {
            let hashes = 1usize << d;
            let w = 1.0 / hashes as f64;
            let outs = (0..hashes)
                .flat_map(|h| (0..2).map(move |b| Label::pair(Label::Int(h as i64), Label::Int(b))))
                .collect();
            let rows = (0..d)
                .map(|x| {
                    (0..hashes)
                        .flat_map(|h| {
                            let hx = (h >> x) & 1;
                            (0..2).map(move |b| if b == hx { w * e / (e + 1.0) } else { w / (e + 1.0) })
                        })
                        .collect()
                })
                .collect();
            (int_labels(0..d), outs, rows)
        }
        Kind::Rappor => {
            let half = eps0 / 2.0;
            let log_z = d as f64 * (1.0 + half.exp()).ln();
            let rows = (0..d)
                .map(|x| {
                    (0..outputs)
                        .map(|y| {
                            let dist = (y ^ (1usize << x)).count_ones() as f64;
                            ((d as f64 - dist) * half - log_z).exp()
                        })
                        .collect()
                })
                .collect();
            (int_labels(0..d), int_labels(0..outputs), rows)
        }
        Kind::Oue => {
            let p1 = 1.0 / (1.0 + e);
            let rows = (0..d)
                .map(|x| {
                    (0..outputs)
                        .map(|y| {
                            let others = y & !(1usize << x);
                            let ones = others.count_ones() as i32;
                            let zeros = d as i32 - 1 - ones;
                            0.5 * p1.powi(ones) * (e * p1).powi(zeros)
                        })
                        .collect()
                })
                .collect();
            (int_labels(0..d), int_labels(0..outputs), rows)
        }
        Kind::Hr => {
            let rows = (1..d)
                .map(|x| {
                    let w: Vec<f64> = (0..d)
                        .map(|y| {
                            let sign = if (x & y).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                            (sign * eps0 / 2.0).exp()
                        })
                        .collect();
                    let z: f64 = w.iter().sum();
                    w.into_iter().map(|v| v / z).collect()
                })
                .collect();
            (int_labels(1..d), int_labels(0..d), rows)
        }
        Kind::Laplace01 | Kind::Tabular => unreachable!(),
    };
    Kernel::with_tolerance(ins, outs, rows, 1e-12)
}

/// Three output laws `(R(x0), R(x1), R(x2))` for the lower bound in which
/// the other users all hold `x2`. Uses distinct inputs when the domain has
/// at least three elements and `x2 = x1` otherwise.
///
/// For BLH, RAPPOR and OUE the resulting law does not depend on `D` once
/// `D >= 3`, so the three-element table stands in for larger or asymptotic
/// domains; HR uses `D = 8` in the same way (`D = 4` is taken as is).
pub fn lower_triple(spec: &RandomizerSpec) -> Result<[FiniteDist; 3]> {
    spec.validate()?;
    match spec.kind {
        Kind::Krr => {
            let k = spec.size.expect("validated");
            let e = spec.eps0.exp();
            let p = 1.0 / (e + k as f64 - 1.0);
            if k == 2 {
                let a0 = FiniteDist::from_masses(vec![e * p, p])?;
                let a1 = FiniteDist::from_masses(vec![p, e * p])?;
                return Ok([a0, a1.clone(), a1]);
            }
            // outcome classes: x0, x1, x2, all others
            let rest = (k - 3) as f64 * p;
            let rows = [[e * p, p, p, rest], [p, e * p, p, rest], [p, p, e * p, rest]];
            let keep = if k == 3 { 3 } else { 4 };
            let mk = |r: &[f64; 4]| FiniteDist::from_masses(r[..keep].to_vec());
            Ok([mk(&rows[0])?, mk(&rows[1])?, mk(&rows[2])?])
        }
        Kind::Blh | Kind::Rappor | Kind::Oue | Kind::Hr => {
            let rep = match (spec.kind, spec.size) {
                (Kind::Hr, Some(4)) => 4,
                (Kind::Hr, _) => 8,
                (_, Some(2)) => 2,
                _ => 3,
            };
            let small = RandomizerSpec { size: Some(rep), asymptotic: false, ..spec.clone() };
            triple_from_kernel(&build_table(&small)?)
        }
        Kind::Tabular => triple_from_kernel(spec.table.as_ref().expect("validated")),
        Kind::Laplace01 => Err(Error::UnsupportedKind(
            "laplace01 lower bound is analytic, not a finite triple".into(),
        )),
    }
}

/// Rows of the first, second and third kernel inputs (the second again if
/// only two inputs exist).
pub fn triple_from_kernel(kernel: &Kernel) -> Result<[FiniteDist; 3]> {
    let ins = kernel.inputs();
    if ins.len() < 2 {
        return Err(Error::InvalidParameter(
            "lower bound needs at least two distinct inputs".into(),
        ));
    }
    let x2 = if ins.len() >= 3 { &ins[2] } else { &ins[1] };
    Ok([kernel.row(&ins[0])?, kernel.row(&ins[1])?, kernel.row(x2)?])
}

/// CDF of the privacy amplification variable `L` of the Laplace mechanism
/// restricted to inputs {0, 1}, with `gamma = exp(-eps0 / 2)`.
pub fn laplace01_cdf_parv(eps0: f64, eps: f64, t: f64) -> f64 {
    let gamma = (-eps0 / 2.0).exp();
    let lo = gamma * (1.0 - (eps0 + eps).exp());
    let mid = gamma * (1.0 - eps.exp());
    let hi = gamma * (eps0.exp() - eps.exp());
    let s = (eps0 / 2.0).exp();
    if t < lo {
        0.0
    } else if t < mid {
        0.5 * (eps.exp() / (1.0 - s * t)).sqrt()
    } else if t < hi {
        1.0 - 0.5 / (s * t + eps.exp()).sqrt()
    } else {
        1.0
    }
}

/// Left limit of [`laplace01_cdf_parv`] at `t`.
pub fn laplace01_cdf_parv_left(eps0: f64, eps: f64, t: f64) -> f64 {
    let gamma = (-eps0 / 2.0).exp();
    let lo = gamma * (1.0 - (eps0 + eps).exp());
    let mid = gamma * (1.0 - eps.exp());
    let hi = gamma * (eps0.exp() - eps.exp());
    let s = (eps0 / 2.0).exp();
    if t <= lo {
        0.0
    } else if t <= mid {
        0.5 * (eps.exp() / (1.0 - s * t)).sqrt()
    } else if t <= hi {
        1.0 - 0.5 / (s * t + eps.exp()).sqrt()
    } else {
        1.0
    }
}
