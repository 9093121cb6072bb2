//! Composed mechanisms (joint, parallel, subsampled) and the GPARV families
//! that bound them.

use std::fmt;

use crate::decomposition::{
    five_component, five_component_unchanged, joint, parallel, primary_optimal, primary_optimal_unchanged,
    simplify, CloneDecomposition,
};
use crate::error::{Error, Result};
use crate::gparv::{DecompositionFamily, GparvFamily, LaplaceLowerFamily, LaplaceUpperFamily, StdCloneFamily};
use crate::randomizers::{closed_form_pqr, lower_triple, Kind, RandomizerSpec};

/// One coordinate of a joint composition.
#[derive(Debug, Clone, PartialEq)]
pub struct Coordinate {
    pub spec: RandomizerSpec,
    /// Whether the coordinate differs between the neighbouring inputs.
    pub changed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mechanism {
    Randomizer(RandomizerSpec),
    /// Constant output.
    Bot,
    Joint(Vec<Coordinate>),
    /// Each user runs entry `i` with probability `p_i`; outputs are tagged.
    Parallel(Vec<(f64, Mechanism)>),
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mechanism::Randomizer(s) => write!(f, "{s}"),
            Mechanism::Bot => write!(f, "bot"),
            Mechanism::Joint(coords) => {
                write!(f, "joint[")?;
                for (i, c) in coords.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}{}", c.spec, if c.changed { "" } else { "~unchanged" })?;
                }
                write!(f, "]")
            }
            Mechanism::Parallel(entries) => {
                write!(f, "parallel[")?;
                for (i, (w, m)) in entries.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{w}:{m}")?;
                }
                write!(f, "]")
            }
        }
    }
}

/// Poisson subsampling with rate `p` as a parallel composition with `Bot`.
pub fn subsample(inner: Mechanism, p: f64) -> Result<Mechanism> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidWeight(format!("subsampling rate {p} is not in [0, 1]")));
    }
    Ok(Mechanism::Parallel(vec![(p, inner), (1.0 - p, Mechanism::Bot)]))
}

fn spec_decomposition(spec: &RandomizerSpec, changed: bool) -> Result<CloneDecomposition> {
    if spec.kind.has_closed_form() {
        let pqr = closed_form_pqr(spec)?;
        return Ok(if changed {
            five_component(&pqr, spec.eps0)
        } else {
            five_component_unchanged(&pqr, spec.eps0)
        });
    }
    match spec.kind {
        Kind::Tabular => {
            let table = spec.table.as_ref().expect("validated");
            let ins = table.inputs();
            let dec = if !changed {
                primary_optimal_unchanged(table, &ins[0])?
            } else if ins.len() >= 2 {
                primary_optimal(table, &ins[0], &ins[1])?
            } else {
                return Err(Error::InvalidParameter("table needs two inputs".into()));
            };
            simplify(&dec)
        }
        _ => Err(Error::UnsupportedKind(format!(
            "{} has no finite decomposition; it is only supported on its own",
            spec.kind
        ))),
    }
}

fn spec_lower(spec: &RandomizerSpec, changed: bool) -> Result<CloneDecomposition> {
    let [a0, a1, a2] = lower_triple(spec)?;
    let first = if changed { &a1 } else { &a0 };
    simplify(&CloneDecomposition::from_triple(&a0, first, &a2)?)
}

impl Mechanism {
    /// Local budget bounding every privacy-loss ratio of the mechanism.
    pub fn eps0(&self) -> f64 {
        match self {
            Mechanism::Randomizer(s) => s.eps0,
            Mechanism::Bot => 0.0,
            Mechanism::Joint(coords) => coords.iter().filter(|c| c.changed).map(|c| c.spec.eps0).sum(),
            Mechanism::Parallel(entries) => entries
                .iter()
                .filter(|(w, _)| *w > 0.0)
                .map(|(_, m)| m.eps0())
                .fold(0.0, f64::max),
        }
    }

    pub fn is_laplace(&self) -> bool {
        matches!(self, Mechanism::Randomizer(s) if s.kind == Kind::Laplace01)
    }

    /// Optimal decomposition for the neighbouring pair (first two inputs of
    /// a table, or any pair for symmetric catalog randomizers).
    pub fn upper_decomposition(&self) -> Result<CloneDecomposition> {
        match self {
            Mechanism::Randomizer(s) => spec_decomposition(s, true),
            Mechanism::Bot => Ok(CloneDecomposition::bot()),
            Mechanism::Joint(coords) => {
                let decs = coords
                    .iter()
                    .map(|c| spec_decomposition(&c.spec, c.changed))
                    .collect::<Result<Vec<_>>>()?;
                joint(&decs)
            }
            Mechanism::Parallel(entries) => {
                let decs = entries
                    .iter()
                    .map(|(w, m)| Ok((*w, m.upper_decomposition()?)))
                    .collect::<Result<Vec<_>>>()?;
                parallel(&decs)
            }
        }
    }

    /// Lower-bound triple `(R(x0), R(x1), R(x2))` expressed as a
    /// decomposition with `c = R(x2)` and no leftover mass.
    pub fn lower_decomposition(&self) -> Result<CloneDecomposition> {
        match self {
            Mechanism::Randomizer(s) => spec_lower(s, true),
            Mechanism::Bot => Ok(CloneDecomposition::bot()),
            Mechanism::Joint(coords) => {
                let decs = coords
                    .iter()
                    .map(|c| spec_lower(&c.spec, c.changed))
                    .collect::<Result<Vec<_>>>()?;
                joint(&decs)
            }
            Mechanism::Parallel(entries) => {
                let decs = entries
                    .iter()
                    .map(|(w, m)| Ok((*w, m.lower_decomposition()?)))
                    .collect::<Result<Vec<_>>>()?;
                parallel(&decs)
            }
        }
    }

    /// Family whose worst case upper-bounds the shuffled divergence. A single
    /// table is swept over all ordered input pairs.
    pub fn upper_family(&self) -> Result<Box<dyn GparvFamily>> {
        match self {
            Mechanism::Randomizer(s) if s.kind == Kind::Laplace01 => {
                Ok(Box::new(LaplaceUpperFamily { eps0: s.eps0 }))
            }
            Mechanism::Randomizer(s) if s.kind == Kind::Tabular => Ok(Box::new(table_pair_family(s)?)),
            _ => Ok(Box::new(DecompositionFamily::new(&self.upper_decomposition()?, self.eps0())?)),
        }
    }

    pub fn lower_family(&self) -> Result<Box<dyn GparvFamily>> {
        if let Mechanism::Randomizer(s) = self {
            if s.kind == Kind::Laplace01 {
                return Ok(Box::new(LaplaceLowerFamily { eps0: s.eps0 }));
            }
        }
        Ok(Box::new(DecompositionFamily::new(&self.lower_decomposition()?, self.eps0())?))
    }

    /// Standard clone reduction at the same budget, for comparison.
    pub fn std_clone_family(&self) -> Box<dyn GparvFamily> {
        Box::new(StdCloneFamily { eps0: self.eps0() })
    }
}

/// Every ordered pair of distinct inputs of a table, with identical
/// decompositions evaluated once.
pub fn table_pair_family(spec: &RandomizerSpec) -> Result<DecompositionFamily> {
    let table = spec
        .table
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("TABULAR needs a table".into()))?;
    let ins = table.inputs();
    if ins.len() < 2 {
        return Err(Error::InvalidParameter("table needs two inputs".into()));
    }
    let mut cases: Vec<(String, CloneDecomposition)> = Vec::new();
    for x0 in ins {
        for x1 in ins {
            if x0 == x1 {
                continue;
            }
            let dec = simplify(&primary_optimal(table, x0, x1)?)?;
            if !cases.iter().any(|(_, d)| crate::decomposition::approx_equal(d, &dec, 1e-15)) {
                cases.push((format!("({x0},{x1})"), dec));
            }
        }
    }
    DecompositionFamily::from_cases(cases, spec.eps0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::{approx_equal, validate};

    #[test]
    fn subsampled_krr() {
        let m = subsample(Mechanism::Randomizer(RandomizerSpec::krr(10, 1.0).unwrap()), 0.8).unwrap();
        let d = m.upper_decomposition().unwrap();
        let inner = Mechanism::Randomizer(RandomizerSpec::krr(10, 1.0).unwrap()).upper_decomposition().unwrap();
        assert!((d.beta - 0.8 * inner.beta).abs() < 1e-15);
        assert!(validate(&m.lower_decomposition().unwrap()).passed());
        assert_eq!(m.eps0(), 1.0);
    }

    #[test]
    fn all_unchanged_joint_has_no_privacy_loss() {
        let spec = RandomizerSpec::krr(4, 0.5).unwrap();
        let m = Mechanism::Joint(vec![
            Coordinate { spec: spec.clone(), changed: false },
            Coordinate { spec, changed: false },
        ]);
        let d = m.upper_decomposition().unwrap();
        assert!(d.components.iter().all(|c| (c.a - c.b).abs() < 1e-15));
        assert_eq!(m.eps0(), 0.0);
    }

    #[test]
    fn laplace_is_standalone_only() {
        let lap = RandomizerSpec::laplace01(1.0).unwrap();
        assert!(Mechanism::Randomizer(lap.clone()).upper_family().is_ok());
        let j = Mechanism::Joint(vec![Coordinate { spec: lap, changed: true }]);
        assert!(matches!(j.upper_decomposition(), Err(Error::UnsupportedKind(_))));
    }

    #[test]
    fn table_sweep_dedupes_symmetric_pairs() {
        let spec = RandomizerSpec::krr(4, 1.0).unwrap();
        let table = crate::randomizers::build_table(&spec).unwrap();
        let tab = RandomizerSpec::tabular(table, 1.0).unwrap();
        let fam = table_pair_family(&tab).unwrap();
        assert_eq!(fam.decompositions().count(), 1);
        let closed = Mechanism::Randomizer(spec).upper_decomposition().unwrap();
        assert!(approx_equal(fam.decompositions().next().unwrap(), &closed, 1e-14));
    }
}
