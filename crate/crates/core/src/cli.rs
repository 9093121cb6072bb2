//! Command-line surface: argument parsing, mechanism assembly from flags,
//! and JSON/CSV documents.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::amplifier::{bound_report, curve, find_eps0, find_epsilon, BoundReport, CurveRow, StepRule};
use crate::decomposition::{CloneComponent, WEIGHT_SUM_TOL};
use crate::error::{Error, Result};
use crate::gparv::Gparv;
use crate::mechanism::{subsample, Coordinate, Mechanism};
use crate::probdist::stable_sum;
use crate::randomizers::{closed_form_pqr, load_kernel, Kind, PqrGamma, RandomizerSpec};

pub const SCHEMA: &str = "shuffle-amp/1";
/// Environment variable overriding the number of worker threads.
pub const WORKERS_ENV: &str = "SHUFFLE_AMP_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "shuffle-amp", version, about = "Privacy amplification bounds for shuffled local randomizers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Upper and lower delta at a given eps.
    Bound {
        #[command(flatten)]
        mech: MechanismArgs,
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long)]
        eps: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Smallest eps whose upper bound meets the delta target.
    Epsilon {
        #[command(flatten)]
        mech: MechanismArgs,
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long, default_value_t = 1e-6)]
        delta: f64,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Largest eps0 on a grid that still achieves (eps_target, delta).
    Eps0 {
        #[command(flatten)]
        mech: MechanismArgs,
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long)]
        eps_target: f64,
        #[arg(long, default_value_t = 1e-6)]
        delta: f64,
        #[arg(long, default_value_t = 0.01)]
        eps0_grid: f64,
        #[arg(long, default_value_t = 10.0)]
        eps0_max: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Upper and lower eps for a list of eps0 values.
    Curve {
        #[command(flatten)]
        mech: MechanismArgs,
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        eps0_values: Vec<f64>,
        #[arg(long, default_value_t = 1e-6)]
        delta: f64,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        /// Skip the lower-bound column.
        #[arg(long)]
        no_lower: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Optimal clone decomposition of the mechanism.
    Decompose {
        #[command(flatten)]
        mech: MechanismArgs,
        /// Show the lower-bound triple instead.
        #[arg(long)]
        lower: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Atoms of the amplification random variable at eps.
    GparvDump {
        #[command(flatten)]
        mech: MechanismArgs,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        lower: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Debug, Args, Clone)]
pub struct MechanismArgs {
    /// krr, blh, rappor, oue, hr, laplace01 or tabular.
    #[arg(long)]
    pub randomizer: Option<String>,
    #[arg(long = "k")]
    pub k: Option<usize>,
    /// Domain size for blh, rappor, oue and hr (omit for the large-domain form).
    #[arg(long = "d")]
    pub d: Option<usize>,
    #[arg(long)]
    pub eps0: Option<f64>,
    #[arg(long)]
    pub asymptotic: bool,
    /// JSON table {"inputs": [...], "outputs": [...], "rows": [[...]]}.
    #[arg(long)]
    pub table_file: Option<PathBuf>,
    /// Joint composition of m copies, each with budget eps0 / m.
    #[arg(long)]
    pub joint: Option<usize>,
    /// Explicit joint coordinates, e.g. "krr(k=10,eps0=0.5),krr(k=10,unchanged)".
    #[arg(long)]
    pub joint_spec: Option<String>,
    /// Only the first d joint coordinates differ between neighbours.
    #[arg(long)]
    pub adjacency_hamming: Option<usize>,
    /// Parallel composition, e.g. "0.5:krr(k=10),0.5:blh" ("bot" for no output).
    #[arg(long)]
    pub parallel: Option<String>,
    /// Poisson subsampling rate wrapping the composed mechanism.
    #[arg(long)]
    pub subsample: Option<f64>,
}

#[derive(Debug, Args, Clone)]
pub struct EvalArgs {
    /// Number of users.
    #[arg(long)]
    pub n: usize,
    /// Fixed lattice step; default (e^eps0 - 1) / step_divisor.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, default_value_t = 1000.0)]
    pub step_divisor: f64,
}

impl EvalArgs {
    fn step_rule(&self) -> Result<StepRule> {
        match self.step {
            Some(l) if l > 0.0 && l.is_finite() => Ok(StepRule::Fixed(l)),
            Some(l) => Err(Error::InvalidParameter(format!("step must be positive, got {l}"))),
            None if self.step_divisor > 0.0 => Ok(StepRule::Relative(self.step_divisor)),
            None => Err(Error::InvalidParameter("step divisor must be positive".into())),
        }
    }

    fn check_n(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args, Clone)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write to this file instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// A randomizer term such as `krr(k=10,eps0=0.5)` or `bot`.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Randomizer { spec: RandomizerSpec, changed: Option<bool>, explicit_eps0: bool },
    Bot,
}

/// Splits on commas outside parentheses.
fn split_top_level(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in text.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(text[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(text[start..].trim());
    parts.into_iter().filter(|p| !p.is_empty()).collect()
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Parse(format!("bad value '{value}' for {key}")))
}

fn build_spec(kind: Kind, size_k: Option<usize>, size_d: Option<usize>, eps0: f64, asymptotic: bool) -> Result<RandomizerSpec> {
    match kind {
        Kind::Krr => RandomizerSpec::krr(
            size_k.or(size_d).ok_or_else(|| Error::InvalidParameter("krr needs k".into()))?,
            eps0,
        ),
        Kind::Blh | Kind::Rappor | Kind::Oue | Kind::Hr => match size_d.or(size_k) {
            Some(d) if !asymptotic => RandomizerSpec::new(kind, eps0, Some(d)),
            _ => RandomizerSpec::asymptotic(kind, eps0),
        },
        Kind::Laplace01 => RandomizerSpec::laplace01(eps0),
        Kind::Tabular => Err(Error::InvalidParameter("tables are given with --table-file".into())),
    }
}

/// Parses one composition term; `default_eps0` applies when the term has no
/// `eps0=` entry.
pub fn parse_term(text: &str, default_eps0: f64) -> Result<Term> {
    let text = text.trim();
    let (name, body) = match text.find('(') {
        Some(i) => {
            let body = text[i + 1..]
                .strip_suffix(')')
                .ok_or_else(|| Error::Parse(format!("unbalanced parentheses in '{text}'")))?;
            (&text[..i], body)
        }
        None => (text, ""),
    };
    if name.trim().eq_ignore_ascii_case("bot") {
        return Ok(Term::Bot);
    }
    let kind: Kind = name.trim().parse()?;
    let (mut k, mut d, mut eps0, mut asym, mut changed) = (None, None, None, false, None);
    for item in split_top_level(body) {
        match item.split_once('=') {
            Some((key, value)) => match key.trim() {
                "k" => k = Some(parse_num("k", value)?),
                "d" | "D" => d = Some(parse_num("d", value)?),
                "eps0" => eps0 = Some(parse_num("eps0", value)?),
                other => return Err(Error::Parse(format!("unknown key '{other}' in '{text}'"))),
            },
            None => match item {
                "asymptotic" => asym = true,
                "unchanged" => changed = Some(false),
                "changed" => changed = Some(true),
                other => return Err(Error::Parse(format!("unknown flag '{other}' in '{text}'"))),
            },
        }
    }
    let spec = build_spec(kind, k, d, eps0.unwrap_or(default_eps0), asym)?;
    Ok(Term::Randomizer { spec, changed, explicit_eps0: eps0.is_some() })
}

/// Parses `"w1:term1,w2:term2,..."`; weights must sum to 1 within 1e-9.
pub fn parse_parallel_spec(text: &str, default_eps0: f64) -> Result<Vec<(f64, Mechanism)>> {
    let mut entries = Vec::new();
    for part in split_top_level(text) {
        let (w, term) = part
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("expected weight:randomizer, got '{part}'")))?;
        let w: f64 = parse_num("weight", w)?;
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::InvalidWeight(format!("weight {w} is negative or not finite")));
        }
        let mech = match parse_term(term, default_eps0)? {
            Term::Bot => Mechanism::Bot,
            Term::Randomizer { spec, .. } => Mechanism::Randomizer(spec),
        };
        entries.push((w, mech));
    }
    if entries.is_empty() {
        return Err(Error::EmptyComposition);
    }
    let total = stable_sum(entries.iter().map(|(w, _)| *w));
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InvalidWeight(format!("weights sum to {total}, expected 1")));
    }
    Ok(entries)
}

impl MechanismArgs {
    fn is_table(&self) -> bool {
        self.table_file.is_some()
            || self.randomizer.as_deref().is_some_and(|r| matches!(r.parse(), Ok(Kind::Tabular)))
    }

    fn hamming_changed(&self, index: usize, count: usize) -> Result<bool> {
        match self.adjacency_hamming {
            Some(d) if d == 0 || d > count => Err(Error::InvalidParameter(format!(
                "adjacency-hamming must be in 1..={count}, got {d}"
            ))),
            Some(d) => Ok(index < d),
            None => Ok(true),
        }
    }

    /// Mechanism with total budget `eps0` (or `--eps0` when `None`).
    pub fn build(&self, eps0: Option<f64>) -> Result<Mechanism> {
        let composite = [self.joint.is_some(), self.joint_spec.is_some(), self.parallel.is_some()]
            .iter()
            .filter(|b| **b)
            .count();
        if composite > 1 {
            return Err(Error::InvalidParameter(
                "--joint, --joint-spec and --parallel are mutually exclusive".into(),
            ));
        }
        if self.adjacency_hamming.is_some() && self.joint.is_none() && self.joint_spec.is_none() {
            return Err(Error::InvalidParameter("--adjacency-hamming needs a joint composition".into()));
        }
        let base = if self.is_table() {
            if composite > 0 {
                return Err(Error::InvalidParameter("tables cannot be composed from the command line".into()));
            }
            let path = self
                .table_file
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("tabular randomizer needs --table-file".into()))?;
            let kernel = load_kernel(path)?;
            if eps0.is_some() {
                return Err(Error::UnsupportedKind("a table has a fixed budget; eps0 cannot be varied".into()));
            }
            let eps0 = self.eps0.unwrap_or_else(|| kernel.max_log_ratio());
            Mechanism::Randomizer(RandomizerSpec::tabular(kernel, eps0)?)
        } else {
            let eps0 = eps0
                .or(self.eps0)
                .ok_or_else(|| Error::InvalidParameter("--eps0 is required".into()))?;
            if let Some(text) = &self.parallel {
                Mechanism::Parallel(parse_parallel_spec(text, eps0)?)
            } else if let Some(text) = &self.joint_spec {
                let parts = split_top_level(text);
                let m = parts.len();
                if m == 0 {
                    return Err(Error::EmptyComposition);
                }
                let mut coords = Vec::with_capacity(m);
                for (i, part) in parts.iter().enumerate() {
                    match parse_term(part, eps0 / m as f64)? {
                        Term::Bot => return Err(Error::Parse("bot is not a joint coordinate".into())),
                        Term::Randomizer { spec, changed, .. } => {
                            let changed = match changed {
                                Some(c) => c,
                                None => self.hamming_changed(i, m)?,
                            };
                            coords.push(Coordinate { spec, changed });
                        }
                    }
                }
                Mechanism::Joint(coords)
            } else {
                let kind: Kind = self
                    .randomizer
                    .as_deref()
                    .ok_or_else(|| Error::InvalidParameter("--randomizer is required".into()))?
                    .parse()?;
                match self.joint {
                    Some(0) => return Err(Error::InvalidParameter("--joint needs m >= 1".into())),
                    Some(m) => {
                        let spec = build_spec(kind, self.k, self.d, eps0 / m as f64, self.asymptotic)?;
                        let coords = (0..m)
                            .map(|i| Ok(Coordinate { spec: spec.clone(), changed: self.hamming_changed(i, m)? }))
                            .collect::<Result<Vec<_>>>()?;
                        Mechanism::Joint(coords)
                    }
                    None => Mechanism::Randomizer(build_spec(kind, self.k, self.d, eps0, self.asymptotic)?),
                }
            }
        };
        match self.subsample {
            Some(p) => subsample(base, p),
            None => Ok(base),
        }
    }
}

#[derive(Serialize)]
struct Document<T: Serialize> {
    schema: &'static str,
    command: &'static str,
    #[serde(flatten)]
    body: T,
}

#[derive(Serialize)]
struct BoundDoc {
    mechanism: String,
    #[serde(flatten)]
    report: BoundReport,
}

#[derive(Serialize)]
struct EpsilonDoc {
    mechanism: String,
    eps: f64,
    delta_target: f64,
    report: BoundReport,
}

#[derive(Serialize)]
struct Eps0Doc {
    mechanism: String,
    eps0: f64,
    eps_target: f64,
    delta_target: f64,
    eps0_grid: f64,
    report: BoundReport,
}

#[derive(Serialize)]
struct CurveDoc {
    mechanism: String,
    rows: Vec<CurveRow>,
}

#[derive(Serialize)]
struct DecomposeDoc {
    mechanism: String,
    components: Vec<CloneComponent>,
    beta: f64,
    gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pqr: Option<PqrGamma>,
}

#[derive(Serialize)]
struct GparvCase {
    label: Option<String>,
    gparv: Gparv,
}

#[derive(Serialize)]
struct GparvDoc {
    mechanism: String,
    bound: &'static str,
    eps: f64,
    cases: Vec<GparvCase>,
}

fn json<T: Serialize>(command: &'static str, body: T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Document { schema: SCHEMA, command, body })?;
    s.push('\n');
    Ok(s)
}

fn csv_rows<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// Header of the curve CSV.
pub const CURVE_HEADER: &str = "eps0,n,eps_upper,eps_lower,delta_target,grid_step";

/// Curve rows as CSV with header [`CURVE_HEADER`]; a missing lower value is
/// an empty field.
pub fn curve_csv(rows: &[CurveRow]) -> Result<String> {
    if rows.is_empty() {
        return Ok(format!("{CURVE_HEADER}\n"));
    }
    csv_rows(rows)
}

/// Parses CSV produced by [`curve_csv`].
pub fn parse_curve_csv(text: &str) -> Result<Vec<CurveRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| Error::Parse(e.to_string()))?.iter().collect::<Vec<_>>().join(",");
    if header != CURVE_HEADER {
        return Err(Error::Parse(format!("unexpected header '{header}'")));
    }
    r.deserialize().map(|row| row.map_err(|e| Error::Parse(e.to_string()))).collect()
}

fn require_json(out: &OutputArgs, command: &str) -> Result<()> {
    if out.format == Format::Csv {
        return Err(Error::InvalidParameter(format!("{command} supports only JSON output")));
    }
    Ok(())
}

/// Executes a parsed command and returns the document to emit.
pub fn execute(command: &Command) -> Result<String> {
    match command {
        Command::Bound { mech, eval, eps, out } => {
            eval.check_n()?;
            let m = mech.build(None)?;
            let step = eval.step_rule()?.step(m.eps0());
            let upper = m.upper_family()?;
            let lower = m.lower_family()?;
            let report = bound_report(upper.as_ref(), Some(lower.as_ref()), *eps, eval.n, step)?;
            match out.format {
                Format::Json => json("bound", BoundDoc { mechanism: m.to_string(), report }),
                Format::Csv => {
                    #[derive(Serialize)]
                    struct Row {
                        eps0: f64,
                        n: usize,
                        eps: f64,
                        delta_upper: f64,
                        delta_lower: Option<f64>,
                        step: f64,
                        mass_defect: f64,
                        discretization_slack: f64,
                        tail_slack: f64,
                    }
                    csv_rows(&[Row {
                        eps0: report.eps0,
                        n: report.n,
                        eps: report.eps,
                        delta_upper: report.delta_upper,
                        delta_lower: report.delta_lower,
                        step: report.step,
                        mass_defect: report.mass_defect,
                        discretization_slack: report.discretization_slack,
                        tail_slack: report.tail_slack,
                    }])
                }
            }
        }
        Command::Epsilon { mech, eval, delta, tol, out } => {
            require_json(out, "epsilon")?;
            eval.check_n()?;
            let m = mech.build(None)?;
            let step = eval.step_rule()?.step(m.eps0());
            let upper = m.upper_family()?;
            let eps = find_epsilon(upper.as_ref(), eval.n, *delta, step, *tol)?;
            let lower = m.lower_family()?;
            let report = bound_report(upper.as_ref(), Some(lower.as_ref()), eps, eval.n, step)?;
            json("epsilon", EpsilonDoc { mechanism: m.to_string(), eps, delta_target: *delta, report })
        }
        Command::Eps0 { mech, eval, eps_target, delta, eps0_grid, eps0_max, out } => {
            require_json(out, "eps0")?;
            eval.check_n()?;
            let rule = eval.step_rule()?;
            let builder = |e: f64| mech.build(Some(e))?.upper_family();
            let eps0 = find_eps0(&builder, eval.n, *delta, *eps_target, *eps0_grid, rule, *eps0_max)?;
            let m = mech.build(Some(eps0))?;
            let upper = m.upper_family()?;
            let lower = m.lower_family()?;
            let report = bound_report(upper.as_ref(), Some(lower.as_ref()), *eps_target, eval.n, rule.step(eps0))?;
            json(
                "eps0",
                Eps0Doc {
                    mechanism: m.to_string(),
                    eps0,
                    eps_target: *eps_target,
                    delta_target: *delta,
                    eps0_grid: *eps0_grid,
                    report,
                },
            )
        }
        Command::Curve { mech, eval, eps0_values, delta, tol, no_lower, out } => {
            eval.check_n()?;
            let rule = eval.step_rule()?;
            let upper = |e: f64| mech.build(Some(e))?.upper_family();
            let lower = |e: f64| mech.build(Some(e))?.lower_family();
            let lower_ref: Option<&crate::amplifier::FamilyBuilder<'_>> =
                if *no_lower { None } else { Some(&lower) };
            let rows = curve(&upper, lower_ref, eval.n, *delta, eps0_values, rule, *tol)?;
            match out.format {
                Format::Csv => curve_csv(&rows),
                Format::Json => {
                    let mechanism = mech.build(Some(eps0_values[0]))?.to_string();
                    json("curve", CurveDoc { mechanism, rows })
                }
            }
        }
        Command::Decompose { mech, lower, out } => {
            require_json(out, "decompose")?;
            let m = mech.build(None)?;
            let dec = if *lower { m.lower_decomposition()? } else { m.upper_decomposition()? };
            let pqr = match (&m, lower) {
                (Mechanism::Randomizer(s), false) if s.kind.has_closed_form() => Some(closed_form_pqr(s)?),
                _ => None,
            };
            let gamma = dec.gamma();
            json(
                "decompose",
                DecomposeDoc { mechanism: m.to_string(), components: dec.components, beta: dec.beta, gamma, pqr },
            )
        }
        Command::GparvDump { mech, eps, lower, out } => {
            require_json(out, "gparv-dump")?;
            let m = mech.build(None)?;
            let family = if *lower { m.lower_family()? } else { m.upper_family()? };
            let cases = family
                .at(*eps)?
                .into_iter()
                .enumerate()
                .map(|(i, gparv)| GparvCase { label: family.case_label(i), gparv })
                .collect();
            json(
                "gparv-dump",
                GparvDoc {
                    mechanism: m.to_string(),
                    bound: if *lower { "lower" } else { "upper" },
                    eps: *eps,
                    cases,
                },
            )
        }
    }
}

fn output_of(command: &Command) -> &OutputArgs {
    match command {
        Command::Bound { out, .. }
        | Command::Epsilon { out, .. }
        | Command::Eps0 { out, .. }
        | Command::Curve { out, .. }
        | Command::Decompose { out, .. }
        | Command::GparvDump { out, .. } => out,
    }
}

/// Sizes the global worker pool from [`WORKERS_ENV`], if set.
pub fn configure_workers() -> Result<()> {
    if let Ok(value) = std::env::var(WORKERS_ENV) {
        let threads: usize = value
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("{WORKERS_ENV} must be a positive integer")))?;
        if threads == 0 {
            return Err(Error::InvalidParameter(format!("{WORKERS_ENV} must be positive")));
        }
        // a pool configured earlier in the process stays in place
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    Ok(())
}

/// Runs the command and writes its document to the requested destination.
pub fn run(cli: &Cli) -> Result<()> {
    configure_workers()?;
    let doc = execute(&cli.command)?;
    match &output_of(&cli.command).output {
        Some(path) => std::fs::write(path, doc)?,
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(doc.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

/// Process exit status for an error: 3 for resource limits, 2 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_resource() {
        3
    } else {
        2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_spec_parsing() {
        let two = parse_parallel_spec("0.5:krr(k=10),0.5:blh", 1.0).unwrap();
        assert_eq!(two.len(), 2);
        assert!(matches!(&two[1].1, Mechanism::Randomizer(s) if s.kind == Kind::Blh && s.uses_asymptotic()));
        let sub = parse_parallel_spec("0.8:krr(k=10),0.2:bot", 1.0).unwrap();
        assert_eq!(sub[1].1, Mechanism::Bot);
        assert!(matches!(
            parse_parallel_spec("0.7:krr(k=10),0.7:blh", 1.0),
            Err(Error::InvalidWeight(_))
        ));
    }

    #[test]
    fn term_parsing() {
        let t = parse_term("krr(k=10,eps0=0.5,unchanged)", 2.0).unwrap();
        match t {
            Term::Randomizer { spec, changed, explicit_eps0 } => {
                assert_eq!(spec.eps0, 0.5);
                assert_eq!(spec.size, Some(10));
                assert_eq!(changed, Some(false));
                assert!(explicit_eps0);
            }
            Term::Bot => panic!(),
        }
        assert!(parse_term("krr(k=10", 1.0).is_err());
        assert!(parse_term("nope", 1.0).is_err());
        assert!(parse_term("rappor(d=4,color=3)", 1.0).is_err());
    }

    #[test]
    fn curve_csv_round_trip() {
        let rows = vec![
            CurveRow { eps0: 0.5, n: 1000, eps_upper: 0.0312, eps_lower: Some(0.0301), delta_target: 1e-6, grid_step: 0.000648721270700128 },
            CurveRow { eps0: 1.0, n: 1000, eps_upper: 0.1, eps_lower: None, delta_target: 1e-6, grid_step: 0.0017182818284590451 },
        ];
        let text = curve_csv(&rows).unwrap();
        assert!(text.starts_with(CURVE_HEADER));
        assert_eq!(parse_curve_csv(&text).unwrap(), rows);
    }
}
