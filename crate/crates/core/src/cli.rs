//! Command-line front end.
//!
//! Exit codes: 0 success or passed check, 1 failed check (or a form that is
//! not symplectic), 2 usage or input error, 3 numerical abort.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::catalog::{self, SystemDefinition};
use crate::expr::Polynomial;
use crate::integrate::{format_value, integrate, Method, StepperConfig, Trajectory};
use crate::poisson::{
    check_casimir, involution_check, jacobi_check, schouten_self_bracket, CheckReport,
    PoissonError, PoissonSystem,
};
use crate::symplin::{darboux_basis_with_tol, darboux_residual, SymplecticFormMatrix};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

const BUILTIN_PREFIX: &str = "builtin:";
pub const PORTRAIT_INDEX: &str = "index.csv";

#[derive(Debug, Parser)]
#[command(name = "geomech", version, about = "Poisson systems: checks, integration and phase portraits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate one trajectory and write it as CSV.
    Simulate(SimulateArgs),
    /// Run a structural check and write a JSON report.
    Check(CheckArgs),
    /// Integrate a grid of initial conditions on a 2-dimensional chart.
    Portrait(PortraitArgs),
    /// Compute a Darboux basis for a constant skew matrix.
    Darboux(DarbouxArgs),
    /// Write a system definition document.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
struct SystemArgs {
    /// `builtin:<name>` or a path to a TOML system definition.
    #[arg(long)]
    system: String,
    /// Parameter override `name=value`; repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Initial state, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    x0: Vec<f64>,
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[arg(long)]
    h: f64,
    #[arg(long)]
    steps: usize,
    /// Invariants to trace; defaults to all declared ones.
    #[arg(long, value_delimiter = ',')]
    trace: Option<Vec<String>>,
    /// Implicit solve tolerance.
    #[arg(long, default_value_t = crate::integrate::DEFAULT_SOLVE_TOL)]
    solve_tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckKind {
    Jacobi,
    Schouten,
    Casimir,
    Involution,
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckKind::Jacobi => "jacobi",
            CheckKind::Schouten => "schouten",
            CheckKind::Casimir => "casimir",
            CheckKind::Involution => "involution",
        })
    }
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long, value_enum)]
    kind: CheckKind,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = crate::poisson::DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = crate::poisson::DEFAULT_SEED)]
    seed: u64,
    /// Invariant names for casimir and involution checks.
    #[arg(long, value_delimiter = ',')]
    target: Option<Vec<String>>,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PortraitArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// `axis=lo:hi:count,...` over both chart coordinates.
    #[arg(long, allow_hyphen_values = true)]
    grid: String,
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[arg(long)]
    h: f64,
    #[arg(long)]
    steps: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DarbouxArgs {
    /// Whitespace-separated square matrix, one row per line; `#` starts a comment.
    #[arg(long)]
    form: PathBuf,
    #[arg(long, default_value_t = crate::symplin::DEFAULT_TOL)]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got '{s}'"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("bad value for '{k}': {e}"))?;
    Ok((k.trim().to_string(), v))
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: crate::integrate::IntegrateError| e.to_string())
}

/// Failure of a subcommand together with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl fmt::Display) -> Self {
        Self { code: EXIT_USAGE, message: message.to_string() }
    }

    fn numerical(message: impl fmt::Display) -> Self {
        Self { code: EXIT_NUMERICAL, message: message.to_string() }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Self::usage(format!("{}: {e}", path.display()))
    }
}

/// Runs the command line `args` (including the program name) and returns
/// the exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Check(a) => check(a),
        Command::Portrait(a) => portrait(a),
        Command::Darboux(a) => darboux(a),
        Command::Export(a) => export(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

/// Resolves `--system` and `--param` into a definition document.
pub fn load_definition(source: &str, params: &[(String, f64)]) -> Result<SystemDefinition, CliError> {
    let overrides: BTreeMap<String, f64> = params.iter().cloned().collect();
    if overrides.len() != params.len() {
        return Err(CliError::usage("parameter given more than once"));
    }
    if let Some(name) = source.strip_prefix(BUILTIN_PREFIX) {
        return catalog::definition(name, &overrides).map_err(CliError::usage);
    }
    let path = Path::new(source);
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut def = SystemDefinition::from_toml(&text).map_err(CliError::usage)?;
    def.override_parameters(&overrides).map_err(CliError::usage)?;
    Ok(def)
}

fn load_system(args: &SystemArgs) -> Result<PoissonSystem, CliError> {
    load_definition(&args.system, &args.params)?
        .to_system()
        .map_err(|e| CliError::usage(format!("system '{}': {e}", args.system)))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn trajectory_csv(traj: &Trajectory) -> Vec<u8> {
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).expect("writing to memory cannot fail");
    buf
}

fn simulate(a: SimulateArgs) -> Result<i32, CliError> {
    let sys = load_system(&a.system)?;
    if a.x0.len() != sys.dim() {
        return Err(CliError::usage(format!("--x0 has {} values, chart has {}", a.x0.len(), sys.dim())));
    }
    let traced = a.trace.unwrap_or_else(|| sys.invariant_names());
    for name in &traced {
        sys.invariant(name).map_err(CliError::usage)?;
    }
    let cfg = StepperConfig::new(a.method, a.h).with_tol(a.solve_tol);
    cfg.validate().map_err(CliError::usage)?;
    match integrate(&sys, &a.x0, &cfg, a.steps, &traced) {
        Ok(traj) => {
            write_file(&a.out, &trajectory_csv(&traj))?;
            Ok(EXIT_OK)
        }
        Err(failure) => {
            if failure.step == 0 {
                return Err(CliError::usage(failure.error));
            }
            write_file(&a.out, &trajectory_csv(&failure.partial))?;
            Err(CliError::numerical(format!(
                "{failure}; {} states written to {}",
                failure.partial.len(),
                a.out.display()
            )))
        }
    }
}

#[derive(Debug, Serialize)]
struct CheckDocument<'a> {
    system: &'a str,
    targets: Vec<String>,
    #[serde(flatten)]
    report: CheckReport,
}

fn check(a: CheckArgs) -> Result<i32, CliError> {
    let sys = load_system(&a.system)?;
    let cfg = sys.sample_config(a.samples, a.seed, a.tol);
    let resolve = |names: Vec<String>| -> Result<Vec<_>, CliError> {
        names.iter().map(|n| sys.invariant(n).cloned().map_err(CliError::usage)).collect()
    };
    let numerical = |e: PoissonError| match e {
        PoissonError::TooManySkips { .. } | PoissonError::Expr(_) => CliError::numerical(e),
        other => CliError::usage(other),
    };
    let (targets, report) = match a.kind {
        CheckKind::Jacobi => (Vec::new(), jacobi_check(sys.bivector(), &cfg).map_err(numerical)?),
        CheckKind::Schouten => (Vec::new(), schouten_report(&sys, a.seed)?),
        CheckKind::Casimir => {
            let names = a
                .target
                .unwrap_or_else(|| sys.casimirs().iter().map(|c| c.name.clone()).collect());
            if names.is_empty() {
                return Err(CliError::usage("no Casimirs declared; pass --target"));
            }
            let exprs = resolve(names.clone())?;
            let mut combined: Option<CheckReport> = None;
            for e in &exprs {
                let r = check_casimir(sys.bivector(), e, &cfg).map_err(numerical)?;
                combined = Some(match combined {
                    Some(c) if c.max_residual >= r.max_residual => {
                        CheckReport { skipped: c.skipped.max(r.skipped), ..c }
                    }
                    Some(c) => CheckReport { skipped: c.skipped.max(r.skipped), ..r },
                    None => r,
                });
            }
            (names, combined.expect("at least one target"))
        }
        CheckKind::Involution => {
            let names = a.target.unwrap_or_else(|| sys.invariant_names());
            let exprs = resolve(names.clone())?;
            (names, involution_check(sys.bivector(), &exprs, &cfg).map_err(numerical)?)
        }
    };
    let passed = report.passed;
    let doc = CheckDocument { system: sys.name(), targets, report };
    let mut json = serde_json::to_string_pretty(&doc).expect("report serializes");
    json.push('\n');
    match &a.out {
        Some(path) => write_file(path, json.as_bytes())?,
        None => print!("{json}"),
    }
    if !passed {
        let at = doc.report.worst_point.as_ref().map(|x| format!(" at {x:?}")).unwrap_or_default();
        eprintln!("{} check failed: residual {:e} > {:e}{at}", a.kind, doc.report.max_residual, doc.report.tolerance);
    }
    Ok(if passed { EXIT_OK } else { EXIT_CHECK_FAILED })
}

/// Exact Schouten components; the residual is the largest coefficient and
/// the tolerance is zero regardless of `--tol`.
fn schouten_report(sys: &PoissonSystem, seed: u64) -> Result<CheckReport, CliError> {
    let components = schouten_self_bracket(sys.bivector()).map_err(|e| match e {
        PoissonError::NonPolynomial => {
            CliError::usage("schouten check needs polynomial bivector entries; use --kind jacobi")
        }
        other => CliError::usage(other),
    })?;
    let max_residual = components
        .values()
        .map(Polynomial::max_abs_coefficient)
        .fold(0.0, f64::max);
    Ok(CheckReport {
        check: "schouten".into(),
        passed: max_residual == 0.0,
        tolerance: 0.0,
        samples: 0,
        seed,
        max_residual,
        worst_point: None,
        skipped: 0,
    })
}

#[derive(Debug, Clone, PartialEq)]
struct Axis {
    name: String,
    lo: f64,
    hi: f64,
    count: usize,
}

impl Axis {
    fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.count - 1) as f64;
        (0..self.count).map(|k| self.lo + k as f64 * step).collect()
    }
}

fn parse_grid(spec: &str) -> Result<Vec<Axis>, CliError> {
    spec.split(',')
        .map(|part| {
            let bad = || CliError::usage(format!("bad grid axis '{part}', expected name=lo:hi:count"));
            let (name, range) = part.split_once('=').ok_or_else(bad)?;
            let fields: Vec<&str> = range.split(':').collect();
            let [lo, hi, count] = fields.as_slice() else {
                return Err(bad());
            };
            let axis = Axis {
                name: name.trim().to_string(),
                lo: lo.trim().parse().map_err(|_| bad())?,
                hi: hi.trim().parse().map_err(|_| bad())?,
                count: count.trim().parse().map_err(|_| bad())?,
            };
            if axis.count == 0 || !(axis.lo <= axis.hi) {
                return Err(bad());
            }
            Ok(axis)
        })
        .collect()
}

fn portrait(a: PortraitArgs) -> Result<i32, CliError> {
    let sys = load_system(&a.system)?;
    if sys.dim() != 2 {
        return Err(CliError::usage(format!("portrait needs a 2-dimensional chart, got {}", sys.dim())));
    }
    let mut axes = parse_grid(&a.grid)?;
    let chart = sys.chart().to_vec();
    let mut ordered = Vec::new();
    for c in &chart {
        let pos = axes
            .iter()
            .position(|ax| &ax.name == c)
            .ok_or_else(|| CliError::usage(format!("grid has no axis for '{c}'")))?;
        ordered.push(axes.remove(pos));
    }
    if let Some(extra) = axes.first() {
        return Err(CliError::usage(format!("grid axis '{}' is not a chart coordinate", extra.name)));
    }
    let cfg = StepperConfig::new(a.method, a.h);
    cfg.validate().map_err(CliError::usage)?;
    let seeds: Vec<[f64; 2]> = ordered[0]
        .values()
        .into_iter()
        .flat_map(|u| ordered[1].values().into_iter().map(move |v| [u, v]))
        .collect();
    fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    let traced = sys.invariant_names();
    let width = seeds.len().to_string().len().max(4);

    let outcomes: Vec<Result<(String, String), CliError>> = seeds
        .par_iter()
        .enumerate()
        .map(|(k, x0)| {
            let file = format!("traj_{k:0width$}.csv");
            let (traj, status) = match integrate(&sys, x0, &cfg, a.steps, &traced) {
                Ok(t) => (t, "ok".to_string()),
                Err(f) => (*f.partial, format!("aborted at step {}", f.step)),
            };
            write_file(&a.out.join(&file), &trajectory_csv(&traj))?;
            Ok((file, status))
        })
        .collect();

    let mut index = format!("file,{},{},status\n", chart[0], chart[1]);
    let mut aborted = 0;
    for (x0, outcome) in seeds.iter().zip(outcomes) {
        let (file, status) = outcome?;
        if status != "ok" {
            aborted += 1;
        }
        index.push_str(&format!("{file},{},{},{status}\n", format_value(x0[0]), format_value(x0[1])));
    }
    write_file(&a.out.join(PORTRAIT_INDEX), index.as_bytes())?;
    if aborted > 0 {
        return Err(CliError::numerical(format!("{aborted} of {} trajectories aborted", seeds.len())));
    }
    Ok(EXIT_OK)
}

/// Square numeric matrix, whitespace separated, `#` comments.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>, String> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let row = body
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| format!("line {}: '{t}': {e}", lineno + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err("empty matrix".into());
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != rows[0].len()) {
        return Err(format!("row {} has {} entries, expected {}", bad + 1, rows[bad].len(), rows[0].len()));
    }
    Ok(DMatrix::from_fn(n, rows[0].len(), |i, j| rows[i][j]))
}

fn darboux(a: DarbouxArgs) -> Result<i32, CliError> {
    let text = fs::read_to_string(&a.form).map_err(|e| CliError::io(&a.form, e))?;
    let m = parse_matrix(&text).map_err(CliError::usage)?;
    let failed = |e: crate::symplin::SymplinError| {
        eprintln!("error: {e}");
        Ok(EXIT_CHECK_FAILED)
    };
    let omega = match SymplecticFormMatrix::new(m, a.tol) {
        Ok(o) => o,
        Err(e) => return failed(e),
    };
    let b = match darboux_basis_with_tol(&omega, a.tol) {
        Ok(b) => b,
        Err(e) => return failed(e),
    };
    let residual = darboux_residual(&omega, &b);
    let mut out = String::new();
    for i in 0..b.nrows() {
        let row: Vec<String> = b.row(i).iter().map(|v| format_value(*v)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out.push_str(&format!("# residual {}\n", format_value(residual)));
    write_file(&a.out, out.as_bytes())?;
    Ok(EXIT_OK)
}

fn export(a: ExportArgs) -> Result<i32, CliError> {
    let def = load_definition(&a.system.system, &a.system.params)?;
    def.to_system().map_err(CliError::usage)?;
    let text = def.to_toml().map_err(CliError::usage)?;
    match &a.out {
        Some(path) => write_file(path, text.as_bytes())?,
        None => io::stdout().write_all(text.as_bytes()).map_err(CliError::usage)?,
    }
    Ok(EXIT_OK)
}
