//! Command-line front end: `solve`, `generate`, `verify` and `order`.
//!
//! Exit codes: 0 success, 1 non-convergence or failed verification, 2 input
//! or schema error, 3 numeric failure.

pub mod problem;
pub mod report;

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rug::Float;
use thiserror::Error;

use crate::convergence::{check_theorem, error_floor, estimate_order_above, TheoremParams};
use crate::ehrlich::{solve, SolveReport, StepError, SweepMode, Termination};
use crate::oracle::{default_verify_tolerance, verify_roots};
use crate::poly::{Family, RootConfiguration};
use crate::real::{max_of, Precision, Real};

use problem::{generate_problem, parse_problem, GenerateSpec, Overrides, Problem, TheoremInputs};
use report::{
    error_strings, short, OrderReport, OrderSource, Report, ReportSettings, TheoremReport,
    TraceRow, VerificationReport,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILED: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "multiroot",
    version,
    about = "Refine roots of known multiplicity of algebraic, trigonometric and exponential polynomials"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a problem file and write a JSON report.
    Solve(SolveArgs),
    /// Write a coefficient-form problem file from roots and multiplicities.
    Generate(GenerateArgs),
    /// Check a report's approximations against its problem.
    Verify(VerifyArgs),
    /// Re-estimate the convergence order from a report's trace.
    Order(OrderArgs),
}

#[derive(Debug, Args)]
struct TheoremFlags {
    /// Theorem constant c (overrides the [theorems] table).
    #[arg(long)]
    c: Option<f64>,
    /// Theorem constant q (overrides the [theorems] table).
    #[arg(long)]
    q: Option<f64>,
    /// Separation constant for trigonometric problems.
    #[arg(long)]
    kappa: Option<f64>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    problem: PathBuf,
    /// Report path; the report goes to stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    precision_bits: Option<u32>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Relative correction tolerance, as a decimal string.
    #[arg(long)]
    tolerance: Option<String>,
    #[arg(long)]
    sweep: Option<SweepMode>,
    /// Evaluate the family's convergence theorem hypotheses.
    #[arg(long)]
    theorems: bool,
    #[command(flatten)]
    theorem_values: TheoremFlags,
    /// Certify the final approximations; failure makes the exit code 1.
    #[arg(long)]
    verify: bool,
    #[arg(long)]
    verify_tolerance: Option<String>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    family: Family,
    /// Comma-separated `root:multiplicity` pairs, e.g. `2:2,3:3,5:1`.
    #[arg(long, allow_hyphen_values = true)]
    roots: String,
    /// Comma-separated starting values (default: roots offset by a tenth of the minimal gap).
    #[arg(long, allow_hyphen_values = true)]
    initial: Option<String>,
    #[arg(long, default_value_t = 256)]
    precision_bits: u32,
    #[arg(long)]
    label: Option<String>,
    /// Leading factor of the factored form.
    #[arg(long, allow_hyphen_values = true)]
    scale: Option<String>,
    /// Error level whose first iterate the report records.
    #[arg(long)]
    error_target: Option<String>,
    #[command(flatten)]
    theorem_values: TheoremFlags,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    problem: PathBuf,
    report: PathBuf,
    #[arg(long)]
    tolerance: Option<String>,
}

#[derive(Debug, Args)]
struct OrderArgs {
    report: PathBuf,
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Solve(a) => solve_command(&a),
        Command::Generate(a) => generate_command(&a),
        Command::Verify(a) => verify_command(&a),
        Command::Order(a) => order_command(&a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    })
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    match writeln!(out, "{text}").and_then(|()| out.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => {
            Err(CliError::Input(format!("cannot write to stdout: {e}")))
        }
        _ => Ok(()),
    }
}

fn display_name(path: &Path) -> String {
    path.display().to_string()
}

fn solve_command(args: &SolveArgs) -> Result<u8, CliError> {
    let name = display_name(&args.problem);
    let overrides = Overrides {
        precision_bits: args.precision_bits,
        max_iterations: args.max_iterations,
        tolerance: args.tolerance.clone(),
        sweep: args.sweep,
    };
    let problem = parse_problem(&name, &read(&args.problem)?, &overrides)?;
    let theorem_inputs = if args.theorems {
        Some(merge_theorem_inputs(
            problem.theorems,
            &args.theorem_values,
        )?)
    } else {
        None
    };
    let verify_tolerance = args
        .verify_tolerance
        .as_deref()
        .map(|t| {
            problem
                .precision
                .parse(t)
                .map_err(|e| CliError::Input(format!("--verify-tolerance: {e}")))
        })
        .transpose()?;

    let outcome = solve(
        &problem.poly,
        &problem.multiplicities,
        &problem.initial,
        &problem.settings,
    )
    .map_err(|e| match e {
        StepError::InvalidInput(m) => CliError::Input(format!("{name}: {m}")),
        other => CliError::Numeric(other.to_string()),
    })?;
    let mut report = build_report(&problem, &outcome);
    let mut problems = Vec::new();
    if let Some(inputs) = theorem_inputs {
        match theorem_report(&problem, inputs) {
            Ok(t) => report.theorems = Some(t),
            Err(e) => problems.push(e),
        }
    }
    if args.verify {
        let tol = verify_tolerance.unwrap_or_else(|| default_tolerance(&problem));
        match verification(&problem, &outcome.final_approximations, &tol) {
            Ok(v) => report.verification = Some(v),
            Err(e) => problems.push(e),
        }
    }

    let json =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Numeric(e.to_string()))?;
    match &args.output {
        Some(path) => write(path, &(json + "\n"))?,
        None => emit(&json)?,
    }
    eprintln!("{}", summary(&report));
    if let Some(e) = problems.into_iter().next() {
        return Err(e);
    }
    Ok(exit_code(&report))
}

/// 0 only for a converged solve whose verification (if run) passed.
pub fn exit_code(report: &Report) -> u8 {
    match report.termination {
        Termination::Converged if report.verification.as_ref().is_none_or(|v| v.passed) => EXIT_OK,
        Termination::Nonfinite => EXIT_NUMERIC,
        _ => EXIT_FAILED,
    }
}

fn summary(report: &Report) -> String {
    let mut s = format!(
        "{}: {} after {} iterations",
        report.label, report.termination, report.iterations_used
    );
    if let (Some(target), Some(k)) = (&report.error_target, report.iterations_to_target) {
        s += &format!(", error <= {target} at iteration {k}");
    } else if let Some(target) = &report.error_target {
        if report.truth.is_some() {
            s += &format!(", error target {target} not reached");
        }
    }
    if let Some(o) = &report.order {
        s += &format!(", order {:.3} (from {})", o.order, o.source.as_str());
    }
    if let Some(f) = &report.failure {
        s += &format!(" [{f}]");
    }
    if let Some(t) = &report.theorems {
        s += if t.passed {
            ", theorem hypotheses hold"
        } else {
            ", theorem hypotheses fail"
        };
    }
    if let Some(v) = &report.verification {
        s += if v.passed {
            ", verified"
        } else {
            ", verification failed"
        };
    }
    s
}

impl OrderSource {
    fn as_str(self) -> &'static str {
        match self {
            OrderSource::Errors => "errors",
            OrderSource::Corrections => "corrections",
        }
    }
}

/// Assembles the report of a finished solve; theorem and verification
/// sections are filled in by the caller.
pub fn build_report(problem: &Problem, outcome: &SolveReport) -> Report {
    let prec = problem.precision;
    let truth = problem.truth.as_deref();
    let trace = outcome
        .trace
        .iter()
        .map(|r| TraceRow {
            k: r.k,
            approximations: r.approximations.iter().map(|x| prec.format(x)).collect(),
            corrections: r.corrections.iter().map(|x| prec.format(x)).collect(),
            residuals: r.residuals.iter().map(|x| prec.format(x)).collect(),
            errors: truth.map(|t| error_strings(prec, &r.approximations, t)),
        })
        .collect();
    let floor = truth.and_then(|t| error_floor(&problem.poly, t, &problem.multiplicities).ok());
    let order = match truth {
        Some(t) => outcome
            .error_order(&problem.poly, &problem.multiplicities, t)
            .ok()
            .map(|o| OrderReport::new(OrderSource::Errors, &o)),
        None => outcome
            .estimated_order
            .as_ref()
            .map(|o| OrderReport::new(OrderSource::Corrections, o)),
    };
    let iterations_to_target = match (truth, &problem.error_target) {
        (Some(t), Some(target)) => outcome.iterations_to(t, target),
        _ => None,
    };
    Report {
        label: problem.label.clone(),
        family: problem.family,
        precision_bits: prec.bits(),
        digits: prec.decimal_digits(),
        multiplicities: problem.multiplicities.clone(),
        settings: ReportSettings {
            max_iterations: problem.settings.max_iterations,
            tolerance: short(&problem.settings.correction_tolerance),
            sweep: problem.settings.sweep,
        },
        termination: outcome.termination,
        failure: outcome.failure.as_ref().map(|e| e.to_string()),
        iterations_used: outcome.iterations_used,
        final_approximations: outcome
            .final_approximations
            .iter()
            .map(|x| prec.format(x))
            .collect(),
        truth: truth.map(|t| t.iter().map(|x| prec.format(x)).collect()),
        error_target: problem.error_target.as_ref().map(short),
        iterations_to_target,
        error_floor: floor.as_ref().map(short),
        order,
        trace,
        theorems: None,
        verification: None,
    }
}

fn merge_theorem_inputs(
    file: Option<TheoremInputs>,
    flags: &TheoremFlags,
) -> Result<TheoremInputs, CliError> {
    let c = flags.c.or(file.map(|t| t.c));
    let q = flags.q.or(file.map(|t| t.q));
    let kappa = flags.kappa.or(file.and_then(|t| t.kappa));
    match (c, q) {
        (Some(c), Some(q)) => Ok(TheoremInputs { c, q, kappa }),
        _ => Err(CliError::Input(
            "--theorems needs c and q, from a [theorems] table or --c/--q".into(),
        )),
    }
}

fn theorem_report(problem: &Problem, inputs: TheoremInputs) -> Result<TheoremReport, CliError> {
    let config = problem.truth_configuration().ok_or_else(|| {
        CliError::Input("theorem hypotheses need the true roots (truth or [roots])".into())
    })?;
    let params = TheoremParams::new(problem.family, &config, inputs.c, inputs.q, inputs.kappa)
        .map_err(|e| CliError::Input(format!("theorem parameters: {e}")))?;
    let verdict = check_theorem(&params);
    Ok(TheoremReport::new(
        &verdict,
        params.c,
        params.q,
        params.kappa,
        params.d,
        params.max_gap,
    ))
}

fn default_tolerance(problem: &Problem) -> Real {
    let max_alpha = problem.multiplicities.iter().copied().max().unwrap_or(1);
    default_verify_tolerance(problem.precision, max_alpha)
}

fn verification(
    problem: &Problem,
    approximations: &[Real],
    tol: &Real,
) -> Result<VerificationReport, CliError> {
    let claimed = RootConfiguration::new(approximations.to_vec(), problem.multiplicities.clone())
        .map_err(|e| CliError::Numeric(format!("claimed roots: {e}")))?;
    let outcome =
        verify_roots(&problem.poly, &claimed, tol).map_err(|e| CliError::Numeric(e.to_string()))?;
    Ok(VerificationReport::new(problem.precision, tol, &outcome))
}

fn generate_command(args: &GenerateArgs) -> Result<u8, CliError> {
    let prec = Precision::new(args.precision_bits).map_err(|e| CliError::Input(e.to_string()))?;
    let mut roots = Vec::new();
    let mut multiplicities = Vec::new();
    for pair in args.roots.split(',') {
        let (r, a) = pair.rsplit_once(':').ok_or_else(|| {
            CliError::Input(format!("--roots: expected root:multiplicity, got `{pair}`"))
        })?;
        roots.push(r.trim().to_string());
        let a: u32 = a
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("--roots: bad multiplicity `{a}`")))?;
        multiplicities.push(a);
    }
    let total: u32 = multiplicities.iter().sum();
    if args.family.degree_for_multiplicity(total).is_none() {
        return Err(CliError::Input(format!(
            "{} configurations need an even multiplicity sum, got {total}",
            args.family
        )));
    }
    let theorems = match (args.theorem_values.c, args.theorem_values.q) {
        (Some(c), Some(q)) => Some(TheoremInputs {
            c,
            q,
            kappa: args.theorem_values.kappa,
        }),
        (None, None) => None,
        _ => return Err(CliError::Input("--c and --q go together".into())),
    };
    if let Some(t) = &args.error_target {
        prec.parse(t)
            .map_err(|e| CliError::Input(format!("--error-target: {e}")))?;
    }
    let spec = GenerateSpec {
        label: args.label.clone().unwrap_or_else(|| {
            args.output
                .file_stem()
                .map_or("problem".into(), |s| s.to_string_lossy().into())
        }),
        family: args.family,
        precision: prec,
        roots,
        multiplicities,
        scale: args
            .scale
            .as_deref()
            .map(|s| {
                prec.parse(s)
                    .map_err(|e| CliError::Input(format!("--scale: {e}")))
            })
            .transpose()?,
        initial: args
            .initial
            .as_deref()
            .map(|s| s.split(',').map(|v| v.trim().to_string()).collect()),
        error_target: args.error_target.clone(),
        theorems,
    };
    let text = generate_problem(&spec)?;
    write(&args.output, &text)?;
    Ok(EXIT_OK)
}

fn read_report(path: &Path) -> Result<Report, CliError> {
    serde_json::from_str(&read(path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", display_name(path))))
}

fn parse_reals(prec: Precision, values: &[String], what: &str) -> Result<Vec<Real>, CliError> {
    values
        .iter()
        .map(|v| {
            prec.parse(v)
                .map_err(|e| CliError::Input(format!("report {what}: {e}")))
        })
        .collect()
}

fn verify_command(args: &VerifyArgs) -> Result<u8, CliError> {
    let report = read_report(&args.report)?;
    let overrides = Overrides {
        precision_bits: Some(report.precision_bits),
        ..Overrides::default()
    };
    let problem = parse_problem(
        &display_name(&args.problem),
        &read(&args.problem)?,
        &overrides,
    )?;
    let prec = problem.precision;
    if report.family != problem.family || report.multiplicities != problem.multiplicities {
        return Err(CliError::Input(format!(
            "report `{}` ({}, multiplicities {:?}) does not match problem `{}` ({}, multiplicities {:?})",
            report.label,
            report.family,
            report.multiplicities,
            problem.label,
            problem.family,
            problem.multiplicities
        )));
    }
    if report.final_approximations.len() != problem.multiplicities.len() {
        return Err(CliError::Input(format!(
            "report has {} final approximations, the problem has {} roots",
            report.final_approximations.len(),
            problem.multiplicities.len()
        )));
    }
    let approximations = parse_reals(prec, &report.final_approximations, "final_approximations")?;

    let mut ok = true;
    if let Some(truth) = &problem.truth {
        for row in &report.trace {
            let Some(stored) = &row.errors else { continue };
            let xs = parse_reals(prec, &row.approximations, "trace")?;
            if xs.len() != truth.len() || error_strings(prec, &xs, truth) != *stored {
                eprintln!(
                    "trace row {}: stored errors do not match its approximations",
                    row.k
                );
                ok = false;
            }
        }
    }

    let tol = match &args.tolerance {
        Some(t) => prec
            .parse(t)
            .map_err(|e| CliError::Input(format!("--tolerance: {e}")))?,
        None => default_tolerance(&problem),
    };
    let v = match verification(&problem, &approximations, &tol) {
        Ok(v) => v,
        Err(CliError::Numeric(m)) if m.starts_with("claimed roots") => {
            eprintln!("{m}");
            return Ok(EXIT_FAILED);
        }
        Err(e) => return Err(e),
    };
    for c in v.checks.iter().filter(|c| !c.passed) {
        let rule = if c.must_vanish {
            "exceeds"
        } else {
            "does not exceed"
        };
        eprintln!(
            "root {} derivative {}: |f^({})| = {} {rule} {}",
            c.root, c.order, c.order, c.value, c.threshold
        );
    }
    ok &= v.passed;
    eprintln!(
        "{}: {} (tolerance {})",
        report.label,
        if ok {
            "verified"
        } else {
            "verification failed"
        },
        v.tolerance
    );
    Ok(if ok { EXIT_OK } else { EXIT_FAILED })
}

fn order_command(args: &OrderArgs) -> Result<u8, CliError> {
    let report = read_report(&args.report)?;
    let prec = Precision::new(report.precision_bits).map_err(|e| CliError::Input(e.to_string()))?;
    let with_errors = !report.trace.is_empty() && report.trace.iter().all(|r| r.errors.is_some());
    let (source, sizes, floor) = if with_errors {
        let sizes = report
            .trace
            .iter()
            .map(|r| row_max(prec, r.errors.as_deref().unwrap_or_default(), "errors"))
            .collect::<Result<Vec<_>, _>>()?;
        let floor = report
            .error_floor
            .as_deref()
            .map(|f| {
                prec.parse(f)
                    .map_err(|e| CliError::Input(format!("report error_floor: {e}")))
            })
            .transpose()?;
        (OrderSource::Errors, sizes, floor)
    } else {
        let sizes = report
            .trace
            .iter()
            .skip(1)
            .map(|r| row_max(prec, &r.corrections, "corrections"))
            .collect::<Result<Vec<_>, _>>()?;
        (OrderSource::Corrections, sizes, None)
    };
    match estimate_order_above(&sizes, floor.as_ref()) {
        Ok(est) => {
            let out = OrderReport::new(source, &est);
            emit(
                &serde_json::to_string_pretty(&out)
                    .map_err(|e| CliError::Numeric(e.to_string()))?,
            )?;
            Ok(EXIT_OK)
        }
        Err(e) => {
            eprintln!("{}: {e}", report.label);
            Ok(EXIT_FAILED)
        }
    }
}

fn row_max(prec: Precision, values: &[String], what: &str) -> Result<Real, CliError> {
    let parsed: Vec<Real> = parse_reals(prec, values, what)?
        .into_iter()
        .map(Float::abs)
        .collect();
    Ok(max_of(&parsed).unwrap_or_else(|| prec.zero()))
}
