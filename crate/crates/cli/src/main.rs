//! Command-line harness for the gridsched scheduler.
//!
//! Exit codes: 0 success, 1 infeasible (or no solution within limits),
//! 2 usage error (bad flags or unreadable/invalid input files),
//! 3 internal check failure (solver/validator disagreement).

use clap::{Args, Parser, Subcommand};
use gridsched::baselines::{run_variant, BaselineError, EvaluatedSolution};
use gridsched::bnb::SolverParams;
use gridsched::build::{build, BuildOptions, Variant};
use gridsched::harness::{
    comparison_csv, enumeration_oracle, run_comparison, run_sweep, sweep_csv_row, OracleError,
    SweepAxis, SweepConfig, SWEEP_CSV_HEADER,
};
use gridsched::instance::{load_instance, validate_instance, Instance};
use gridsched::mps::export_mps;
use gridsched::scenario::{generate, GenConfig, ScenarioKind};
use gridsched::validator::{check_solution, compute_metrics, Solution, DEFAULT_TOL};
use serde::Deserialize;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "gridsched",
    version,
    about = "Joint compute-power scheduling for prosumer data centers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic instance.
    Generate(GenerateArgs),
    /// Solve the joint model (or a variant) on an instance file.
    Solve(SolveArgs),
    /// Run the six-method comparison table on an instance file.
    Compare(CompareArgs),
    /// Solve generated instances across a scaling axis.
    Sweep(SweepArgs),
    /// Check a solution file against an instance.
    Validate(ValidateArgs),
    /// Export a built model in fixed-form MPS.
    ExportMps(ExportMpsArgs),
    /// Exhaustive ground-truth solve for tiny instances.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct SolverFlags {
    /// Wall-clock solve limit in seconds.
    #[arg(long = "time-limit", value_name = "SECONDS", default_value_t = 120.0)]
    time_limit: f64,
    /// Relative MIP-gap stopping tolerance.
    #[arg(long, value_name = "FRACTION", default_value_t = 0.01)]
    gap: f64,
    /// Worker threads (reserved; the solver currently uses one).
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

impl SolverFlags {
    fn params(&self, seed: u64) -> SolverParams {
        SolverParams {
            time_limit_s: self.time_limit,
            rel_gap: self.gap,
            node_limit: None,
            seed,
            threads: self.threads,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Instance seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    sites: usize,
    #[arg(long, default_value_t = 24)]
    periods: usize,
    #[arg(long, default_value_t = 6)]
    jobs: usize,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    /// default | training_dominant | inference_dominant | local_gen_rich
    /// | peak_demand
    #[arg(long, default_value = "default")]
    scenario: ScenarioKind,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file.
    instance: PathBuf,
    /// joint | no_battery | no_routing | no_carbon
    #[arg(long, default_value = "joint")]
    variant: Variant,
    /// Solver tie-break seed (reserved).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    solver: SolverFlags,
    /// Combined solution + report JSON output (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Instance file.
    instance: PathBuf,
    /// Solver tie-break seed (reserved).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    solver: SolverFlags,
    /// Comparison CSV output (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// sites | periods | jobs
    #[arg(long, default_value = "periods")]
    axis: SweepAxis,
    /// Comma-separated grid values (the axis default grid when omitted).
    #[arg(long, value_delimiter = ',')]
    values: Vec<usize>,
    /// Base instance seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    sites: usize,
    #[arg(long, default_value_t = 24)]
    periods: usize,
    #[arg(long, default_value_t = 6)]
    jobs: usize,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value = "default")]
    scenario: ScenarioKind,
    /// Re-solves of each cell (identical data columns, fresh timings).
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
    #[command(flatten)]
    solver: SolverFlags,
    /// Sweep CSV output, written incrementally (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Instance file.
    instance: PathBuf,
    /// Solution file: either a bare solution document or the combined
    /// output of `solve`.
    solution: PathBuf,
    /// Checking tolerance.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Args)]
struct ExportMpsArgs {
    /// Instance file.
    instance: PathBuf,
    /// joint | no_battery | no_routing | no_carbon
    #[arg(long, default_value = "joint")]
    variant: Variant,
    /// MPS output (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Instance file (must be tiny).
    instance: PathBuf,
    /// Maximum number of enumerated binary patterns.
    #[arg(long, default_value_t = 1 << 20)]
    limit: u64,
    /// Oracle result JSON output (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Error carrying its process exit code.
enum CliError {
    /// Exit 1: the model (or the checked solution) is infeasible, or no
    /// solution was found within the limits.
    Infeasible(String),
    /// Exit 2: bad arguments or unreadable/invalid input files.
    Usage(String),
    /// Exit 3: an internal consistency check failed.
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Infeasible(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Infeasible(m) | CliError::Usage(m) | CliError::Internal(m) => m,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Generate(args) => cmd_generate(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Validate(args) => cmd_validate(args),
        Command::ExportMps(args) => cmd_export_mps(args),
        Command::Oracle(args) => cmd_oracle(args),
    }
}

fn read_instance(path: &Path) -> Result<Instance, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let inst = load_instance(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok(inst)
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<(), CliError> {
    if args.sites == 0 || args.periods == 0 {
        return Err(CliError::Usage(
            "generate requires at least one site and one period".into(),
        ));
    }
    let cfg = GenConfig {
        seed: args.seed,
        num_sites: args.sites,
        num_periods: args.periods,
        num_jobs: args.jobs,
        num_classes: args.classes,
        scenario: args.scenario,
    };
    let inst = generate(&cfg);
    let report = validate_instance(&inst);
    if !report.is_empty() {
        return Err(CliError::Internal(format!(
            "generated instance failed validation: {report}"
        )));
    }
    write_output(&args.out, &gridsched::instance::save_instance(&inst))
}

fn map_baseline_err(err: BaselineError) -> CliError {
    match err {
        BaselineError::Infeasible { .. } => CliError::Infeasible(err.to_string()),
        BaselineError::NoSolution { .. } => CliError::Infeasible(err.to_string()),
        BaselineError::Build(_) => CliError::Usage(err.to_string()),
        BaselineError::Solve(_) => CliError::Internal(err.to_string()),
    }
}

/// Families a variant's solution may legitimately violate under the
/// full joint rules.
fn allowed_families(variant: Variant) -> &'static [&'static str] {
    match variant {
        Variant::NoCarbon => &["eq16"],
        _ => &[],
    }
}

fn cmd_solve(args: SolveArgs) -> Result<(), CliError> {
    let inst = read_instance(&args.instance)?;
    let report = validate_instance(&inst);
    if !report.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: invalid instance: {report}",
            args.instance.display()
        )));
    }
    let eval: EvaluatedSolution =
        run_variant(&inst, args.variant, &args.solver.params(args.seed)).map_err(map_baseline_err)?;

    let allowed = allowed_families(args.variant);
    let unexpected: Vec<&String> = eval
        .violated_families
        .iter()
        .filter(|f| !allowed.contains(&f.as_str()))
        .collect();
    if !unexpected.is_empty() {
        return Err(CliError::Internal(format!(
            "incumbent violates constraint families {unexpected:?}"
        )));
    }
    log::info!(
        "{} status={} objective={:.6} emissions={:.3} gap={:.2e}",
        args.variant,
        eval.report.status,
        eval.metrics.objective_total,
        eval.metrics.emissions_kg,
        eval.report.gap
    );
    let doc = serde_json::json!({
        "variant": args.variant.as_str(),
        "report": eval.report,
        "metrics": eval.metrics,
        "joint_feasible": eval.joint_feasible,
        "solution": eval.solution,
    });
    let mut text = serde_json::to_string_pretty(&doc)
        .map_err(|e| CliError::Internal(format!("serialization: {e}")))?;
    text.push('\n');
    write_output(&args.out, &text)
}

fn cmd_compare(args: CompareArgs) -> Result<(), CliError> {
    let inst = read_instance(&args.instance)?;
    let report = validate_instance(&inst);
    if !report.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: invalid instance: {report}",
            args.instance.display()
        )));
    }
    let rows = run_comparison(&inst, &args.solver.params(args.seed))
        .map_err(|e| CliError::Internal(e.to_string()))?;
    write_output(&args.out, &comparison_csv(&rows))?;
    let joint = &rows[0];
    if joint.objective.is_none() {
        return Err(CliError::Infeasible(format!(
            "joint method produced no solution: {}",
            joint.note
        )));
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let values = if args.values.is_empty() {
        args.axis.default_values()
    } else {
        args.values.clone()
    };
    let cfg = SweepConfig {
        axis: args.axis,
        values,
        base: GenConfig {
            seed: args.seed,
            num_sites: args.sites,
            num_periods: args.periods,
            num_jobs: args.jobs,
            num_classes: args.classes,
            scenario: args.scenario,
        },
        params: args.solver.params(0),
        repetitions: args.repetitions,
    };
    // Rows stream out as they finish so interrupted sweeps keep their
    // completed cells.
    let mut sink: Box<dyn std::io::Write> = match &args.out {
        Some(path) => Box::new(fs::File::create(path).map_err(|e| {
            CliError::Usage(format!("cannot write {}: {e}", path.display()))
        })?),
        None => Box::new(std::io::stdout()),
    };
    writeln!(sink, "{SWEEP_CSV_HEADER}")
        .map_err(|e| CliError::Internal(format!("write: {e}")))?;
    let mut write_err = None;
    run_sweep(&cfg, |row| {
        if write_err.is_none() {
            let res = writeln!(sink, "{}", sweep_csv_row(row)).and_then(|_| sink.flush());
            if let Err(e) = res {
                write_err = Some(e);
            }
        }
    });
    match write_err {
        Some(e) => Err(CliError::Internal(format!("write: {e}"))),
        None => Ok(()),
    }
}

#[derive(Deserialize)]
struct SolutionDoc {
    solution: Solution,
}

fn cmd_validate(args: ValidateArgs) -> Result<(), CliError> {
    let inst = read_instance(&args.instance)?;
    let text = fs::read_to_string(&args.solution)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", args.solution.display())))?;
    let solution = serde_json::from_str::<Solution>(&text)
        .or_else(|bare_err| {
            serde_json::from_str::<SolutionDoc>(&text)
                .map(|doc| doc.solution)
                .map_err(|_| bare_err)
        })
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.solution.display())))?;
    let report = check_solution(&inst, &solution, args.tol)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.solution.display())))?;
    print!("{report}");
    let metrics = compute_metrics(&inst, &solution);
    println!(
        "objective_total={} emissions_kg={}",
        metrics.objective_total, metrics.emissions_kg
    );
    if report.is_feasible() {
        Ok(())
    } else {
        Err(CliError::Infeasible(format!(
            "solution violates families {:?}",
            report.families()
        )))
    }
}

fn cmd_export_mps(args: ExportMpsArgs) -> Result<(), CliError> {
    let inst = read_instance(&args.instance)?;
    let report = validate_instance(&inst);
    if !report.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: invalid instance: {report}",
            args.instance.display()
        )));
    }
    let (model, _) = build(&inst, &BuildOptions::with_variant(&inst, args.variant))
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let text = export_mps(&model).map_err(|e| CliError::Internal(e.to_string()))?;
    write_output(&args.out, &text)
}

fn cmd_oracle(args: OracleArgs) -> Result<(), CliError> {
    let inst = read_instance(&args.instance)?;
    let result = enumeration_oracle(&inst, args.limit).map_err(|e| match e {
        OracleError::Infeasible => CliError::Infeasible(e.to_string()),
        OracleError::LimitExceeded { .. } => CliError::Usage(e.to_string()),
        OracleError::Lp(_) => CliError::Internal(e.to_string()),
    })?;
    log::info!("oracle objective={:.6}", result.objective);
    let doc = serde_json::json!({
        "objective": result.objective,
        "solution": result.solution,
    });
    let mut text = serde_json::to_string_pretty(&doc)
        .map_err(|e| CliError::Internal(format!("serialization: {e}")))?;
    text.push('\n');
    write_output(&args.out, &text)
}
