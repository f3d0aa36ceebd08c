//! Command-line front end.
//!
//! Every command writes its results into `--out` with a fixed layout and a
//! `manifest.json` describing the run. Wall-clock values are written only
//! when `--timings` is given, so repeated runs produce identical files.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::assess::{assess_plan, AssessmentReport};
use crate::driver::{solve_robust_tnep, SolveConfig, SolveLog, Termination};
use crate::error::{Error, Result};
use crate::grid::{CaseFormat, GridCase};
use crate::oracle::{exact_robust_plan, exact_worst_case, OracleBudget};
use crate::recourse::{ExpansionPlan, PlanFile};
use crate::uncertainty::{vertex_count, Budgets, Realization, RealizationFile, SampleMode};
use crate::worstcase::{default_starts, multistart_worst_case};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_LIMIT: i32 = 2;
pub const EXIT_CAP: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rtnep", version, about = "Robust transmission expansion planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the robust planning problem.
    Solve(SolveArgs),
    /// Sample realizations and dispatch a fixed plan against each.
    Assess(AssessArgs),
    /// Brute-force reference solutions for small cases.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Native,
    Matpower,
}

#[derive(Debug, Args)]
struct CaseArgs {
    #[arg(long)]
    case: PathBuf,
    /// Case file format; by default `.m` files are read as MATPOWER-like
    /// text and everything else as native JSON.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    gamma_d: usize,
    #[arg(long)]
    gamma_g: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    case: CaseArgs,
    /// Override the case's investment budget.
    #[arg(long)]
    budget: Option<f64>,
    /// Override the case's operating-cost weight.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, env = "RTNEP_EPS_OL", default_value_t = 1e-6)]
    eps_ol: f64,
    #[arg(long, env = "RTNEP_EPS_IL", default_value_t = 1e-12)]
    eps_il: f64,
    #[arg(long, env = "RTNEP_MIP_GAP", default_value_t = 1e-8)]
    mip_gap: f64,
    #[arg(long, env = "RTNEP_FEAS_TOL")]
    feas_tol: Option<f64>,
    /// Random starts for the worst-case search.
    #[arg(long, default_value_t = 0)]
    multistart: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "RTNEP_MAX_OUTER", default_value_t = 100)]
    max_outer: usize,
    #[arg(long, env = "RTNEP_MAX_INNER", default_value_t = 200)]
    max_inner: usize,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Record wall-clock times in the log and manifest.
    #[arg(long)]
    timings: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Within,
}

impl From<ModeArg> for SampleMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => SampleMode::ExactBudget,
            ModeArg::Within => SampleMode::WithinBudget,
        }
    }
}

#[derive(Debug, Args)]
struct AssessArgs {
    #[command(flatten)]
    case: CaseArgs,
    #[arg(long)]
    plan: PathBuf,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "within")]
    mode: ModeArg,
    /// Worst-case file whose operating cost is the reference. Without it the
    /// reference is computed: exactly when the vertex count is at most
    /// `--cap`, otherwise by a multistart search.
    #[arg(long)]
    worst: Option<PathBuf>,
    #[arg(long, default_value_t = 1_000_000)]
    cap: u128,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Subcommand)]
enum OracleCommand {
    /// Exact worst case of a plan (the empty plan by default).
    WorstCase(OracleWorstArgs),
    /// Exact robust plan by enumerating every affordable plan.
    RobustPlan(OraclePlanArgs),
}

#[derive(Debug, Args)]
struct OracleWorstArgs {
    #[command(flatten)]
    case: CaseArgs,
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Largest number of vertices to enumerate.
    #[arg(long, default_value_t = 1_000_000)]
    cap: u128,
}

#[derive(Debug, Args)]
struct OraclePlanArgs {
    #[command(flatten)]
    case: CaseArgs,
    #[arg(long, default_value_t = 1_000_000)]
    cap: u128,
    /// Largest number of plans to enumerate.
    #[arg(long, default_value_t = 1 << 20)]
    cap_plans: u128,
}

/// Worst realization file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorstFile {
    pub operating_cost: f64,
    pub total_cost: f64,
    pub realization: RealizationFile,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Messages go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Solve(a) => cmd_solve(&a),
        Command::Assess(a) => cmd_assess(&a),
        Command::Oracle(OracleCommand::WorstCase(a)) => cmd_oracle_worst(&a),
        Command::Oracle(OracleCommand::RobustPlan(a)) => cmd_oracle_plan(&a),
    };
    match outcome {
        Ok(code) => code,
        Err(e @ Error::CapExceeded { .. }) => {
            eprintln!("error: {e}");
            EXIT_CAP
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

struct LoadedCase {
    case: GridCase,
    sha256: String,
    budgets: Budgets,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

fn load_case(args: &CaseArgs) -> Result<LoadedCase> {
    let bytes = read(&args.case)?;
    let format = match args.format {
        Some(FormatArg::Native) => CaseFormat::NativeJson,
        Some(FormatArg::Matpower) => CaseFormat::MatpowerLike,
        None if args.case.extension().is_some_and(|e| e == "m") => CaseFormat::MatpowerLike,
        None => CaseFormat::NativeJson,
    };
    let case = GridCase::load(&args.case, format)?;
    for w in case.warnings() {
        eprintln!("warning: {w}");
    }
    let budgets = Budgets::new(args.gamma_d, args.gamma_g);
    budgets.check(&case)?;
    Ok(LoadedCase {
        case,
        sha256: format!("{:x}", Sha256::digest(&bytes)),
        budgets,
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
        location: format!("{} line {} column {}", path.display(), e.line(), e.column()),
        message: e.to_string(),
    })
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|source| Error::Io { path, source })
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("output records serialize");
    text.push('\n');
    write(dir, name, text.as_bytes())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_owned(),
        source,
    })
}

fn unix_seconds(t: SystemTime) -> f64 {
    t.duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

fn manifest(command: &str, loaded: &LoadedCase, seed: Option<u64>, config: Value) -> Value {
    json!({
        "tool": "rtnep",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "case_sha256": loaded.sha256,
        "seed": seed,
        "config": config,
    })
}

fn add_timestamps(manifest: &mut Value, started: SystemTime) {
    manifest["started_unix"] = json!(unix_seconds(started));
    manifest["finished_unix"] = json!(unix_seconds(SystemTime::now()));
}

fn worst_file(case: &GridCase, plan: &ExpansionPlan, r: &Realization, cost: f64) -> WorstFile {
    WorstFile {
        operating_cost: cost,
        total_cost: plan.investment_cost + case.sigma * cost,
        realization: RealizationFile::new(case, r),
    }
}

fn log_csv(log: &SolveLog) -> Result<Vec<u8>> {
    let to_err = |e: csv::Error| Error::Dimension(format!("writing log: {e}"));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "k",
        "lower_bound",
        "upper_bound",
        "gap",
        "investment_cost",
        "worst_cost",
        "inner_iters",
        "master_nodes",
        "wall_ms",
    ])
    .map_err(to_err)?;
    for r in &log.records {
        w.write_record([
            r.k.to_string(),
            r.lower_bound.to_string(),
            r.upper_bound.to_string(),
            r.gap.to_string(),
            r.investment_cost.to_string(),
            r.worst_cost.to_string(),
            r.inner_iters.to_string(),
            r.master_nodes.to_string(),
            r.wall_ms.to_string(),
        ])
        .map_err(to_err)?;
    }
    w.into_inner().map_err(|e| Error::Dimension(format!("writing log: {e}")))
}

fn cmd_solve(a: &SolveArgs) -> Result<i32> {
    let started = SystemTime::now();
    let mut loaded = load_case(&a.case)?;
    if let Some(b) = a.budget {
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::Dimension(format!("budget must be finite and nonnegative, got {b}")));
        }
        loaded.case.investment_budget = Some(b);
    }
    if let Some(s) = a.sigma {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::Dimension(format!("sigma must be positive, got {s}")));
        }
        loaded.case.sigma = s;
    }
    let mut config = SolveConfig::new(loaded.budgets);
    config.eps_ol = a.eps_ol;
    config.eps_il = a.eps_il;
    config.tolerances.mip_gap_tol = a.mip_gap;
    if let Some(t) = a.feas_tol {
        config.tolerances.feas_tol = t;
    }
    config.multistart = a.multistart;
    config.seed = a.seed;
    config.max_outer = a.max_outer;
    config.max_inner = a.max_inner;
    if let Some(t) = a.time_limit {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Dimension(format!("time limit must be positive, got {t}")));
        }
        config.time_limit = Some(Duration::from_secs_f64(t));
    }
    let case = &loaded.case;
    let mut report = solve_robust_tnep(case, &config)?;
    if !a.timings {
        for r in &mut report.log.records {
            r.wall_ms = 0;
        }
        report.log.total_wall_ms = 0;
    }

    let out = &a.case.out;
    create_dir(out)?;
    write_json(out, "plan.json", &PlanFile::new(case, &report.plan))?;
    write_json(
        out,
        "worst.json",
        &worst_file(case, &report.plan, &report.worst, report.worst_dispatch.operating_cost),
    )?;
    write(out, "log.csv", &log_csv(&report.log)?)?;
    write_json(out, "log.json", &report.log)?;
    let mut m = manifest(
        "solve",
        &loaded,
        Some(a.seed),
        json!({
            "gamma_d": config.budgets.gamma_d,
            "gamma_g": config.budgets.gamma_g,
            "investment_budget": case.investment_budget,
            "sigma": case.sigma,
            "eps_ol": config.eps_ol,
            "eps_il": config.eps_il,
            "mip_gap": config.tolerances.mip_gap_tol,
            "feas_tol": config.tolerances.feas_tol,
            "multistart": config.multistart,
            "max_outer": config.max_outer,
            "max_inner": config.max_inner,
            "time_limit_s": a.time_limit,
        }),
    );
    m["termination"] = json!(report.log.termination);
    m["final_gap"] = json!(report.log.final_gap);
    m["total_cost"] = json!(report.total_cost);
    if a.timings {
        add_timestamps(&mut m, started);
    }
    write_json(out, "manifest.json", &m)?;

    match report.log.termination {
        Termination::Converged => Ok(EXIT_OK),
        t => {
            eprintln!("solve stopped before convergence: {t:?}, gap {}", report.log.final_gap);
            Ok(EXIT_LIMIT)
        }
    }
}

fn cmd_assess(a: &AssessArgs) -> Result<i32> {
    let loaded = load_case(&a.case)?;
    let case = &loaded.case;
    let plan = read_json::<PlanFile>(&a.plan)?.to_plan(case)?;
    let (reference, source) = match &a.worst {
        Some(path) => (read_json::<WorstFile>(path)?.operating_cost, "file"),
        None if vertex_count(case, loaded.budgets) <= a.cap => (
            exact_worst_case(case, &plan, loaded.budgets, a.cap)?.dispatch.operating_cost,
            "enumeration",
        ),
        None => {
            let starts = default_starts(case, loaded.budgets, 10, a.seed);
            let search = multistart_worst_case(case, &plan, loaded.budgets, &starts, 1e-12, 200)?;
            (search.best.dispatch.operating_cost, "search")
        }
    };
    let report: AssessmentReport = assess_plan(
        case,
        &plan,
        loaded.budgets,
        a.samples,
        a.seed,
        a.mode.into(),
        reference,
        a.jobs,
    )?;
    let out = &a.case.out;
    create_dir(out)?;
    let csv_err = |e: csv::Error| Error::Dimension(format!("writing assessment: {e}"));
    let mut samples = Vec::new();
    report.write_samples_csv(&mut samples).map_err(csv_err)?;
    write(out, "assess.csv", &samples)?;
    let mut hist = Vec::new();
    report.write_histogram_csv(&mut hist).map_err(csv_err)?;
    write(out, "assess_histogram.csv", &hist)?;
    write_json(out, "assess_summary.json", &report)?;
    let m = manifest(
        "assess",
        &loaded,
        Some(a.seed),
        json!({
            "gamma_d": loaded.budgets.gamma_d,
            "gamma_g": loaded.budgets.gamma_g,
            "samples": a.samples,
            "mode": SampleMode::from(a.mode),
            "reference_source": source,
            "plan_sha256": format!("{:x}", Sha256::digest(read(&a.plan)?)),
        }),
    );
    write_json(out, "manifest.json", &m)?;
    if report.exceedances > 0 {
        eprintln!(
            "{} of {} samples exceed the worst-case reference {}",
            report.exceedances, report.samples, reference
        );
    }
    Ok(EXIT_OK)
}

fn cmd_oracle_worst(a: &OracleWorstArgs) -> Result<i32> {
    let loaded = load_case(&a.case)?;
    let case = &loaded.case;
    let plan = match &a.plan {
        Some(p) => read_json::<PlanFile>(p)?.to_plan(case)?,
        None => ExpansionPlan::empty(case),
    };
    let worst = exact_worst_case(case, &plan, loaded.budgets, a.cap)?;
    let out = &a.case.out;
    create_dir(out)?;
    write_json(
        out,
        "worst.json",
        &worst_file(case, &plan, &worst.realization, worst.dispatch.operating_cost),
    )?;
    let m = manifest(
        "oracle worst-case",
        &loaded,
        None,
        json!({
            "gamma_d": loaded.budgets.gamma_d,
            "gamma_g": loaded.budgets.gamma_g,
            "cap": a.cap.to_string(),
            "vertices": vertex_count(case, loaded.budgets).to_string(),
        }),
    );
    write_json(out, "manifest.json", &m)?;
    Ok(EXIT_OK)
}

fn cmd_oracle_plan(a: &OraclePlanArgs) -> Result<i32> {
    let loaded = load_case(&a.case)?;
    let case = &loaded.case;
    let caps = OracleBudget {
        max_vertices: a.cap,
        max_plans: a.cap_plans,
        time_limit: None,
    };
    let best = exact_robust_plan(case, loaded.budgets, caps)?;
    let out = &a.case.out;
    create_dir(out)?;
    write_json(out, "plan.json", &PlanFile::new(case, &best.plan))?;
    write_json(out, "worst.json", &worst_file(case, &best.plan, &best.worst, best.worst_cost))?;
    let mut m = manifest(
        "oracle robust-plan",
        &loaded,
        None,
        json!({
            "gamma_d": loaded.budgets.gamma_d,
            "gamma_g": loaded.budgets.gamma_g,
            "cap": a.cap.to_string(),
            "cap_plans": a.cap_plans.to_string(),
            "vertices": vertex_count(case, loaded.budgets).to_string(),
        }),
    );
    m["total_cost"] = json!(best.total_cost);
    m["plans_evaluated"] = json!(best.plans_evaluated);
    write_json(out, "manifest.json", &m)?;
    Ok(EXIT_OK)
}
