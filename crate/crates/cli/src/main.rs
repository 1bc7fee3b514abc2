//! Config-driven front end for the bound-verification engine.
//!
//! Exit codes: 0 every check passed; 1 a mathematical check failed (the
//! report carries the witness); 2 invalid config, parameters, or hypothesis;
//! 3 enumeration budget exceeded. Set HJ_WORKERS to parallelize sampling
//! and fuzzing; results never depend on the worker count.

mod config;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::{ConfigError, ExperimentConfig, Mode, ReportFormat};
use hj_core::axioms::check_axioms;
use hj_core::bound::{
    evaluate, hm_bound, lt_bound, BoundParams, BoundValue, EngineError, TailVariant,
};
use hj_core::fuzz::run_fuzz;
use hj_core::mc::{mc_estimate, McError, McVerdict};
use hj_core::prob::ProbError;
use hj_core::proof::{passage_bound_battery, verify_decomposition};
use hj_core::report::{rat_to_string, to_json_pretty};
use hj_core::scalar::Scalar;

#[derive(Parser)]
#[command(
    name = "hj",
    version,
    about = "Exact and sampled verification of maximal tail bounds on metric semigroups"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the semigroup axioms of the configured instance.
    Axioms(RunArgs),
    /// Exactly evaluate the tail bound on an enumerable scenario.
    Evaluate(RunArgs),
    /// Replay the decomposition argument behind the bound.
    ProofCheck(RunArgs),
    /// Estimate both sides of the bound from seeded samples.
    Mc(RunArgs),
    /// Search random exact scenarios for counterexamples.
    Fuzz(RunArgs),
    /// Evaluate a parameter grid and tabulate every bound.
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Tail variant: max | order (default: both).
    #[arg(long)]
    variant: Option<String>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Sample count override (mc).
    #[arg(long)]
    samples: Option<u64>,
    /// Confidence level override (mc).
    #[arg(long)]
    level: Option<f64>,
    /// Case count override (fuzz).
    #[arg(long)]
    count: Option<u64>,
    /// Outcome budget override.
    #[arg(long)]
    budget: Option<u64>,
    /// Random trial count override (axioms).
    #[arg(long)]
    trials: Option<u64>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format: json | csv (sweep only; default json).
    #[arg(long)]
    format: Option<String>,
}

#[derive(Debug)]
enum RunError {
    Config(ConfigError),
    Engine(EngineError),
    Mc(McError),
    Usage(String),
    Io(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Engine(e) => write!(f, "{e}"),
            RunError::Mc(e) => write!(f, "{e}"),
            RunError::Usage(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<EngineError> for RunError {
    fn from(e: EngineError) -> Self {
        RunError::Engine(e)
    }
}

impl From<McError> for RunError {
    fn from(e: McError) -> Self {
        RunError::Mc(e)
    }
}

fn engine_exit_code(e: &EngineError) -> u8 {
    match e {
        EngineError::InternalCheck(_) => 1,
        EngineError::Prob(ProbError::BudgetExceeded { .. }) => 3,
        _ => 2,
    }
}

impl RunError {
    fn exit_code(&self) -> u8 {
        match self {
            RunError::Engine(e) => engine_exit_code(e),
            RunError::Mc(McError::Engine(e)) => engine_exit_code(e),
            _ => 2,
        }
    }
}

#[derive(Serialize)]
struct Tool {
    name: &'static str,
    version: &'static str,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: Tool,
    mode: String,
    config: &'a serde_json::Value,
    result: T,
}

struct Job {
    config: ExperimentConfig,
    raw: serde_json::Value,
    args: RunArgs,
    workers: usize,
}

impl Job {
    fn load(args: RunArgs, expected: Mode) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(&args.config)
            .map_err(|e| RunError::Io(format!("cannot read {}: {e}", args.config.display())))?;
        let config = ExperimentConfig::from_json(&text)?;
        if config.mode != expected {
            return Err(RunError::Usage(format!(
                "config mode {} does not match subcommand {expected}",
                config.mode
            )));
        }
        let raw: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| RunError::Config(ConfigError::Parse(e)))?;
        Ok(Job {
            config,
            raw,
            args,
            workers: workers_from_env(),
        })
    }

    fn seed(&self) -> u64 {
        self.args.seed.or(self.config.seed).unwrap_or(0)
    }

    fn variant(&self) -> Result<Option<TailVariant>, RunError> {
        match &self.args.variant {
            Some(text) => text
                .parse::<TailVariant>()
                .map(Some)
                .map_err(RunError::Usage),
            None => Ok(self.config.variant),
        }
    }

    fn format(&self) -> Result<ReportFormat, RunError> {
        match self.args.format.as_deref() {
            Some("json") => Ok(ReportFormat::Json),
            Some("csv") => Ok(ReportFormat::Csv),
            Some(other) => Err(RunError::Usage(format!(
                "unknown format {other:?} (want json|csv)"
            ))),
            None => Ok(self.config.format.unwrap_or(ReportFormat::Json)),
        }
    }

    fn emit<T: Serialize>(&self, mode: Mode, result: T) -> Result<(), RunError> {
        let envelope = Envelope {
            tool: Tool {
                name: "hj",
                version: env!("CARGO_PKG_VERSION"),
            },
            mode: mode.to_string(),
            config: &self.raw,
            result,
        };
        self.write_text(&to_json_pretty(&envelope))
    }

    fn write_text(&self, text: &str) -> Result<(), RunError> {
        let target = self.args.out.clone().or_else(|| {
            self.config.out.as_ref().map(PathBuf::from)
        });
        match target {
            Some(path) => {
                std::fs::write(&path, text)
                    .map_err(|e| RunError::Io(format!("cannot write {}: {e}", path.display())))?;
                eprintln!("report written to {}", path.display());
                Ok(())
            }
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn workers_from_env() -> usize {
    std::env::var("HJ_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&w| w >= 1)
        .unwrap_or(1)
}

fn exit(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run_axioms(job: &Job) -> Result<ExitCode, RunError> {
    let sg = job.config.instance()?;
    let trials = job.args.trials.or(job.config.trials).unwrap_or(1_000);
    let report = check_axioms(&sg, trials, job.seed());
    let pass = report.all_passed;
    job.emit(Mode::Axioms, report)?;
    Ok(exit(pass))
}

fn scenario_for(job: &Job) -> Result<hj_core::prob::Scenario, RunError> {
    let mut sc = job.config.scenario()?;
    if let Some(budget) = job.args.budget {
        sc = sc.with_budget(budget);
    }
    Ok(sc)
}

fn run_evaluate(job: &Job) -> Result<ExitCode, RunError> {
    let sc = scenario_for(job)?;
    let params = job.config.bound_params()?;
    let variants = match job.variant()? {
        Some(v) => vec![v],
        None => vec![TailVariant::MaxIncrement, TailVariant::OrderStatistic],
    };
    let mut results = BTreeMap::new();
    let mut pass = true;
    for variant in variants {
        let report = evaluate(&sc, &params, variant)?;
        pass &= report.holds;
        results.insert(variant.to_string(), report);
    }
    job.emit(Mode::Evaluate, results)?;
    Ok(exit(pass))
}

#[derive(Serialize)]
struct ProofCheckResult {
    decomposition: hj_core::proof::DecompositionReport,
    passage_bounds: Vec<hj_core::proof::PassageBounds>,
    all_passed: bool,
}

fn run_proof_check(job: &Job) -> Result<ExitCode, RunError> {
    let sc = scenario_for(job)?;
    let params = job.config.bound_params()?;
    let decomposition = verify_decomposition(&sc, &params)?;
    let passage_bounds = passage_bound_battery(&sc, &params)?;
    let all_passed =
        decomposition.all_passed && passage_bounds.iter().all(|pb| pb.all_passed);
    let result = ProofCheckResult {
        decomposition,
        passage_bounds,
        all_passed,
    };
    job.emit(Mode::ProofCheck, result)?;
    Ok(exit(all_passed))
}

fn run_mc(job: &Job) -> Result<ExitCode, RunError> {
    let sc = job.config.mc_scenario()?;
    let params = job.config.bound_params()?;
    let samples = job.args.samples.or(job.config.samples).unwrap_or(100_000);
    let level = job.args.level.or(job.config.level).unwrap_or(0.99);
    let report = mc_estimate(&sc, &params, samples, job.seed(), level, job.workers)?;
    let pass = report.verdict != McVerdict::ViolatesWithMargin;
    job.emit(Mode::Mc, report)?;
    Ok(exit(pass))
}

fn run_fuzz_mode(job: &Job) -> Result<ExitCode, RunError> {
    let count = job.args.count.or(job.config.count).unwrap_or(100);
    let limits = job.config.fuzz_limits();
    let summary = run_fuzz(job.seed(), count, &limits, job.workers)?;
    let pass = summary.all_passed;
    job.emit(Mode::Fuzz, summary)?;
    Ok(exit(pass))
}

#[derive(Serialize)]
struct SweepRow {
    scenario_id: usize,
    k: usize,
    n_vec: String,
    t_vec: String,
    s: String,
    variant: String,
    lhs: String,
    rhs: String,
    slack: String,
    holds: bool,
}

fn join_pipe<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("|")
}

fn sweep_rows(
    sc: &hj_core::prob::Scenario,
    id: usize,
    params: &BoundParams,
) -> Result<Vec<SweepRow>, RunError> {
    let shape = (
        params.block_count(),
        join_pipe(params.sizes().iter()),
        join_pipe(params.thresholds().iter()),
        params.increment_bound().to_string(),
    );
    let row = |variant: &str, lhs: String, rhs: String, slack: String, holds: bool| SweepRow {
        scenario_id: id,
        k: shape.0,
        n_vec: shape.1.clone(),
        t_vec: shape.2.clone(),
        s: shape.3.clone(),
        variant: variant.to_string(),
        lhs,
        rhs,
        slack,
        holds,
    };

    let mut rows = Vec::with_capacity(4);
    for variant in [TailVariant::MaxIncrement, TailVariant::OrderStatistic] {
        let report = evaluate(sc, params, variant)?;
        rows.push(row(
            &variant.to_string(),
            rat_to_string(&report.lhs),
            rat_to_string(&report.rhs),
            rat_to_string(&report.slack),
            report.holds,
        ));
    }

    let t = params.thresholds()[0].clone();
    let s: Scalar = params.increment_bound().clone();
    for (name, prior) in [
        ("lt", lt_bound(sc, &t, &s)?),
        ("hm", hm_bound(sc, params.total_size(), &t, &s)?),
    ] {
        let (rhs, slack) = match &prior.rhs {
            BoundValue::Finite(r) => (rat_to_string(r), rat_to_string(&(r - &prior.lhs))),
            BoundValue::Infinite => ("inf".to_string(), "inf".to_string()),
        };
        rows.push(row(
            name,
            rat_to_string(&prior.lhs),
            rhs,
            slack,
            prior.holds,
        ));
    }
    Ok(rows)
}

fn run_sweep(job: &Job) -> Result<ExitCode, RunError> {
    let sc = scenario_for(job)?;
    let points = job.config.grid_points()?;
    let mut rows = Vec::new();
    for (id, params) in points.iter().enumerate() {
        rows.extend(sweep_rows(&sc, id, params)?);
    }
    let pass = rows.iter().all(|r| r.holds);

    match job.format()? {
        ReportFormat::Json => job.emit(Mode::Sweep, rows)?,
        ReportFormat::Csv => {
            let mut text =
                String::from("scenario-id,k,n_vec,t_vec,s,variant,lhs,rhs,slack,holds\n");
            for r in &rows {
                text.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    r.scenario_id,
                    r.k,
                    r.n_vec,
                    r.t_vec,
                    r.s,
                    r.variant,
                    r.lhs,
                    r.rhs,
                    r.slack,
                    r.holds
                ));
            }
            job.write_text(&text)?;
        }
    }
    Ok(exit(pass))
}

fn dispatch(command: Command) -> Result<ExitCode, RunError> {
    let (args, mode) = match command {
        Command::Axioms(a) => (a, Mode::Axioms),
        Command::Evaluate(a) => (a, Mode::Evaluate),
        Command::ProofCheck(a) => (a, Mode::ProofCheck),
        Command::Mc(a) => (a, Mode::Mc),
        Command::Fuzz(a) => (a, Mode::Fuzz),
        Command::Sweep(a) => (a, Mode::Sweep),
    };
    let job = Job::load(args, mode)?;
    match mode {
        Mode::Axioms => run_axioms(&job),
        Mode::Evaluate => run_evaluate(&job),
        Mode::ProofCheck => run_proof_check(&job),
        Mode::Mc => run_mc(&job),
        Mode::Fuzz => run_fuzz_mode(&job),
        Mode::Sweep => run_sweep(&job),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
