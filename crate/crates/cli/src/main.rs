use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lamol_core::evaluation::{verify_interval_bounds, write_bound_report, BoundChecks, EvalError, VerifyOptions};
use lamol_core::experiment::{
    resolve_out_dir, run_experiment, run_sweep, ExperimentConfig, ExperimentError, ExperimentOutcome, SweepParam,
    OUTPUT_SCHEMA_VERSION,
};
use lamol_core::trace_io::read_trace;

/// Locally adaptive multi-objective online learning experiments.
#[derive(Debug, Parser)]
#[command(name = "lamol", version)]
struct Cli {
    /// Parallel runs (default: available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory (overrides the config and LAMOL_OUT_DIR).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Global seed applied to the dataset generator and every run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Execute every run in a config and write traces, series, figures.
    Run { config: PathBuf },
    /// Check interval bounds on a stored trace. Exits 1 on any violation.
    Verify(VerifyArgs),
    /// Repeat a config across values of one parameter.
    Sweep {
        config: PathBuf,
        /// tau, gamma, eta, width or bins.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
    },
}

#[derive(Debug, Args)]
struct VerifyArgs {
    trace: PathBuf,
    #[arg(long)]
    lemma31: bool,
    #[arg(long)]
    lemma32: bool,
    #[arg(long)]
    thm33: bool,
    #[arg(long)]
    envelope: bool,
    /// Random intervals for traces longer than the exhaustive limit.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 512)]
    exhaustive_max: usize,
}

fn report(kind: &str, message: &str, code: u8) -> ExitCode {
    let json = serde_json::json!({
        "schema_version": OUTPUT_SCHEMA_VERSION,
        "error": kind,
        "message": message,
        "exit_code": code,
    });
    eprintln!("{json}");
    ExitCode::from(code)
}

fn fail(e: &ExperimentError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}

fn load(config: &Path, seed: Option<u64>) -> Result<(ExperimentConfig, PathBuf), ExperimentError> {
    let mut cfg = ExperimentConfig::load(config)?;
    if seed.is_some() {
        cfg.seed = seed;
    }
    let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

fn finish(outcome: &ExperimentOutcome) -> ExitCode {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "output: {}", outcome.out_dir.display());
    for t in &outcome.traces {
        let _ = writeln!(out, "run {}: {} steps, {:.0} ms", t.config.name, t.len(), t.elapsed_ms);
    }
    for r in &outcome.summary {
        let _ = writeln!(out, "  {} {} width={} total={:.6} max={:.6}", r.run_id, r.metric, r.width, r.total, r.max);
    }
    match outcome.solver_failure() {
        Some(e) => fail(&e),
        None => ExitCode::SUCCESS,
    }
}

fn cmd_run(cli: &Cli, config: &Path) -> ExitCode {
    let (cfg, base) = match load(config, cli.seed) {
        Ok(v) => v,
        Err(e) => return fail(&e),
    };
    let out = resolve_out_dir(&cfg, &base, cli.out.as_deref());
    match run_experiment(&cfg, &base, &out, cli.workers) {
        Ok(o) => finish(&o),
        Err(e) => fail(&e),
    }
}

fn cmd_sweep(cli: &Cli, config: &Path, param: &str, values: &[String]) -> ExitCode {
    let (cfg, base) = match load(config, cli.seed) {
        Ok(v) => v,
        Err(e) => return fail(&e),
    };
    let param = match SweepParam::parse(param) {
        Ok(p) => p,
        Err(e) => return fail(&e),
    };
    let values: Vec<String> = values.iter().filter(|v| !v.trim().is_empty()).cloned().collect();
    let out = resolve_out_dir(&cfg, &base, cli.out.as_deref());
    match run_sweep(&cfg, param, &values, &base, &out, cli.workers) {
        Ok(o) => finish(&o),
        Err(e) => fail(&e),
    }
}

fn cmd_verify(args: &VerifyArgs) -> ExitCode {
    let trace = match read_trace(&args.trace) {
        Ok(t) => t,
        Err(e) => return report("trace", &e.to_string(), 2),
    };
    let mut checks = BoundChecks {
        lemma31: args.lemma31,
        lemma32: args.lemma32,
        thm33: args.thm33,
        envelope: args.envelope,
    };
    if checks.is_empty() {
        // everything the trace supports
        let fixed_share = trace.fixed_eta.is_some() && trace.gamma.is_some_and(|g| g > 0.0);
        checks = BoundChecks { lemma31: fixed_share, lemma32: true, thm33: fixed_share, envelope: true };
    }
    let opts = VerifyOptions {
        checks,
        exhaustive_max_len: args.exhaustive_max,
        sample_count: args.samples,
        ..VerifyOptions::default()
    };
    let rep = match verify_interval_bounds(&trace, &opts) {
        Ok(r) => r,
        Err(e @ (EvalError::Unsupported(_) | EvalError::MissingWeights)) => {
            return report("unsupported", &e.to_string(), 2)
        }
        Err(e) => return report("verify", &e.to_string(), 2),
    };
    let mut out = std::io::stdout().lock();
    let _ = write_bound_report(&mut out, &rep);
    if rep.is_ok() {
        let _ = writeln!(out, "ok");
        ExitCode::SUCCESS
    } else {
        let _ = writeln!(out, "violations={}", rep.violations());
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.workers == Some(0) {
        return report("config", "--workers must be at least 1", 2);
    }
    match &cli.command {
        Command::Run { config } => cmd_run(&cli, config),
        Command::Verify(args) => cmd_verify(args),
        Command::Sweep { config, param, values } => cmd_sweep(&cli, config, param, values),
    }
}
