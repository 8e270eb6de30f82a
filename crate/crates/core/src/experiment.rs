//! Experiment configs: a dataset, a matrix of runs and the evaluation to
//! apply, executed into an output directory of traces, series, figures and a
//! summary. A `manifest.json` listing every file is written last.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{run_matrix_with_workers, EngineError, RunConfig, RunStatus, RunTrace};
use crate::evaluation::{
    global_ma_error, global_mc_error, local_multiaccuracy_error, local_objective_error, local_prediction_error,
    total_error, write_series_csv, ErrorSeries, EvalError, EvalMode, WindowSpec, WindowUnit,
};
use crate::ingest::{
    gefcom_from_rows, gen_jump_shift, gen_switch, load_compas, load_gefcom, synth_gefcom_rows, GefcomOptions,
    IngestError, SampleStream, ShiftScenario,
};
use crate::objectives::{CostKind, ProblemSpec};
use crate::svg::{render, Chart};
use crate::trace_io::write_trace;
use crate::weights::EtaMode;

pub const OUTPUT_SCHEMA_VERSION: u32 = 1;

/// Relative dataset paths resolve against this directory when it is set.
pub const DATA_DIR_ENV: &str = "LAMOL_DATA_DIR";
/// Overrides the config's output directory.
pub const OUT_DIR_ENV: &str = "LAMOL_OUT_DIR";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("run `{run}` stopped at step {step}: {reason}")]
    Solver { run: String, step: usize, reason: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl ExperimentError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Data(_) | ExperimentError::Io { .. } => 3,
            ExperimentError::Solver { .. } => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentError::Config(_) => "config",
            ExperimentError::Data(_) => "data",
            ExperimentError::Solver { .. } => "solver",
            ExperimentError::Io { .. } => "io",
        }
    }

    /// One-line JSON report for machine consumers.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "schema_version": OUTPUT_SCHEMA_VERSION,
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        })
        .to_string()
    }
}

impl From<IngestError> for ExperimentError {
    fn from(e: IngestError) -> Self {
        ExperimentError::Data(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

fn default_switch_t() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetConfig {
    Switch {
        #[serde(default = "default_switch_t")]
        t: usize,
    },
    JumpShift(ShiftScenario),
    /// Hourly load and temperature. Without `load_path` a synthetic year of
    /// `synthetic_hours` is generated; without `forecast_path` the seasonal
    /// fallback baseline is used.
    Gefcom {
        #[serde(default)]
        load_path: Option<PathBuf>,
        #[serde(default)]
        forecast_path: Option<PathBuf>,
        #[serde(default)]
        synthetic_hours: Option<usize>,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        options: GefcomOptions,
    },
    Compas {
        path: PathBuf,
    },
}

impl DatasetConfig {
    /// Plot skip-prefix when the config leaves it unset.
    pub fn default_skip(&self) -> usize {
        match self {
            DatasetConfig::Switch { .. } => 0,
            DatasetConfig::JumpShift(_) => 30,
            DatasetConfig::Gefcom { .. } => 10,
            DatasetConfig::Compas { .. } => 2,
        }
    }

    pub fn default_unit(&self) -> WindowUnit {
        match self {
            DatasetConfig::Compas { .. } => WindowUnit::Days,
            _ => WindowUnit::Steps,
        }
    }

    fn with_seed(&self, seed: u64) -> DatasetConfig {
        let mut d = self.clone();
        match &mut d {
            DatasetConfig::JumpShift(sc) => sc.seed = seed,
            DatasetConfig::Gefcom { seed: s, .. } => *s = seed,
            _ => {}
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    LocalMa,
    LocalPred,
    LocalObjective,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::LocalMa => "local_ma",
            Metric::LocalPred => "local_pred",
            Metric::LocalObjective => "local_objective",
        }
    }
}

fn default_metrics() -> Vec<Metric> {
    vec![Metric::LocalMa]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Window widths `|I|`; empty means each run's `tau`.
    #[serde(default)]
    pub widths: Vec<usize>,
    #[serde(default)]
    pub unit: Option<WindowUnit>,
    #[serde(default)]
    pub skip: Option<usize>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub mode: EvalMode,
    #[serde(default)]
    pub pred_cost: CostKind,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            widths: Vec::new(),
            unit: None,
            skip: None,
            metrics: default_metrics(),
            mode: EvalMode::Auto,
            pred_cost: CostKind::Squared,
        }
    }
}

fn schema() -> u32 {
    OUTPUT_SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema")]
    pub schema_version: u32,
    pub name: String,
    pub dataset: DatasetConfig,
    pub runs: Vec<RunConfig>,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Replaces the generator seed and offsets every run's sampling seed.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// The config with `seed` applied to the dataset and runs.
    pub fn seeded(&self) -> ExperimentConfig {
        let mut c = self.clone();
        if let Some(s) = self.seed {
            c.dataset = c.dataset.with_seed(s);
            for r in &mut c.runs {
                r.seed = r.seed.wrapping_add(s);
            }
        }
        c
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.schema_version != OUTPUT_SCHEMA_VERSION {
            return Err(ExperimentError::Config(format!("unsupported schema_version {}", self.schema_version)));
        }
        if self.runs.is_empty() {
            return Err(ExperimentError::Config("no runs".into()));
        }
        let mut names = BTreeSet::new();
        for r in &self.runs {
            if r.name.is_empty() || !r.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.@=".contains(c)) {
                return Err(ExperimentError::Config(format!(
                    "run name `{}` must be non-empty and use [A-Za-z0-9-_.@=]",
                    r.name
                )));
            }
            if !names.insert(r.name.as_str()) {
                return Err(ExperimentError::Config(format!("duplicate run name `{}`", r.name)));
            }
            r.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        if self.evaluation.widths.contains(&0) {
            return Err(ExperimentError::Config("window width must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(ExperimentError::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn skip(&self) -> usize {
        self.evaluation.skip.unwrap_or_else(|| self.dataset.default_skip())
    }

    pub fn unit(&self) -> WindowUnit {
        self.evaluation.unit.unwrap_or_else(|| self.dataset.default_unit())
    }

    /// Window widths in evaluation order.
    pub fn widths(&self) -> Vec<usize> {
        if self.evaluation.widths.is_empty() {
            let set: BTreeSet<usize> = self.runs.iter().map(|r| r.tau).collect();
            set.into_iter().collect()
        } else {
            self.evaluation.widths.clone()
        }
    }
}

fn resolve_data_path(p: &Path, base_dir: &Path) -> PathBuf {
    if p.is_absolute() {
        return p.to_path_buf();
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(d) => PathBuf::from(d).join(p),
        None => base_dir.join(p),
    }
}

/// Output directory: explicit override, then the environment, then the
/// config, then `out/<name>` next to the config.
pub fn resolve_out_dir(cfg: &ExperimentConfig, base_dir: &Path, explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Some(d) = std::env::var_os(OUT_DIR_ENV) {
        return PathBuf::from(d);
    }
    match &cfg.out_dir {
        Some(p) if p.is_absolute() => p.clone(),
        Some(p) => base_dir.join(p),
        None => base_dir.join("out").join(&cfg.name),
    }
}

/// Builds the stream a dataset block describes.
pub fn prepare_stream(dataset: &DatasetConfig, base_dir: &Path) -> Result<SampleStream, ExperimentError> {
    let need = |p: &Path| -> Result<PathBuf, ExperimentError> {
        let r = resolve_data_path(p, base_dir);
        if r.exists() {
            Ok(r)
        } else {
            Err(ExperimentError::Config(format!("data file {} does not exist", r.display())))
        }
    };
    Ok(match dataset {
        DatasetConfig::Switch { t } => gen_switch(*t, 0).map_err(|e| ExperimentError::Config(e.to_string()))?,
        DatasetConfig::JumpShift(sc) => gen_jump_shift(sc).map_err(|e| ExperimentError::Config(e.to_string()))?,
        DatasetConfig::Gefcom { load_path, forecast_path, synthetic_hours, seed, options } => match load_path {
            Some(lp) => {
                let lp = need(lp)?;
                let fp = forecast_path.as_deref().map(need).transpose()?;
                load_gefcom(&lp, fp.as_deref(), options)?
            }
            None => {
                if forecast_path.is_some() {
                    return Err(ExperimentError::Config("forecast_path needs load_path".into()));
                }
                let rows = synth_gefcom_rows(*seed, synthetic_hours.unwrap_or(8760));
                gefcom_from_rows(&rows, None, options)?
            }
        },
        DatasetConfig::Compas { path } => load_compas(&need(path)?)?,
    })
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub run_id: String,
    pub metric: String,
    pub width: usize,
    pub windows: usize,
    pub total: f64,
    pub max: f64,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub out_dir: PathBuf,
    pub traces: Vec<RunTrace>,
    pub series: Vec<ErrorSeries>,
    pub summary: Vec<SummaryRow>,
    /// Paths relative to `out_dir`, in the order written.
    pub files: Vec<String>,
    pub elapsed_ms: f64,
}

impl ExperimentOutcome {
    /// The first aborted run, if any.
    pub fn solver_failure(&self) -> Option<ExperimentError> {
        self.traces.iter().find_map(|t| match &t.status {
            RunStatus::Aborted { step, reason } => Some(ExperimentError::Solver {
                run: t.config.name.clone(),
                step: *step,
                reason: reason.clone(),
            }),
            RunStatus::Completed => None,
        })
    }

    pub fn total(&self, run_id: &str, metric: &str, width: usize) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.run_id == run_id && r.metric == metric && r.width == width)
            .map(|r| r.total)
    }
}

struct OutWriter {
    dir: PathBuf,
    files: Vec<String>,
}

impl OutWriter {
    fn new(dir: &Path) -> Result<Self, ExperimentError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let manifest = dir.join("manifest.json");
        if manifest.exists() {
            std::fs::remove_file(&manifest).map_err(io_err(&manifest))?;
        }
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn path(&mut self, rel: &str) -> Result<PathBuf, ExperimentError> {
        let p = self.dir.join(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        self.files.push(rel.to_string());
        Ok(p)
    }

    fn text(&mut self, rel: &str, content: &str) -> Result<(), ExperimentError> {
        let p = self.path(rel)?;
        std::fs::write(&p, content).map_err(io_err(&p))
    }
}

fn evaluate_trace(
    trace: &RunTrace,
    cfg: &ExperimentConfig,
    widths: &[usize],
) -> Result<Vec<(usize, ErrorSeries)>, ExperimentError> {
    let unit = cfg.unit();
    let mut out = Vec::new();
    if trace.is_empty() {
        return Ok(out);
    }
    for &w in widths {
        let spec = WindowSpec { width: w, stride: 1, skip: cfg.skip(), unit };
        for m in &cfg.evaluation.metrics {
            let r = match m {
                Metric::LocalMa => local_multiaccuracy_error(trace, None, &spec, cfg.evaluation.mode),
                Metric::LocalPred => local_prediction_error(trace, &spec, cfg.evaluation.pred_cost, cfg.evaluation.mode),
                Metric::LocalObjective => local_objective_error(trace, &spec, cfg.evaluation.mode),
            };
            match r {
                Ok(s) => out.push((w, s)),
                // runs without a baseline have no prediction error
                Err(EvalError::MissingBaseline) => {}
                // an aborted run may be shorter than the window
                Err(EvalError::WindowTooWide { .. }) if !trace.is_completed() => {}
                Err(e) => return Err(ExperimentError::Config(format!("run `{}`: {e}", trace.config.name))),
            }
        }
    }
    Ok(out)
}

fn summarize(trace: &RunTrace, evaluated: &[(usize, ErrorSeries)]) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = evaluated
        .iter()
        .map(|(w, s)| SummaryRow {
            run_id: s.run_id.clone(),
            metric: s.metric.clone(),
            width: *w,
            windows: s.len(),
            total: total_error(s),
            max: s.max(),
        })
        .collect();
    if trace.is_completed() && !trace.is_empty() {
        let t = trace.len();
        let global = |metric: &str, v: f64| SummaryRow {
            run_id: trace.config.name.clone(),
            metric: metric.into(),
            width: t,
            windows: 1,
            total: v,
            max: v,
        };
        rows.push(global("global_ma", global_ma_error(trace)));
        if let Some(m) = trace.config.problem.bins() {
            if let Ok(v) = global_mc_error(trace, m) {
                rows.push(global("global_mc", v));
            }
        }
    }
    rows
}

fn write_summary(w: &mut OutWriter, rel: &str, rows: &[SummaryRow]) -> Result<(), ExperimentError> {
    let mut s = String::from("run_id,metric,width,windows,total,max\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{},{}", r.run_id, r.metric, r.width, r.windows, r.total, r.max);
    }
    w.text(rel, &s)
}

/// Runs every config in the matrix and writes all outputs under `out_dir`.
/// Solver aborts still produce outputs; check
/// [`ExperimentOutcome::solver_failure`].
pub fn run_experiment(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    out_dir: &Path,
    workers: Option<usize>,
) -> Result<ExperimentOutcome, ExperimentError> {
    let started = Instant::now();
    let cfg = cfg.seeded();
    cfg.validate()?;
    let stream = prepare_stream(&cfg.dataset, base_dir)?;
    if stream.is_empty() {
        return Err(ExperimentError::Data("dataset produced no records".into()));
    }
    let widths = cfg.widths();
    if cfg.unit() == WindowUnit::Steps {
        if let Some(&w) = widths.iter().find(|&&w| w > stream.len()) {
            return Err(ExperimentError::Config(format!("window width {w} exceeds stream length {}", stream.len())));
        }
    }
    let workers = workers.or(cfg.workers).unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));

    let mut writer = OutWriter::new(out_dir)?;
    let results = run_matrix_with_workers(&cfg.runs, &stream, workers);
    let mut traces = Vec::with_capacity(results.len());
    for r in results {
        traces.push(r.map_err(|e| match e {
            EngineError::Config { .. } => ExperimentError::Config(e.to_string()),
            other => ExperimentError::Data(other.to_string()),
        })?);
    }

    let mut all_series = Vec::new();
    let mut summary = Vec::new();
    for tr in &traces {
        let p = writer.path(&format!("traces/{}.csv", tr.config.name))?;
        write_trace(tr, &p).map_err(|e| ExperimentError::Data(e.to_string()))?;
        writer.files.push(format!("traces/{}.csv.meta", tr.config.name));
        let ev = evaluate_trace(tr, &cfg, &widths)?;
        summary.extend(summarize(tr, &ev));
        all_series.extend(ev);
    }

    let metrics: BTreeSet<Metric> = cfg.evaluation.metrics.iter().copied().collect();
    let mut series_out = Vec::new();
    for m in &metrics {
        for &w in &widths {
            let group: Vec<ErrorSeries> = all_series
                .iter()
                .filter(|(sw, s)| *sw == w && s.metric == m.as_str())
                .map(|(_, s)| s.clone())
                .collect();
            if group.is_empty() {
                continue;
            }
            let stem = format!("{}_w{w}", m.as_str());
            let p = writer.path(&format!("series/{stem}.csv"))?;
            write_series_csv(&p, &group).map_err(io_err(&p))?;
            let mut chart = Chart::new(
                format!("{} ({}, width {w})", m.as_str(), cfg.name),
                "window end",
                m.as_str(),
            );
            for s in &group {
                let s = s.skip(cfg.skip());
                chart = chart.line(s.run_id.clone(), s.ends.iter().map(|&e| e as f64).collect(), s.values.clone());
            }
            writer.text(&format!("figures/{stem}.svg"), &render(&chart))?;
            series_out.extend(group);
        }
    }
    write_summary(&mut writer, "summary.csv", &summary)?;

    let manifest = serde_json::json!({
        "schema_version": OUTPUT_SCHEMA_VERSION,
        "name": cfg.name,
        "records": stream.len(),
        "dropped_records": stream.dropped,
        "runs": traces.iter().map(|t| serde_json::json!({
            "name": t.config.name,
            "status": t.status,
            "steps": t.len(),
        })).collect::<Vec<_>>(),
        "files": writer.files,
    });
    let mp = out_dir.join("manifest.json");
    std::fs::write(&mp, serde_json::to_string_pretty(&manifest).expect("manifest serialises") + "\n").map_err(io_err(&mp))?;
    let files = writer.files;
    Ok(ExperimentOutcome {
        out_dir: out_dir.to_path_buf(),
        traces,
        series: series_out,
        summary,
        files,
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

/// Hyper-parameters a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Tau,
    Gamma,
    Eta,
    /// Evaluation window width; runs are not repeated.
    Width,
    Bins,
}

impl SweepParam {
    pub fn parse(s: &str) -> Result<Self, ExperimentError> {
        Ok(match s {
            "tau" => SweepParam::Tau,
            "gamma" => SweepParam::Gamma,
            "eta" => SweepParam::Eta,
            "width" | "interval" => SweepParam::Width,
            "bins" | "m" => SweepParam::Bins,
            _ => return Err(ExperimentError::Config(format!("unknown sweep parameter `{s}`"))),
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParam::Tau => "tau",
            SweepParam::Gamma => "gamma",
            SweepParam::Eta => "eta",
            SweepParam::Width => "width",
            SweepParam::Bins => "bins",
        }
    }
}

fn parse_num<T: std::str::FromStr>(param: SweepParam, v: &str) -> Result<T, ExperimentError> {
    v.trim()
        .parse()
        .map_err(|_| ExperimentError::Config(format!("bad {} value `{v}`", param.as_str())))
}

/// `run` with `param` set to `value`.
pub fn apply_param(run: &RunConfig, param: SweepParam, value: &str) -> Result<RunConfig, ExperimentError> {
    let mut r = run.clone();
    match param {
        SweepParam::Tau => r.tau = parse_num(param, value)?,
        SweepParam::Gamma => r.gamma = Some(parse_num(param, value)?),
        SweepParam::Eta => {
            r.eta = match value.trim() {
                "adaptive" => EtaMode::Adaptive,
                "width_based" => EtaMode::WidthBased,
                "non_adaptive_optimal" => EtaMode::NonAdaptiveOptimal { scale: 1.0 },
                "mc_optimal" => EtaMode::McOptimal,
                v => EtaMode::Fixed { value: parse_num(param, v)? },
            }
        }
        SweepParam::Bins => {
            let m: usize = parse_num(param, value)?;
            r.problem = match &r.problem {
                ProblemSpec::Mc { .. } => ProblemSpec::Mc { bins: m },
                ProblemSpec::McPred { cost, .. } => ProblemSpec::McPred { bins: m, cost: *cost },
                // bins only matter to calibration runs
                other => other.clone(),
            };
        }
        SweepParam::Width => {}
    }
    r.name = format!("{}@{}={}", run.name, param.as_str(), value.trim());
    Ok(r)
}

/// The sweep's expanded config: every run crossed with every value. Width
/// sweeps keep the runs and replace the evaluation widths.
pub fn expand_sweep(cfg: &ExperimentConfig, param: SweepParam, values: &[String]) -> Result<ExperimentConfig, ExperimentError> {
    let mut out = cfg.clone();
    if values.is_empty() {
        return Ok(out);
    }
    if param == SweepParam::Width {
        out.evaluation.widths = values.iter().map(|v| parse_num(param, v)).collect::<Result<_, _>>()?;
        return Ok(out);
    }
    out.runs = cfg
        .runs
        .iter()
        .flat_map(|r| values.iter().map(move |v| apply_param(r, param, v)))
        .collect::<Result<_, _>>()?;
    Ok(out)
}

/// Runs a sweep and additionally writes `sweep.csv` and a figure of total
/// local multiaccuracy error against the swept value, one line per base run.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    param: SweepParam,
    values: &[String],
    base_dir: &Path,
    out_dir: &Path,
    workers: Option<usize>,
) -> Result<ExperimentOutcome, ExperimentError> {
    if values.is_empty() {
        return run_experiment(cfg, base_dir, out_dir, workers);
    }
    let expanded = expand_sweep(cfg, param, values)?;
    // writing the extra files invalidates the manifest until it is rewritten
    let mut outcome = run_experiment(&expanded, base_dir, out_dir, workers)?;
    let mp = out_dir.join("manifest.json");
    std::fs::remove_file(&mp).map_err(io_err(&mp))?;

    let metric = Metric::LocalMa.as_str();
    let mut csv = String::from("run_id,param,value,metric,width,total\n");
    let mut chart = Chart::new(format!("total {metric} vs {}", param.as_str()), param.as_str(), "total error");
    for base in &cfg.runs {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for v in values {
            let x: f64 = v.trim().parse().unwrap_or(f64::NAN);
            let (run_id, widths) = match param {
                SweepParam::Width => (base.name.clone(), vec![parse_num::<usize>(param, v)?]),
                _ => {
                    let r = apply_param(base, param, v)?;
                    let ws = if cfg.evaluation.widths.is_empty() { vec![r.tau] } else { cfg.evaluation.widths.clone() };
                    (r.name, ws)
                }
            };
            // the figure follows the first width; the CSV has all of them
            for (k, width) in widths.into_iter().enumerate() {
                if let Some(total) = outcome.total(&run_id, metric, width) {
                    let _ = writeln!(csv, "{},{},{},{metric},{width},{total}", base.name, param.as_str(), v.trim());
                    if k == 0 {
                        xs.push(x);
                        ys.push(total);
                    }
                }
            }
        }
        chart = chart.line(base.name.clone(), xs, ys);
    }
    let sweep_csv = out_dir.join("sweep.csv");
    std::fs::write(&sweep_csv, csv).map_err(io_err(&sweep_csv))?;
    let fig_rel = format!("figures/sweep_{}.svg", param.as_str());
    let fig = out_dir.join(&fig_rel);
    std::fs::write(&fig, render(&chart)).map_err(io_err(&fig))?;
    outcome.files.push("sweep.csv".into());
    outcome.files.push(fig_rel);

    let manifest = serde_json::json!({
        "schema_version": OUTPUT_SCHEMA_VERSION,
        "name": cfg.name,
        "sweep": { "param": param.as_str(), "values": values },
        "runs": outcome.traces.iter().map(|t| serde_json::json!({
            "name": t.config.name,
            "status": t.status,
            "steps": t.len(),
        })).collect::<Vec<_>>(),
        "files": outcome.files,
    });
    std::fs::write(&mp, serde_json::to_string_pretty(&manifest).expect("manifest serialises") + "\n").map_err(io_err(&mp))?;
    Ok(outcome)
}
