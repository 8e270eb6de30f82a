//! Trace persistence: one CSV row per step plus a `key=value` sidecar
//! (`<trace>.meta`) holding the run config and status.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a trace
//! read back compares equal to the one written (apart from thinned weights).
//! Wall-clock time is not stored; both files depend only on the run.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::engine::{RunConfig, RunStatus, RunTrace, StepRecord};
use crate::ingest::{parse_timestamp, TIMESTAMP_FORMAT};
use crate::minimax::PredictionPolicy;
use crate::objectives::{build_objective_set, GroupFunction, LabelRange};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub fn meta_path(trace: &Path) -> PathBuf {
    let mut s = trace.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fmt_policy(p: &PredictionPolicy) -> String {
    match p {
        PredictionPolicy::Deterministic { value } => value.to_string(),
        PredictionPolicy::Mixed { support, probs } => support
            .iter()
            .zip(probs)
            .map(|(s, w)| format!("{s}:{w}"))
            .collect::<Vec<_>>()
            .join(";"),
    }
}

fn parse_policy(s: &str) -> Option<PredictionPolicy> {
    if !s.contains(':') {
        return s.parse().ok().map(|value| PredictionPolicy::Deterministic { value });
    }
    let mut support = Vec::new();
    let mut probs = Vec::new();
    for part in s.split(';') {
        let (a, b) = part.split_once(':')?;
        support.push(a.parse().ok()?);
        probs.push(b.parse().ok()?);
    }
    Some(PredictionPolicy::Mixed { support, probs })
}

/// Writes the trace CSV and its sidecar. Weight columns are filled on the
/// first step, every `config.weight_thin`-th step after it, and the last one.
pub fn write_trace(trace: &RunTrace, path: &Path) -> Result<(), TraceError> {
    let io = |source| TraceError::Io { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = [
        "t", "timestamp", "y", "baseline", "p", "p_mean", "policy", "eta", "solver_value", "solver_residual",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(trace.group_ids.iter().map(|g| format!("g:{g}")));
    for prefix in ["loss", "real", "q"] {
        header.extend(trace.objective_ids.iter().map(|o| format!("{prefix}:{o}")));
    }
    w.write_record(&header)?;
    let thin = trace.config.weight_thin.max(1);
    let last = trace.steps.len().saturating_sub(1);
    for (i, s) in trace.steps.iter().enumerate() {
        let mut row = vec![
            s.t.to_string(),
            s.timestamp.map(|t| t.format(TIMESTAMP_FORMAT).to_string()).unwrap_or_default(),
            s.y.to_string(),
            fmt_opt(s.baseline),
            s.p.to_string(),
            s.p_mean().to_string(),
            fmt_policy(&s.policy),
            s.eta.to_string(),
            s.solver_value.to_string(),
            s.solver_residual.to_string(),
        ];
        row.extend(s.group_values.iter().map(|v| v.to_string()));
        row.extend(s.losses.iter().map(|v| v.to_string()));
        row.extend(s.realized.iter().map(|v| v.to_string()));
        if i % thin == 0 || i == last {
            row.extend(s.q.iter().map(|v| v.to_string()));
        } else {
            row.extend(std::iter::repeat_n(String::new(), trace.objective_ids.len()));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(io)?;

    let mp = meta_path(path);
    let mio = |source| TraceError::Io { path: mp.clone(), source };
    let mut m = std::fs::File::create(&mp).map_err(mio)?;
    let config = serde_json::to_string(&trace.config).expect("config serialises");
    let status = serde_json::to_string(&trace.status).expect("status serialises");
    let lines = [
        format!("schema_version={TRACE_SCHEMA_VERSION}"),
        format!("config={config}"),
        format!("status={status}"),
        format!("range={},{}", trace.range.a, trace.range.b),
        format!("groups={}", serde_json::to_string(&trace.group_ids).expect("ids serialise")),
        format!("fixed_eta={}", fmt_opt(trace.fixed_eta)),
        format!("gamma={}", fmt_opt(trace.gamma)),
    ];
    for l in lines {
        writeln!(m, "{l}").map_err(mio)?;
    }
    Ok(())
}

fn read_meta(path: &Path) -> Result<BTreeMap<String, String>, TraceError> {
    let f = std::fs::File::open(path).map_err(|source| TraceError::Io { path: path.to_path_buf(), source })?;
    let mut out = BTreeMap::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|source| TraceError::Io { path: path.to_path_buf(), source })?;
        if let Some((k, v)) = line.split_once('=') {
            out.insert(k.trim().to_string(), v.to_string());
        }
    }
    Ok(out)
}

/// Reads a trace written by [`write_trace`]. Steps whose weights were thinned
/// come back with an empty `q`.
pub fn read_trace(path: &Path) -> Result<RunTrace, TraceError> {
    let mp = meta_path(path);
    let fmt_err = |p: &Path, message: String| TraceError::Format { path: p.to_path_buf(), message };
    let meta = read_meta(&mp)?;
    let get = |k: &str| meta.get(k).ok_or_else(|| fmt_err(&mp, format!("missing key `{k}`")));
    let version: u32 = get("schema_version")?.parse().map_err(|_| fmt_err(&mp, "bad schema_version".into()))?;
    if version != TRACE_SCHEMA_VERSION {
        return Err(fmt_err(&mp, format!("unsupported schema version {version}")));
    }
    let config: RunConfig = serde_json::from_str(get("config")?).map_err(|e| fmt_err(&mp, e.to_string()))?;
    let status: RunStatus = serde_json::from_str(get("status")?).map_err(|e| fmt_err(&mp, e.to_string()))?;
    let group_ids: Vec<String> = serde_json::from_str(get("groups")?).map_err(|e| fmt_err(&mp, e.to_string()))?;
    let range = {
        let r = get("range")?;
        let (a, b) = r.split_once(',').ok_or_else(|| fmt_err(&mp, "bad range".into()))?;
        let a: f64 = a.parse().map_err(|_| fmt_err(&mp, "bad range".into()))?;
        let b: f64 = b.parse().map_err(|_| fmt_err(&mp, "bad range".into()))?;
        LabelRange::new(a, b).map_err(|e| fmt_err(&mp, e.to_string()))?
    };
    let opt = |k: &str| -> Result<Option<f64>, TraceError> {
        match meta.get(k).map(String::as_str) {
            None | Some("") => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| fmt_err(&mp, format!("bad `{k}`"))),
        }
    };
    let fixed_eta = opt("fixed_eta")?;
    let gamma = opt("gamma")?;

    // Only ids matter for rebuilding the objective list; group values are in
    // the CSV.
    let placeholders: Vec<GroupFunction> = group_ids.iter().map(|g| GroupFunction::constant(g.clone(), 0.0)).collect();
    let objectives = build_objective_set(&config.problem, &placeholders).map_err(|e| fmt_err(&mp, e.to_string()))?;
    let objective_ids: Vec<String> = objectives.iter().map(|o| o.id.clone()).collect();
    let (ng, no) = (group_ids.len(), objective_ids.len());

    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let expected = 10 + ng + 3 * no;
    if headers.len() != expected {
        return Err(fmt_err(path, format!("expected {expected} columns, found {}", headers.len())));
    }
    for (k, id) in objective_ids.iter().enumerate() {
        if headers[10 + ng + k] != format!("loss:{id}") {
            return Err(fmt_err(path, format!("column {} should be loss:{id}", 10 + ng + k)));
        }
    }
    let mut steps = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = n + 2;
        let bad = |what: &str| fmt_err(path, format!("line {line}: bad {what}"));
        let num = |i: usize, what: &str| -> Result<f64, TraceError> { rec[i].parse().map_err(|_| bad(what)) };
        let nums = |from: usize, k: usize, what: &str| -> Result<Vec<f64>, TraceError> {
            (from..from + k).map(|i| num(i, what)).collect()
        };
        let q_start = 10 + ng + 2 * no;
        let q = if rec[q_start].is_empty() { Vec::new() } else { nums(q_start, no, "weights")? };
        steps.push(StepRecord {
            t: rec[0].parse().map_err(|_| bad("t"))?,
            timestamp: if rec[1].is_empty() {
                None
            } else {
                Some(parse_timestamp(&rec[1]).ok_or_else(|| bad("timestamp"))?)
            },
            y: num(2, "y")?,
            baseline: if rec[3].is_empty() { None } else { Some(num(3, "baseline")?) },
            p: num(4, "p")?,
            policy: parse_policy(&rec[6]).ok_or_else(|| bad("policy"))?,
            eta: num(7, "eta")?,
            solver_value: num(8, "solver_value")?,
            solver_residual: num(9, "solver_residual")?,
            group_values: nums(10, ng, "group value")?,
            losses: nums(10 + ng, no, "loss")?,
            realized: nums(10 + ng + no, no, "realized loss")?,
            q,
        });
    }
    Ok(RunTrace {
        config,
        objective_ids,
        objectives,
        group_ids,
        range,
        fixed_eta,
        gamma,
        steps,
        status,
        elapsed_ms: 0.0,
    })
}

/// Whether every step carries its weight vector.
pub fn has_full_weights(trace: &RunTrace) -> bool {
    trace.steps.iter().all(|s| s.q.len() == trace.objective_ids.len())
}
