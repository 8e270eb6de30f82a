//! Windowed diagnostics over finished traces, and interval-bound checks.
//!
//! All errors are reported in label-range units: residuals are divided by
//! the range width, so they are comparable across datasets.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::RunTrace;
use crate::objectives::{BinGrid, CostKind};
use crate::weights::check_simplex;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("window width {width} exceeds trace length {len}")]
    WindowTooWide { width: usize, len: usize },
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("trace has no baseline column")]
    MissingBaseline,
    #[error("calendar windows need a timestamp on every step")]
    MissingTimestamps,
    #[error("group index {0} out of range")]
    UnknownGroup(usize),
    #[error("trace is missing weight snapshots; rerun with weight_thin = 1")]
    MissingWeights,
    #[error("unsupported check: {0}")]
    Unsupported(String),
    #[error("invalid bins: {0}")]
    Bins(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowUnit {
    #[default]
    Steps,
    /// Width counts calendar days of the step timestamps.
    Days,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub width: usize,
    #[serde(default = "one")]
    pub stride: usize,
    /// Leading points dropped when plotting.
    #[serde(default)]
    pub skip: usize,
    #[serde(default)]
    pub unit: WindowUnit,
}

impl WindowSpec {
    pub fn steps(width: usize) -> Self {
        Self { width, stride: 1, skip: 0, unit: WindowUnit::Steps }
    }

    pub fn days(width: usize) -> Self {
        Self { width, stride: 1, skip: 0, unit: WindowUnit::Days }
    }

    pub fn with_skip(mut self, skip: usize) -> Self {
        self.skip = skip;
        self
    }
}

/// Which prediction the diagnostics score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Sampled predictions for deterministic traces, expectations otherwise.
    #[default]
    Auto,
    Realized,
    Expected,
}

impl EvalMode {
    fn use_expected(self, trace: &RunTrace) -> bool {
        match self {
            EvalMode::Auto => trace.is_randomized(),
            EvalMode::Realized => false,
            EvalMode::Expected => true,
        }
    }
}

/// One value per window, keyed by the 1-based index of the window's last step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSeries {
    pub metric: String,
    pub run_id: String,
    pub ends: Vec<usize>,
    pub values: Vec<f64>,
}

impl ErrorSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Drops the first `k` points.
    pub fn skip(&self, k: usize) -> ErrorSeries {
        let k = k.min(self.len());
        ErrorSeries {
            metric: self.metric.clone(),
            run_id: self.run_id.clone(),
            ends: self.ends[k..].to_vec(),
            values: self.values[k..].to_vec(),
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn value_at(&self, end: usize) -> Option<f64> {
        self.ends.binary_search(&end).ok().map(|i| self.values[i])
    }
}

/// Sum over all window positions.
pub fn total_error(series: &ErrorSeries) -> f64 {
    series.values.iter().sum()
}

pub fn write_series_csv(path: &Path, series: &[ErrorSeries]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["window_end", "value", "metric", "run_id"])?;
    for s in series {
        for (e, v) in s.ends.iter().zip(&s.values) {
            w.write_record([e.to_string(), v.to_string(), s.metric.clone(), s.run_id.clone()])?;
        }
    }
    w.flush()
}

/// Half-open step ranges `[start, end)` for every window of `spec`.
pub fn window_bounds(trace: &RunTrace, spec: &WindowSpec) -> Result<Vec<(usize, usize)>, EvalError> {
    if spec.width == 0 || spec.stride == 0 {
        return Err(EvalError::InvalidWindow("width and stride must be positive".into()));
    }
    match spec.unit {
        WindowUnit::Steps => {
            let t = trace.len();
            if spec.width > t {
                return Err(EvalError::WindowTooWide { width: spec.width, len: t });
            }
            Ok((spec.width..=t).step_by(spec.stride).map(|e| (e - spec.width, e)).collect())
        }
        WindowUnit::Days => {
            let days = day_index(trace)?;
            let span = days.last().map_or(0, |d| d + 1) as usize;
            if spec.width > span {
                return Err(EvalError::WindowTooWide { width: spec.width, len: span });
            }
            Ok(day_windows_forward(&days, spec.width as i64)
                .into_iter()
                .step_by(spec.stride)
                .collect())
        }
    }
}

/// Days since the first step's date, per step.
pub fn day_index(trace: &RunTrace) -> Result<Vec<i64>, EvalError> {
    let dates: Vec<_> = trace
        .steps
        .iter()
        .map(|s| s.timestamp.map(|t| t.date()))
        .collect::<Option<_>>()
        .ok_or(EvalError::MissingTimestamps)?;
    let Some(first) = dates.first().copied() else {
        return Ok(Vec::new());
    };
    Ok(dates.iter().map(|d| (*d - first).num_days()).collect())
}

/// One window per day that has steps and is at least `width - 1` days after
/// the first: the steps dated within the last `width` days up to it.
pub fn day_windows_forward(days: &[i64], width: i64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < days.len() {
        let d = days[i];
        let mut end = i;
        while end < days.len() && days[end] == d {
            end += 1;
        }
        while days[start] <= d - width {
            start += 1;
        }
        if d >= width - 1 {
            out.push((start, end));
        }
        i = end;
    }
    out
}

/// The same windows as [`day_windows_forward`], found scanning from the end.
pub fn day_windows_backward(days: &[i64], width: i64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut end = days.len();
    while end > 0 {
        let d = days[end - 1];
        if d < width - 1 {
            break;
        }
        let mut start = end;
        while start > 0 && days[start - 1] > d - width {
            start -= 1;
        }
        out.push((start, end));
        while end > 0 && days[end - 1] == d {
            end -= 1;
        }
    }
    out.reverse();
    out
}

fn prefix(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut acc = 0.0;
    for v in values {
        acc += v;
        out.push(acc);
    }
    out
}

/// Stride-1 sums of every width-`width` window, maintained incrementally.
pub fn sliding_sums(x: &[f64], width: usize) -> Vec<f64> {
    if width == 0 || width > x.len() {
        return Vec::new();
    }
    let mut s: f64 = x[..width].iter().sum();
    let mut out = Vec::with_capacity(x.len() - width + 1);
    out.push(s);
    for e in width..x.len() {
        s += x[e] - x[e - width];
        out.push(s);
    }
    out
}

/// `(y_t - p_t) / w` under `mode`.
pub fn residuals(trace: &RunTrace, mode: EvalMode) -> Vec<f64> {
    let w = trace.range.width();
    let expected = mode.use_expected(trace);
    trace
        .steps
        .iter()
        .map(|s| (s.y - if expected { s.p_mean() } else { s.p }) / w)
        .collect()
}

fn group_indices(trace: &RunTrace, groups: Option<&[usize]>) -> Result<Vec<usize>, EvalError> {
    match groups {
        None => Ok((0..trace.group_ids.len()).collect()),
        Some(g) => {
            if let Some(&bad) = g.iter().find(|&&i| i >= trace.group_ids.len()) {
                return Err(EvalError::UnknownGroup(bad));
            }
            Ok(g.to_vec())
        }
    }
}

fn finish(trace: &RunTrace, metric: &str, bounds: &[(usize, usize)], values: Vec<f64>) -> ErrorSeries {
    ErrorSeries {
        metric: metric.into(),
        run_id: trace.config.name.clone(),
        ends: bounds.iter().map(|b| trace.steps[b.1 - 1].t).collect(),
        values,
    }
}

/// Per window, `max_{f, sigma} (1/|I|) sum sigma f(x_t)(y_t - p_t)`, which is
/// the largest absolute group-weighted mean residual. `groups` restricts the
/// class to a subset of the trace's groups.
pub fn local_multiaccuracy_error(
    trace: &RunTrace,
    groups: Option<&[usize]>,
    window: &WindowSpec,
    mode: EvalMode,
) -> Result<ErrorSeries, EvalError> {
    let bounds = window_bounds(trace, window)?;
    let gs = group_indices(trace, groups)?;
    let res = residuals(trace, mode);
    let sums: Vec<Vec<f64>> = gs
        .iter()
        .map(|&g| prefix(trace.steps.iter().zip(&res).map(|(s, r)| s.group_values[g] * r)))
        .collect();
    let values = bounds
        .iter()
        .map(|&(a, b)| {
            let n = (b - a) as f64;
            sums.iter().map(|p| ((p[b] - p[a]) / n).abs()).fold(0.0, f64::max)
        })
        .collect();
    Ok(finish(trace, "local_ma", &bounds, values))
}

/// Per window, the mean of `c(p_t, y_t) - c(baseline_t, y_t)` in raw cost units.
pub fn local_prediction_error(
    trace: &RunTrace,
    window: &WindowSpec,
    cost: CostKind,
    mode: EvalMode,
) -> Result<ErrorSeries, EvalError> {
    let bounds = window_bounds(trace, window)?;
    let expected = mode.use_expected(trace);
    let diffs: Vec<f64> = trace
        .steps
        .iter()
        .map(|s| {
            let base = s.baseline.ok_or(EvalError::MissingBaseline)?;
            let c = if expected { s.policy.expect(|p| cost.raw(p, s.y)) } else { cost.raw(s.p, s.y) };
            Ok(c - cost.raw(base, s.y))
        })
        .collect::<Result<_, EvalError>>()?;
    let p = prefix(diffs.into_iter());
    let values = bounds.iter().map(|&(a, b)| (p[b] - p[a]) / (b - a) as f64).collect();
    Ok(finish(trace, "local_pred", &bounds, values))
}

/// Per window, the largest average objective loss over the whole objective set.
pub fn local_objective_error(trace: &RunTrace, window: &WindowSpec, mode: EvalMode) -> Result<ErrorSeries, EvalError> {
    let bounds = window_bounds(trace, window)?;
    let expected = mode != EvalMode::Realized;
    let sums: Vec<Vec<f64>> = (0..trace.objective_ids.len())
        .map(|k| prefix(trace.steps.iter().map(|s| if expected { s.losses[k] } else { s.realized[k] })))
        .collect();
    let values = bounds
        .iter()
        .map(|&(a, b)| {
            let n = (b - a) as f64;
            sums.iter().map(|p| (p[b] - p[a]) / n).fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Ok(finish(trace, "local_objective", &bounds, values))
}

/// Whole-trace multiaccuracy error on the sampled predictions.
pub fn global_ma_error(trace: &RunTrace) -> f64 {
    let t = trace.len() as f64;
    let res = residuals(trace, EvalMode::Realized);
    (0..trace.group_ids.len())
        .map(|g| (trace.steps.iter().zip(&res).map(|(s, r)| s.group_values[g] * r).sum::<f64>() / t).abs())
        .fold(0.0, f64::max)
}

/// Whole-trace multicalibration error with `m` bins on the sampled
/// predictions: residuals are measured against each bin's midpoint.
pub fn global_mc_error(trace: &RunTrace, m: usize) -> Result<f64, EvalError> {
    let grid = BinGrid::new(m).map_err(|e| EvalError::Bins(e.to_string()))?;
    let t = trace.len() as f64;
    let ng = trace.group_ids.len();
    let mut sums = vec![0.0; ng * m];
    for s in &trace.steps {
        let u = trace.range.normalize(s.p);
        let j = grid.bin_of(u);
        let r = trace.range.normalize(s.y) - grid.midpoint(j);
        for g in 0..ng {
            sums[g * m + j] += s.group_values[g] * r;
        }
    }
    Ok(sums.iter().map(|v| (v / t).abs()).fold(0.0, f64::max))
}

/// Which interval inequalities to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BoundChecks {
    pub lemma31: bool,
    pub lemma32: bool,
    pub thm33: bool,
    pub envelope: bool,
}

impl BoundChecks {
    pub fn all() -> Self {
        Self { lemma31: true, lemma32: true, thm33: true, envelope: true }
    }

    /// The checks that hold for any trace regardless of learner.
    pub fn solver_only() -> Self {
        Self { lemma32: true, ..Self::default() }
    }

    pub fn is_empty(&self) -> bool {
        !(self.lemma31 || self.lemma32 || self.thm33 || self.envelope)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub checks: BoundChecks,
    /// Traces up to this length are checked on every interval.
    pub exhaustive_max_len: usize,
    /// Random intervals drawn for longer traces, on top of every width-tau one.
    pub sample_count: usize,
    pub seed: u64,
    /// Absolute slack allowed on top of the solver tolerance.
    pub abs_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            checks: BoundChecks::all(),
            exhaustive_max_len: 512,
            sample_count: 10_000,
            seed: 0,
            abs_tol: 1e-6,
        }
    }
}

/// Worst case of one inequality over the checked intervals. Slack is
/// `rhs - lhs` of the inequality as stated, before any tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub intervals: usize,
    pub violations: usize,
    pub worst_slack: f64,
    /// 1-based inclusive `(r, s)` of the worst interval.
    pub worst_interval: Option<(usize, usize)>,
}

impl BoundCheck {
    fn new(name: &str) -> Self {
        Self { name: name.into(), intervals: 0, violations: 0, worst_slack: f64::INFINITY, worst_interval: None }
    }

    fn record(&mut self, slack: f64, allowance: f64, a: usize, b: usize) {
        self.intervals += 1;
        if slack < -allowance {
            self.violations += 1;
        }
        if slack < self.worst_slack {
            self.worst_slack = slack;
            self.worst_interval = Some((a + 1, b));
        }
    }
}

/// How often width-tau windows exceed the optimally tuned bound. The bound
/// assumes per-interval tuning no single run has, so it is informational.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub width: usize,
    pub windows: usize,
    pub exceed: usize,
    pub worst_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub exhaustive: bool,
    pub solver_tol: f64,
    pub simplex_violations: usize,
    pub checks: Vec<BoundCheck>,
    pub envelope: Option<EnvelopeReport>,
}

impl BoundReport {
    pub fn violations(&self) -> usize {
        self.simplex_violations + self.checks.iter().map(|c| c.violations).sum::<usize>()
    }

    pub fn is_ok(&self) -> bool {
        self.violations() == 0
    }

    pub fn check(&self, name: &str) -> Option<&BoundCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Evaluates the interval inequalities on a trace's expected losses and
/// weights.
///
/// The mixture bound (`lemma32`) is checked on every interval via a
/// max-subarray scan. The regret and combined bounds need the constant `eta`
/// and the mixing rate `gamma > 0` of a Fixed Share run; they are checked on
/// every interval for short traces and on every width-tau window plus
/// `sample_count` random intervals otherwise.
pub fn verify_interval_bounds(trace: &RunTrace, opts: &VerifyOptions) -> Result<BoundReport, EvalError> {
    let c = opts.checks;
    let t = trace.len();
    let n = trace.objective_ids.len();
    if trace.steps.iter().any(|s| s.q.len() != n) {
        return Err(EvalError::MissingWeights);
    }
    let needs_fs = c.lemma31 || c.thm33;
    let (eta, gamma) = match (trace.fixed_eta, trace.gamma) {
        (Some(e), Some(g)) if g > 0.0 => (e, g),
        _ if needs_fs => {
            return Err(EvalError::Unsupported(
                "regret bounds need a fixed-eta Fixed Share trace with gamma > 0".into(),
            ))
        }
        _ => (f64::NAN, f64::NAN),
    };
    let tol = trace.config.solver.tol;

    let simplex_violations = trace.steps.iter().filter(|s| check_simplex(&s.q).is_err()).count();
    let ql: Vec<f64> = trace.steps.iter().map(|s| dot(&s.q, &s.losses)).collect();
    let ql2: Vec<f64> = trace
        .steps
        .iter()
        .map(|s| s.q.iter().zip(&s.losses).map(|(q, l)| q * l * l).sum())
        .collect();
    let pa = prefix(ql.iter().copied());
    let pb = prefix(ql2.iter().copied());
    let pl: Vec<Vec<f64>> = (0..n).map(|k| prefix(trace.steps.iter().map(|s| s.losses[k]))).collect();
    let max_sum = |a: usize, b: usize| pl.iter().map(|p| p[b] - p[a]).fold(f64::NEG_INFINITY, f64::max);

    let mut checks = Vec::new();
    if c.lemma32 {
        // worst interval of sum (q.l - tol), which is the tightest case
        let mut chk = BoundCheck::new("lemma32");
        let (mut best, mut cur, mut cur_start) = (f64::NEG_INFINITY, 0.0, 0);
        let mut best_iv = (0, 0);
        for (i, v) in ql.iter().enumerate() {
            if cur <= 0.0 {
                cur = 0.0;
                cur_start = i;
            }
            cur += v - tol;
            if cur > best {
                best = cur;
                best_iv = (cur_start, i + 1);
            }
        }
        if t > 0 {
            let (a, b) = best_iv;
            let raw = pa[b] - pa[a];
            chk.intervals = t * (t + 1) / 2;
            chk.worst_slack = -raw;
            chk.worst_interval = Some((a + 1, b));
            if best > opts.abs_tol {
                // count violating intervals only when cheap
                chk.violations = if t <= opts.exhaustive_max_len {
                    let mut v = 0;
                    for a in 0..t {
                        for b in a + 1..=t {
                            if pa[b] - pa[a] > (b - a) as f64 * tol + opts.abs_tol {
                                v += 1;
                            }
                        }
                    }
                    v
                } else {
                    1
                };
            }
        }
        checks.push(chk);
    }

    let exhaustive = t <= opts.exhaustive_max_len;
    if c.lemma31 || c.thm33 {
        let mut l31 = BoundCheck::new("lemma31");
        let mut t33 = BoundCheck::new("thm33");
        let log_term = (n as f64 / gamma).ln();
        let mut eval = |a: usize, b: usize| {
            let len = (b - a) as f64;
            let sa = pa[b] - pa[a];
            let sb = pb[b] - pb[a];
            let m = max_sum(a, b);
            let reg = eta * sb + (log_term + 2.0 * gamma * len) / eta;
            if c.lemma31 {
                l31.record(sa - (m - reg), opts.abs_tol + tol, a, b);
            }
            if c.thm33 {
                // averaged form; the mixture term contributes up to |I| tol
                t33.record((reg - m) / len, (len * tol + opts.abs_tol) / len, a, b);
            }
        };
        if exhaustive {
            for a in 0..t {
                for b in a + 1..=t {
                    eval(a, b);
                }
            }
        } else {
            let tau = trace.config.tau.clamp(1, t);
            for a in 0..=t - tau {
                eval(a, a + tau);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            for _ in 0..opts.sample_count {
                let a = rng.random_range(0..t);
                let b = rng.random_range(a + 1..=t);
                eval(a, b);
            }
        }
        if c.lemma31 {
            checks.push(l31);
        }
        if c.thm33 {
            checks.push(t33);
        }
    }

    let envelope = if c.envelope && t > 0 {
        let tau = trace.config.tau.clamp(1, t);
        let k = ((n as f64 * 2.0 * tau as f64).ln() + 1.0).sqrt();
        let mut rep = EnvelopeReport { width: tau, windows: 0, exceed: 0, worst_ratio: 0.0 };
        for a in 0..=t - tau {
            let b = a + tau;
            let lhs = max_sum(a, b) / tau as f64;
            let rhs = 2.0 / tau as f64 * k * (pb[b] - pb[a]).max(0.0).sqrt();
            rep.windows += 1;
            if lhs > rhs + opts.abs_tol {
                rep.exceed += 1;
            }
            if rhs > 0.0 {
                rep.worst_ratio = rep.worst_ratio.max(lhs / rhs);
            } else if lhs > 0.0 {
                rep.worst_ratio = f64::INFINITY;
            }
        }
        Some(rep)
    } else {
        None
    };

    Ok(BoundReport {
        exhaustive,
        solver_tol: tol,
        simplex_violations,
        checks,
        envelope,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Writes the report as `key=value` lines, one block per check.
pub fn write_bound_report(w: &mut impl Write, report: &BoundReport) -> std::io::Result<()> {
    writeln!(w, "exhaustive={}", report.exhaustive)?;
    writeln!(w, "simplex_violations={}", report.simplex_violations)?;
    for c in &report.checks {
        writeln!(
            w,
            "{}: intervals={} violations={} worst_slack={:.3e} worst_interval={:?}",
            c.name, c.intervals, c.violations, c.worst_slack, c.worst_interval
        )?;
    }
    if let Some(e) = &report.envelope {
        writeln!(w, "envelope: width={} windows={} exceed={} worst_ratio={:.4}", e.width, e.windows, e.exceed, e.worst_ratio)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_episode, LearnerKind, RunConfig};
    use crate::ingest::{gen_jump_shift, gen_switch, Record, SampleStream, ShiftScenario, ShiftSetting};
    use crate::objectives::{Features, GroupFunction, LabelRange, ProblemSpec};
    use crate::weights::EtaMode;
    use approx::assert_abs_diff_eq;
    use chrono::NaiveDate;

    fn switch_trace(t: usize, learner: LearnerKind, eta: EtaMode) -> RunTrace {
        let s = gen_switch(t, 0).unwrap();
        let mut cfg = RunConfig::new("sw", ProblemSpec::Ma, learner, eta);
        cfg.tau = 10;
        run_episode(&cfg, &s).unwrap()
    }

    #[test]
    fn perfect_predictions_have_zero_error() {
        let mut tr = switch_trace(20, LearnerKind::Hedge, EtaMode::Fixed { value: 0.5 });
        for s in &mut tr.steps {
            s.p = s.y;
            s.policy = crate::minimax::PredictionPolicy::deterministic(s.y);
        }
        let e = local_multiaccuracy_error(&tr, None, &WindowSpec::steps(5), EvalMode::Auto).unwrap();
        assert!(e.values.iter().all(|&v| v == 0.0));
        assert_eq!(e.ends, (5..=20).collect::<Vec<_>>());
    }

    #[test]
    fn symmetric_residuals_cancel() {
        let mut tr = switch_trace(4, LearnerKind::Hedge, EtaMode::Fixed { value: 0.5 });
        for s in &mut tr.steps {
            s.p = 0.5;
            s.policy = crate::minimax::PredictionPolicy::deterministic(0.5);
        }
        let e = local_multiaccuracy_error(&tr, None, &WindowSpec::steps(4), EvalMode::Auto).unwrap();
        assert_eq!(e.values, vec![0.0]);
    }

    fn random_trace(t: usize, groups: usize, seed: u64) -> RunTrace {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = SampleStream::new("rand", LabelRange::unit());
        s.records = (0..t)
            .map(|_| Record {
                timestamp: None,
                features: Features::new(),
                y: rng.random::<f64>(),
                baseline: Some(rng.random::<f64>()),
                group_values: vec![],
            })
            .collect();
        let gs = (0..groups).map(|g| GroupFunction::constant(format!("g{g}"), rng.random::<f64>())).collect();
        s.set_groups(gs).unwrap();
        let mut cfg = RunConfig::new(
            "r",
            ProblemSpec::MaPred { cost: CostKind::Squared },
            LearnerKind::FixedShare,
            EtaMode::Fixed { value: 0.3 },
        );
        cfg.tau = 8;
        run_episode(&cfg, &s).unwrap()
    }

    #[test]
    fn local_ma_matches_enumeration() {
        let tr = random_trace(20, 3, 5);
        let w = 6;
        let e = local_multiaccuracy_error(&tr, None, &WindowSpec::steps(w), EvalMode::Auto).unwrap();
        for (i, end) in (w..=20).enumerate() {
            let mut best = f64::NEG_INFINITY;
            for g in 0..3 {
                for sigma in [1.0, -1.0] {
                    let v: f64 = tr.steps[end - w..end]
                        .iter()
                        .map(|s| sigma * s.group_values[g] * (s.y - s.p))
                        .sum::<f64>()
                        / w as f64;
                    best = best.max(v);
                }
            }
            assert_abs_diff_eq!(e.values[i], best, epsilon = 1e-12);
        }
    }

    #[test]
    fn prediction_error_matches_direct_sum() {
        let tr = random_trace(30, 2, 8);
        let e = local_prediction_error(&tr, &WindowSpec::steps(7), CostKind::Squared, EvalMode::Auto).unwrap();
        for (i, end) in (7..=30).enumerate() {
            let direct: f64 = tr.steps[end - 7..end]
                .iter()
                .map(|s| (s.y - s.p).powi(2) - (s.y - s.baseline.unwrap()).powi(2))
                .sum::<f64>()
                / 7.0;
            assert_abs_diff_eq!(e.values[i], direct, epsilon = 1e-12);
        }
        let mut same = tr.clone();
        for s in &mut same.steps {
            s.p = s.baseline.unwrap();
            s.policy = crate::minimax::PredictionPolicy::deterministic(s.p);
        }
        let z = local_prediction_error(&same, &WindowSpec::steps(7), CostKind::Squared, EvalMode::Auto).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn missing_baseline_and_wide_window() {
        let tr = switch_trace(10, LearnerKind::Hedge, EtaMode::Fixed { value: 0.5 });
        assert_eq!(
            local_prediction_error(&tr, &WindowSpec::steps(2), CostKind::Squared, EvalMode::Auto),
            Err(EvalError::MissingBaseline)
        );
        assert_eq!(
            local_multiaccuracy_error(&tr, None, &WindowSpec::steps(11), EvalMode::Auto),
            Err(EvalError::WindowTooWide { width: 11, len: 10 })
        );
    }

    #[test]
    fn totals() {
        let s = ErrorSeries { metric: "m".into(), run_id: "r".into(), ends: vec![1, 2, 3], values: vec![0.5; 3] };
        assert_eq!(total_error(&s), 1.5);
        assert_eq!(s.skip(2).ends, vec![3]);
    }

    #[test]
    fn day_windows_agree_both_ways() {
        let days = vec![0, 0, 1, 3, 3, 3, 4, 7, 8, 8];
        for w in 1..6 {
            assert_eq!(day_windows_forward(&days, w), day_windows_backward(&days, w), "width {w}");
        }
        assert_eq!(day_windows_forward(&days, 2), vec![(0, 3), (3, 6), (3, 7), (7, 8), (7, 10)]);
    }

    #[test]
    fn calendar_windows_on_trace() {
        let mut tr = switch_trace(6, LearnerKind::Hedge, EtaMode::Fixed { value: 0.5 });
        let base = NaiveDate::from_ymd_opt(2013, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        for (i, s) in tr.steps.iter_mut().enumerate() {
            s.timestamp = Some(base + chrono::Duration::days((i / 2) as i64));
        }
        let b = window_bounds(&tr, &WindowSpec::days(2)).unwrap();
        assert_eq!(b, vec![(0, 4), (2, 6)]);
        tr.steps[0].timestamp = None;
        assert_eq!(window_bounds(&tr, &WindowSpec::days(2)), Err(EvalError::MissingTimestamps));
    }

    #[test]
    fn sliding_sums_match_scratch() {
        let x: Vec<f64> = (0..50).map(|i| ((i * 7919) % 13) as f64 / 13.0 - 0.4).collect();
        let s = sliding_sums(&x, 9);
        for (i, v) in s.iter().enumerate() {
            assert_abs_diff_eq!(*v, x[i..i + 9].iter().sum::<f64>(), epsilon = 1e-12);
        }
    }

    #[test]
    fn ma_bounded_by_mc() {
        let sc = ShiftScenario::new(ShiftSetting::Medium, 400, 2);
        let s = gen_jump_shift(&sc).unwrap();
        let tr = run_episode(&RunConfig::new("mc", ProblemSpec::Mc { bins: 5 }, LearnerKind::FixedShare, EtaMode::Adaptive), &s)
            .unwrap();
        let ma = global_ma_error(&tr);
        for m in [1, 2, 5, 10] {
            let mc = global_mc_error(&tr, m).unwrap();
            assert!(ma <= m as f64 * mc + 0.5 / m as f64 + 1e-12);
        }
    }

    #[test]
    fn conforming_trace_passes_and_tampering_is_caught() {
        let tr = random_trace(60, 3, 1);
        let rep = verify_interval_bounds(&tr, &VerifyOptions::default()).unwrap();
        assert!(rep.is_ok(), "{rep:?}");
        assert_eq!(rep.check("lemma31").unwrap().intervals, 60 * 61 / 2);
        let mut bad = tr.clone();
        bad.steps[10].q[0] += 0.5;
        let rep = verify_interval_bounds(&bad, &VerifyOptions::default()).unwrap();
        assert!(!rep.is_ok());
        assert_eq!(rep.simplex_violations, 1);
    }

    #[test]
    fn positive_mixture_loss_breaks_lemma32() {
        let mut tr = random_trace(40, 2, 3);
        for s in &mut tr.steps[5..9] {
            s.losses.iter_mut().for_each(|l| *l = 0.5);
        }
        let rep = verify_interval_bounds(&tr, &VerifyOptions { checks: BoundChecks::solver_only(), ..Default::default() })
            .unwrap();
        let c = rep.check("lemma32").unwrap();
        assert!(c.violations > 0);
        assert_eq!(c.worst_interval, Some((6, 9)));
    }

    #[test]
    fn adaptive_trace_rejects_regret_checks() {
        let tr = switch_trace(20, LearnerKind::FixedShare, EtaMode::Adaptive);
        assert!(matches!(verify_interval_bounds(&tr, &VerifyOptions::default()), Err(EvalError::Unsupported(_))));
        let only = VerifyOptions { checks: BoundChecks::solver_only(), ..Default::default() };
        assert!(verify_interval_bounds(&tr, &only).unwrap().is_ok());
    }

    #[test]
    fn sampled_mode_for_long_traces() {
        let tr = random_trace(80, 2, 4);
        let opts = VerifyOptions { exhaustive_max_len: 50, sample_count: 100, ..Default::default() };
        let rep = verify_interval_bounds(&tr, &opts).unwrap();
        assert!(!rep.exhaustive);
        assert_eq!(rep.check("thm33").unwrap().intervals, (80 - 8 + 1) + 100);
        assert!(rep.is_ok());
    }
}
