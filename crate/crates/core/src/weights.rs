//! Adversary weight updates: Hedge, Fixed Share, and Hedge over
//! interval-restricted copies of each objective.
//!
//! All exponential updates run in log space with max-subtraction, so long
//! horizons never overflow.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const SIMPLEX_TOL: f64 = 1e-9;
const LOSS_TOL: f64 = 1e-9;
/// Floor on the windowed squared-loss sum in the adaptive learning rate.
pub const ETA_FLOOR: f64 = 1e-12;
/// The running window sum is rebuilt from scratch this often.
const RECOMPUTE_EVERY: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("weights are not on the simplex (sum {sum}, min {min})")]
    NotSimplex { sum: f64, min: f64 },
    #[error("expected {expected} losses, got {got}")]
    Length { expected: usize, got: usize },
    #[error("loss {value} at index {index} outside [-1, 1]")]
    LossRange { index: usize, value: f64 },
    #[error("learning rate {0} must be positive and finite")]
    InvalidEta(f64),
    #[error("mixing rate {0} must lie in [0, 1]")]
    InvalidGamma(f64),
    #[error("step {t} exceeds horizon {horizon}")]
    BeyondHorizon { t: usize, horizon: usize },
    #[error("need at least one objective")]
    Empty,
}

/// A distribution over objectives plus the number of updates applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub t: usize,
}

impl WeightVector {
    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0 / n as f64; n],
            t: 0,
        }
    }

    /// Wraps `weights` after checking they lie on the simplex.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self, WeightError> {
        check_simplex(&weights)?;
        Ok(Self { weights, t: 0 })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    /// `q . losses`
    pub fn dot(&self, losses: &[f64]) -> f64 {
        self.weights.iter().zip(losses).map(|(q, l)| q * l).sum()
    }

    /// `q . losses^2`
    pub fn dot_sq(&self, losses: &[f64]) -> f64 {
        self.weights.iter().zip(losses).map(|(q, l)| q * l * l).sum()
    }
}

pub fn check_simplex(w: &[f64]) -> Result<(), WeightError> {
    if w.is_empty() {
        return Err(WeightError::Empty);
    }
    let sum: f64 = w.iter().sum();
    let min = w.iter().copied().fold(f64::INFINITY, f64::min);
    if !(sum.is_finite() && (sum - 1.0).abs() <= SIMPLEX_TOL && min >= -SIMPLEX_TOL) {
        return Err(WeightError::NotSimplex { sum, min });
    }
    Ok(())
}

pub fn check_losses(losses: &[f64], expected: usize) -> Result<(), WeightError> {
    if losses.len() != expected {
        return Err(WeightError::Length {
            expected,
            got: losses.len(),
        });
    }
    for (index, &value) in losses.iter().enumerate() {
        if !(value.is_finite() && value.abs() <= 1.0 + LOSS_TOL) {
            return Err(WeightError::LossRange { index, value });
        }
    }
    Ok(())
}

fn check_eta(eta: f64) -> Result<(), WeightError> {
    if eta.is_finite() && eta > 0.0 {
        Ok(())
    } else {
        Err(WeightError::InvalidEta(eta))
    }
}

/// Normalises `exp(logw)` in place into `out`. Entries at `-inf` become 0.
fn softmax_into(logw: &[f64], out: &mut Vec<f64>) {
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    out.clear();
    out.extend(logw.iter().map(|&l| (l - max).exp()));
    let z: f64 = out.iter().sum();
    assert!(z > 0.0 && z.is_finite(), "degenerate normaliser");
    for v in out.iter_mut() {
        *v /= z;
    }
}

/// One multiplicative-weights step, `q'_l ∝ q_l exp(eta * loss_l)`.
/// High-loss objectives gain weight.
pub fn hedge_update(q: &WeightVector, losses: &[f64], eta: f64) -> Result<WeightVector, WeightError> {
    check_simplex(&q.weights)?;
    check_losses(losses, q.len())?;
    check_eta(eta)?;
    let logw: Vec<f64> = q
        .weights
        .iter()
        .zip(losses)
        .map(|(&w, &l)| if w > 0.0 { w.ln() + eta * l } else { f64::NEG_INFINITY })
        .collect();
    let mut weights = Vec::with_capacity(logw.len());
    softmax_into(&logw, &mut weights);
    Ok(WeightVector { weights, t: q.t + 1 })
}

/// Hedge followed by mixing `(1 - gamma) q + gamma / N`.
pub fn fixed_share_update(
    q: &WeightVector,
    losses: &[f64],
    eta: f64,
    gamma: f64,
) -> Result<WeightVector, WeightError> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(WeightError::InvalidGamma(gamma));
    }
    let mut out = hedge_update(q, losses, eta)?;
    mix_uniform(&mut out.weights, gamma);
    Ok(out)
}

fn mix_uniform(w: &mut [f64], gamma: f64) {
    if gamma == 0.0 {
        return;
    }
    let floor = gamma / w.len() as f64;
    for v in w.iter_mut() {
        *v = (1.0 - gamma) * *v + floor;
    }
}

/// `min(1, sqrt((ln(2 N tau) + 1) / max(eps, window_sum)))`.
pub fn adaptive_eta(window_sum: f64, tau: usize, n_objectives: usize) -> f64 {
    let num = (n_objectives as f64 * 2.0 * tau as f64).ln() + 1.0;
    (num / window_sum.max(ETA_FLOOR)).sqrt().min(1.0)
}

/// The last `tau` values of `q . loss^2`, with a running sum.
#[derive(Debug, Clone)]
pub struct EtaWindow {
    tau: usize,
    buf: VecDeque<f64>,
    sum: f64,
    pushes: usize,
}

impl EtaWindow {
    pub fn new(tau: usize) -> Self {
        let tau = tau.max(1);
        Self {
            tau,
            buf: VecDeque::with_capacity(tau),
            sum: 0.0,
            pushes: 0,
        }
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn push(&mut self, v: f64) {
        if self.buf.len() == self.tau {
            if let Some(old) = self.buf.pop_front() {
                self.sum -= old;
            }
        }
        self.buf.push_back(v);
        self.sum += v;
        self.pushes += 1;
        if self.pushes.is_multiple_of(RECOMPUTE_EVERY) {
            self.sum = self.buf.iter().sum();
        }
    }

    pub fn sum(&self) -> f64 {
        self.sum.max(0.0)
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.buf.iter().copied()
    }

    pub fn eta(&self, n_objectives: usize) -> f64 {
        adaptive_eta(self.sum(), self.tau, n_objectives)
    }
}

/// How the learning rate is chosen, before it is resolved against a run's
/// dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EtaMode {
    Fixed { value: f64 },
    /// `scale * sqrt(ln N / T)`.
    NonAdaptiveOptimal {
        #[serde(default = "one")]
        scale: f64,
    },
    /// `sqrt((ln(2 N tau) + 1) / tau)`, i.e. the adaptive rate with a
    /// windowed squared loss of one per step.
    WidthBased,
    /// Recomputed every step from the last `tau` values of `q . loss^2`.
    Adaptive,
    /// `sqrt(ln(2 |F| m) / (4 T))`, tuned for the calibration objectives.
    McOptimal,
}

fn one() -> f64 {
    1.0
}

/// Dimensions needed to turn an [`EtaMode`] into a number.
#[derive(Debug, Clone, Copy)]
pub struct EtaContext {
    pub n_objectives: usize,
    pub horizon: usize,
    pub tau: usize,
    pub groups: usize,
    pub bins: Option<usize>,
}

/// A learning rate that is either constant or follows the windowed schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaSchedule {
    Fixed(f64),
    Adaptive { tau: usize },
}

impl EtaMode {
    pub fn resolve(&self, ctx: &EtaContext) -> EtaSchedule {
        let n = ctx.n_objectives.max(1) as f64;
        let t = ctx.horizon.max(1) as f64;
        let tau = ctx.tau.max(1) as f64;
        let v = match *self {
            EtaMode::Fixed { value } => value,
            EtaMode::NonAdaptiveOptimal { scale } => scale * (n.ln() / t).sqrt(),
            EtaMode::WidthBased => (((n * 2.0 * tau).ln() + 1.0) / tau).sqrt(),
            EtaMode::Adaptive => return EtaSchedule::Adaptive { tau: ctx.tau.max(1) },
            EtaMode::McOptimal => {
                let m = ctx.bins.unwrap_or(1) as f64;
                ((2.0 * ctx.groups.max(1) as f64 * m).ln() / (4.0 * t)).sqrt()
            }
        };
        // ln 1 = 0 would give a zero rate for a single objective
        EtaSchedule::Fixed(if v > 0.0 { v.min(1.0) } else { 1.0 })
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, EtaMode::Adaptive)
    }
}

/// The adversary. `update` consumes the loss vector for the current step and
/// returns the learning rate it used.
pub trait WeightLearner: Send {
    fn weights(&self) -> &WeightVector;
    fn update(&mut self, losses: &[f64]) -> Result<f64, WeightError>;
}

/// Rate for the step whose losses are `losses` under weights `q`.
fn step_eta(schedule: &EtaSchedule, window: &mut Option<EtaWindow>, q: &WeightVector, losses: &[f64]) -> f64 {
    match schedule {
        EtaSchedule::Fixed(v) => *v,
        EtaSchedule::Adaptive { .. } => {
            let w = window.as_mut().expect("adaptive schedule has a window");
            w.push(q.dot_sq(losses));
            w.eta(q.len())
        }
    }
}

fn window_for(schedule: &EtaSchedule) -> Option<EtaWindow> {
    match schedule {
        EtaSchedule::Adaptive { tau } => Some(EtaWindow::new(*tau)),
        EtaSchedule::Fixed(_) => None,
    }
}

/// Plain Hedge. Keeps cumulative scaled losses so the weights are a single
/// softmax regardless of horizon.
#[derive(Debug, Clone)]
pub struct HedgeLearner {
    cum: Vec<f64>,
    q: WeightVector,
    schedule: EtaSchedule,
    window: Option<EtaWindow>,
}

impl HedgeLearner {
    pub fn new(n: usize, schedule: EtaSchedule) -> Self {
        Self {
            cum: vec![0.0; n],
            q: WeightVector::uniform(n),
            window: window_for(&schedule),
            schedule,
        }
    }
}

impl WeightLearner for HedgeLearner {
    fn weights(&self) -> &WeightVector {
        &self.q
    }

    fn update(&mut self, losses: &[f64]) -> Result<f64, WeightError> {
        check_losses(losses, self.cum.len())?;
        let eta = step_eta(&self.schedule, &mut self.window, &self.q, losses);
        for (c, l) in self.cum.iter_mut().zip(losses) {
            *c += eta * l;
        }
        softmax_into(&self.cum, &mut self.q.weights);
        self.q.t += 1;
        Ok(eta)
    }
}

/// Fixed Share with mixing rate `gamma`.
#[derive(Debug, Clone)]
pub struct FixedShareLearner {
    q: WeightVector,
    gamma: f64,
    schedule: EtaSchedule,
    window: Option<EtaWindow>,
    logw: Vec<f64>,
}

impl FixedShareLearner {
    pub fn new(n: usize, schedule: EtaSchedule, gamma: f64) -> Result<Self, WeightError> {
        if n == 0 {
            return Err(WeightError::Empty);
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(WeightError::InvalidGamma(gamma));
        }
        Ok(Self {
            q: WeightVector::uniform(n),
            gamma,
            window: window_for(&schedule),
            schedule,
            logw: vec![0.0; n],
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl WeightLearner for FixedShareLearner {
    fn weights(&self) -> &WeightVector {
        &self.q
    }

    fn update(&mut self, losses: &[f64]) -> Result<f64, WeightError> {
        check_losses(losses, self.q.len())?;
        let eta = step_eta(&self.schedule, &mut self.window, &self.q, losses);
        check_eta(eta)?;
        for ((lw, &w), &l) in self.logw.iter_mut().zip(&self.q.weights).zip(losses) {
            *lw = if w > 0.0 { w.ln() + eta * l } else { f64::NEG_INFINITY };
        }
        softmax_into(&self.logw, &mut self.q.weights);
        mix_uniform(&mut self.q.weights, self.gamma);
        self.q.t += 1;
        Ok(eta)
    }
}

/// Hedge over `{l * 1{t in I}}` for every objective `l` and interval
/// `I ⊆ [1, T]`, tracked in O(N) per step.
///
/// Only intervals containing `t` affect the mixture, every interval with the
/// same start carries the same cumulative loss, and the number of admissible
/// end points is the same for every start. So the effective weight of `l` is
/// proportional to `A_l(t) = Σ_{r <= t} exp(Σ_{u=r}^{t-1} eta_u l_u)`, which
/// obeys `A_l(t + 1) = A_l(t) exp(eta_t l_t) + 1`.
#[derive(Debug, Clone)]
pub struct AdaptiveObjectivesLearner {
    log_a: Vec<f64>,
    q: WeightVector,
    horizon: usize,
    schedule: EtaSchedule,
    window: Option<EtaWindow>,
}

impl AdaptiveObjectivesLearner {
    pub fn new(n: usize, horizon: usize, schedule: EtaSchedule) -> Result<Self, WeightError> {
        if n == 0 {
            return Err(WeightError::Empty);
        }
        Ok(Self {
            log_a: vec![0.0; n],
            q: WeightVector::uniform(n),
            horizon,
            window: window_for(&schedule),
            schedule,
        })
    }

    /// Number of objective/interval pairs the learner is implicitly tracking.
    pub fn expanded_size(n: usize, horizon: usize) -> f64 {
        n as f64 * horizon as f64 * (horizon as f64 + 1.0) / 2.0
    }
}

impl WeightLearner for AdaptiveObjectivesLearner {
    fn weights(&self) -> &WeightVector {
        &self.q
    }

    fn update(&mut self, losses: &[f64]) -> Result<f64, WeightError> {
        check_losses(losses, self.log_a.len())?;
        if self.q.t >= self.horizon {
            return Err(WeightError::BeyondHorizon {
                t: self.q.t + 1,
                horizon: self.horizon,
            });
        }
        let eta = step_eta(&self.schedule, &mut self.window, &self.q, losses);
        for (la, &l) in self.log_a.iter_mut().zip(losses) {
            *la = logaddexp(*la + eta * l, 0.0);
        }
        softmax_into(&self.log_a, &mut self.q.weights);
        self.q.t += 1;
        Ok(eta)
    }
}

#[inline]
fn logaddexp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Relative weights per (objective, start) at step `t` (1-based) of Hedge over
/// interval-restricted objectives. `history[u]` is the loss vector of step
/// `u + 1`; only the first `t - 1` entries are read. The result is indexed
/// `[objective][r - 1]` for starts `r = 1..=t` and sums to one.
pub fn adaptive_objectives_state(
    history: &[Vec<f64>],
    eta: f64,
    t: usize,
    horizon: usize,
) -> Result<Vec<Vec<f64>>, WeightError> {
    if t == 0 || t > horizon {
        return Err(WeightError::BeyondHorizon { t, horizon });
    }
    if history.len() < t - 1 {
        return Err(WeightError::Length {
            expected: t - 1,
            got: history.len(),
        });
    }
    let n = match history.first() {
        Some(h) => h.len(),
        None => return Err(WeightError::Empty),
    };
    // prefix[u] = Σ_{v < u} eta * l_v, so S(r, t-1) = prefix[t-1] - prefix[r-1]
    let mut logs = vec![vec![0.0; t]; n];
    for (i, row) in logs.iter_mut().enumerate() {
        let mut prefix = Vec::with_capacity(t);
        let mut acc = 0.0;
        prefix.push(0.0);
        for step in history.iter().take(t - 1) {
            check_losses(step, n)?;
            acc += eta * step[i];
            prefix.push(acc);
        }
        for r in 1..=t {
            row[r - 1] = prefix[t - 1] - prefix[r - 1];
        }
    }
    let max = logs
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for row in logs.iter_mut() {
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
    }
    for row in logs.iter_mut() {
        for v in row.iter_mut() {
            *v /= z;
        }
    }
    Ok(logs)
}
