//! The learner's best response to the adversary's current weights.

mod game;
mod ogd;

pub use game::{solve_zero_sum, GameMatrix, GameSolution, SolverSettings};
pub use ogd::{loss_gradient, ogd_baseline_step, BaselineParams};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::objectives::{
    pinball, BinGrid, CostKind, LabelRange, Objective, ObjectiveKind, ProblemSpec, StepContext,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("game matrix shape {rows}x{cols} does not match {len} entries")]
    Shape { rows: usize, cols: usize, len: usize },
    #[error("non-finite input")]
    NonFinite,
    #[error("tolerance {0} must be positive")]
    InvalidTolerance(f64),
    #[error("no convergence after {iterations} iterations (residual {residual})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("linear program unbounded")]
    Unbounded,
    #[error("degenerate linear program solution")]
    Degenerate,
    #[error("expected dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("loss `{0}` has no registered gradient")]
    NonDifferentiable(String),
    #[error("cost `{0}` has no closed-form solver")]
    UnsupportedCost(String),
    #[error("problem needs a baseline prediction")]
    MissingBaseline,
    #[error("grid needs at least two points, got {0}")]
    GridTooSmall(usize),
}

/// The learner's output for one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictionPolicy {
    Deterministic { value: f64 },
    Mixed { support: Vec<f64>, probs: Vec<f64> },
}

impl PredictionPolicy {
    pub fn deterministic(value: f64) -> Self {
        PredictionPolicy::Deterministic { value }
    }

    /// Builds a mixture, dropping zero-probability points.
    pub fn mixed(support: &[f64], probs: &[f64]) -> Self {
        let mut s = Vec::new();
        let mut p = Vec::new();
        for (&x, &w) in support.iter().zip(probs) {
            if w > 1e-15 {
                s.push(x);
                p.push(w);
            }
        }
        let z: f64 = p.iter().sum();
        p.iter_mut().for_each(|w| *w /= z);
        if s.len() == 1 {
            return Self::deterministic(s[0]);
        }
        PredictionPolicy::Mixed { support: s, probs: p }
    }

    pub fn mean(&self) -> f64 {
        self.expect(|p| p)
    }

    /// `E_{p ~ P}[g(p)]`.
    pub fn expect(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        match self {
            PredictionPolicy::Deterministic { value } => g(*value),
            PredictionPolicy::Mixed { support, probs } => {
                support.iter().zip(probs).map(|(&p, &w)| w * g(p)).sum()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            PredictionPolicy::Deterministic { value } => *value,
            PredictionPolicy::Mixed { support, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (&p, &w) in support.iter().zip(probs) {
                    acc += w;
                    if u < acc {
                        return p;
                    }
                }
                *support.last().expect("non-empty support")
            }
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, PredictionPolicy::Deterministic { .. })
    }

    pub fn support_len(&self) -> usize {
        match self {
            PredictionPolicy::Deterministic { .. } => 1,
            PredictionPolicy::Mixed { support, .. } => support.len(),
        }
    }

    pub fn is_valid(&self, range: &LabelRange) -> bool {
        match self {
            PredictionPolicy::Deterministic { value } => range.contains(*value),
            PredictionPolicy::Mixed { support, probs } => {
                support.len() == probs.len()
                    && support.iter().all(|&p| range.contains(p))
                    && probs.iter().all(|&w| w >= 0.0)
                    && (probs.iter().sum::<f64>() - 1.0).abs() < 1e-9
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub policy: PredictionPolicy,
    /// Worst-case mixture payoff over the adversary's candidate labels.
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
}

impl SolveOutcome {
    fn exact(policy: PredictionPolicy, value: f64) -> Self {
        Self { policy, value, residual: 0.0, iterations: 0 }
    }
}

/// `Σ q_l l(p, y)`.
pub fn mixture_payoff(objectives: &[Objective], q: &[f64], p: f64, y: f64, ctx: &StepContext<'_>) -> f64 {
    objectives
        .iter()
        .zip(q)
        .filter(|(_, &w)| w != 0.0)
        .map(|(o, &w)| w * o.evaluate(p, y, ctx))
        .sum()
}

/// `A = Σ q_{f,σ} σ f(x)` over the multiaccuracy objectives.
pub fn bias_pressure(objectives: &[Objective], q: &[f64], f_values: &[f64]) -> f64 {
    objectives
        .iter()
        .zip(q)
        .filter_map(|(o, &w)| match o.kind {
            ObjectiveKind::Multiaccuracy { group, sign } => Some(w * sign.value() * f_values[group]),
            _ => None,
        })
        .sum()
}

/// Total weight on objectives of the given kind predicate.
fn weight_where(objectives: &[Objective], q: &[f64], pred: impl Fn(&ObjectiveKind) -> bool) -> f64 {
    objectives.iter().zip(q).filter(|(o, _)| pred(&o.kind)).map(|(_, &w)| w).sum()
}

/// Closed-form minimiser of `max_y A (y - p)/w + q_pred (c(p, y) - c(p_base, y))/w²`
/// for squared cost: the two endpoint payoffs cross at
/// `p = p_base + A w / (2 q_pred)`, clipped to the range.
pub fn solve_mean_ma_pred(
    a_pressure: f64,
    q_pred: f64,
    p_base: f64,
    range: &LabelRange,
    cost: CostKind,
) -> Result<f64, SolverError> {
    if !cost.is_proper_for_mean() {
        return Err(SolverError::UnsupportedCost(cost.tag()));
    }
    if !(a_pressure.is_finite() && q_pred.is_finite() && p_base.is_finite()) {
        return Err(SolverError::NonFinite);
    }
    if q_pred <= 0.0 {
        return Ok(solve_mean_ma_only(a_pressure, range));
    }
    Ok(range.clip(p_base + a_pressure * range.width() / (2.0 * q_pred)))
}

/// Without a prediction-error term the payoff is linear in `p`, so the best
/// response sits at an endpoint: `b` if `A > 0`, else `a`.
pub fn solve_mean_ma_only(a_pressure: f64, range: &LabelRange) -> f64 {
    if a_pressure > 0.0 {
        range.b
    } else {
        range.a
    }
}

fn check_grid(settings: &SolverSettings) -> Result<(), SolverError> {
    if settings.grid < 2 {
        Err(SolverError::GridTooSmall(settings.grid))
    } else {
        Ok(())
    }
}

fn mixed_outcome(game: &GameMatrix, sol: GameSolution) -> SolveOutcome {
    SolveOutcome {
        policy: PredictionPolicy::mixed(&game.row_labels, &sol.row),
        value: sol.value,
        residual: sol.residual,
        iterations: sol.iterations,
    }
}

/// Learner restricted to bin midpoints, adversary to the label endpoints
/// (every calibration and squared-error payoff is linear in `y`).
pub fn solve_mc_minimax(
    objectives: &[Objective],
    q: &[f64],
    ctx: &StepContext<'_>,
    bins: usize,
    settings: &SolverSettings,
) -> Result<SolveOutcome, SolverError> {
    let grid = BinGrid::new(bins).map_err(|_| SolverError::GridTooSmall(bins))?;
    let range = ctx.range;
    let mut pressure = vec![0.0; bins];
    let mut q_pred = 0.0;
    let mut cost = CostKind::Squared;
    for (o, &w) in objectives.iter().zip(q) {
        match o.kind {
            ObjectiveKind::Multicalibration { group, sign, bin, .. } => {
                pressure[bin] += w * sign.value() * ctx.group_values[group];
            }
            ObjectiveKind::PredictionError { cost: c } => {
                q_pred += w;
                cost = c;
            }
            _ => {}
        }
    }
    let base = if q_pred > 0.0 {
        Some(ctx.baseline.ok_or(SolverError::MissingBaseline)?)
    } else {
        None
    };
    let rows: Vec<f64> = grid.midpoints().into_iter().map(|v| range.denormalize(v)).collect();
    let mid = grid.midpoints();
    let mut data = Vec::with_capacity(bins * 2);
    for (j, &p) in rows.iter().enumerate() {
        for y in [range.a, range.b] {
            let mut u = pressure[j] * (range.normalize(y) - mid[j]);
            if let Some(pb) = base {
                u += q_pred * (cost.scaled(p, y, &range) - cost.scaled(pb, y, &range));
            }
            data.push(u);
        }
    }
    let mut game = GameMatrix::new(bins, 2, data)?;
    game.row_labels = rows;
    game.col_labels = vec![range.a, range.b];
    let sol = solve_zero_sum(&game, settings)?;
    Ok(mixed_outcome(&game, sol))
}

/// Learner and adversary both on a uniform `settings.grid`-point grid.
/// Randomisation matters here: the coverage indicator is discontinuous.
pub fn solve_quantile_minimax(
    objectives: &[Objective],
    q: &[f64],
    ctx: &StepContext<'_>,
    alpha: f64,
    settings: &SolverSettings,
) -> Result<SolveOutcome, SolverError> {
    check_grid(settings)?;
    let range = ctx.range;
    let mut coverage = 0.0;
    let mut q_pred = 0.0;
    for (o, &w) in objectives.iter().zip(q) {
        match o.kind {
            ObjectiveKind::Coverage { group, sign, .. } => {
                coverage += w * sign.value() * ctx.group_values[group];
            }
            ObjectiveKind::QuantilePred { .. } => q_pred += w,
            _ => {}
        }
    }
    let base = if q_pred > 0.0 {
        ctx.baseline.ok_or(SolverError::MissingBaseline)?
    } else {
        0.0
    };
    let pts = range.grid(settings.grid);
    let w = range.width();
    let game = GameMatrix::from_fn(pts.clone(), pts, |theta, y| {
        let ind = if y <= theta { 1.0 } else { 0.0 };
        let mut u = coverage * (ind - alpha);
        if q_pred > 0.0 {
            u += q_pred * (pinball(alpha, theta, y) - pinball(alpha, base, y)) / w;
        }
        u
    })?;
    let sol = solve_zero_sum(&game, settings)?;
    Ok(mixed_outcome(&game, sol))
}

/// Generic grid game built by evaluating every objective; used for the
/// omniprediction and multigroup families.
pub fn solve_grid_minimax(
    objectives: &[Objective],
    q: &[f64],
    ctx: &StepContext<'_>,
    settings: &SolverSettings,
) -> Result<SolveOutcome, SolverError> {
    check_grid(settings)?;
    let pts = ctx.range.grid(settings.grid);
    let game = GameMatrix::from_fn(pts.clone(), pts, |p, y| mixture_payoff(objectives, q, p, y, ctx))?;
    let sol = solve_zero_sum(&game, settings)?;
    Ok(mixed_outcome(&game, sol))
}

/// Routes to the solver for `problem`.
pub fn solve_policy(
    problem: &ProblemSpec,
    objectives: &[Objective],
    q: &[f64],
    ctx: &StepContext<'_>,
    settings: &SolverSettings,
) -> Result<SolveOutcome, SolverError> {
    let range = ctx.range;
    let endpoint_value = |p: f64| {
        mixture_payoff(objectives, q, p, range.a, ctx).max(mixture_payoff(objectives, q, p, range.b, ctx))
    };
    match problem {
        ProblemSpec::Ma => {
            let p = solve_mean_ma_only(bias_pressure(objectives, q, ctx.group_values), &range);
            Ok(SolveOutcome::exact(PredictionPolicy::deterministic(p), endpoint_value(p)))
        }
        ProblemSpec::MaPred { cost } => {
            let a = bias_pressure(objectives, q, ctx.group_values);
            let q_pred = weight_where(objectives, q, |k| matches!(k, ObjectiveKind::PredictionError { .. }));
            let base = ctx.baseline.ok_or(SolverError::MissingBaseline)?;
            let p = solve_mean_ma_pred(a, q_pred, base, &range, *cost)?;
            Ok(SolveOutcome::exact(PredictionPolicy::deterministic(p), endpoint_value(p)))
        }
        ProblemSpec::BaselineOnly => {
            let p = ctx.baseline.ok_or(SolverError::MissingBaseline)?;
            Ok(SolveOutcome::exact(PredictionPolicy::deterministic(p), endpoint_value(p)))
        }
        ProblemSpec::Mc { bins } | ProblemSpec::McPred { bins, .. } => {
            solve_mc_minimax(objectives, q, ctx, *bins, settings)
        }
        ProblemSpec::Quantile { alpha } => solve_quantile_minimax(objectives, q, ctx, *alpha, settings),
        ProblemSpec::Omniprediction { .. } | ProblemSpec::Multigroup { .. } => {
            solve_grid_minimax(objectives, q, ctx, settings)
        }
    }
}
