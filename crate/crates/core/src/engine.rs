//! The per-step game loop: solve against the current weights, predict,
//! observe the label, score every objective, update the weights.

use std::time::Instant;

use chrono::NaiveDateTime;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::SampleStream;
use crate::minimax::{ogd_baseline_step, solve_policy, BaselineParams, PredictionPolicy, SolverSettings};
use crate::objectives::{build_objective_set, CostKind, LabelRange, Objective, ObjectiveError, ProblemSpec, StepContext};
use crate::weights::{
    AdaptiveObjectivesLearner, EtaContext, EtaMode, EtaSchedule, FixedShareLearner, HedgeLearner, WeightError,
    WeightLearner,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid config `{name}`: {reason}")]
    Config { name: String, reason: String },
    #[error("stream is empty")]
    EmptyStream,
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Weights(#[from] WeightError),
    #[error("stream: {0}")]
    Stream(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Hedge,
    #[default]
    FixedShare,
    AdaptiveObjectives,
}

impl LearnerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LearnerKind::Hedge => "hedge",
            LearnerKind::FixedShare => "fixed_share",
            LearnerKind::AdaptiveObjectives => "adaptive_objectives",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineSource {
    /// Use the stream's baseline column.
    #[default]
    External,
    /// Learn a linear baseline online by gradient steps on squared loss.
    Ogd {
        features: Vec<String>,
        #[serde(default = "default_step")]
        step: f64,
        #[serde(default = "yes")]
        intercept: bool,
    },
}

fn default_step() -> f64 {
    0.01
}
fn yes() -> bool {
    true
}
fn default_tau() -> usize {
    100
}
fn default_eta() -> EtaMode {
    EtaMode::Adaptive
}
fn default_thin() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub name: String,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub learner: LearnerKind,
    #[serde(default = "default_eta")]
    pub eta: EtaMode,
    /// Fixed Share mixing rate; `1 / (2 tau)` when absent.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "default_tau")]
    pub tau: usize,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub baseline: BaselineSource,
    /// Write weight snapshots only every k-th step.
    #[serde(default = "default_thin")]
    pub weight_thin: usize,
}

impl RunConfig {
    pub fn new(name: impl Into<String>, problem: ProblemSpec, learner: LearnerKind, eta: EtaMode) -> Self {
        Self {
            name: name.into(),
            problem,
            learner,
            eta,
            gamma: None,
            tau: default_tau(),
            solver: SolverSettings::default(),
            seed: 0,
            baseline: BaselineSource::External,
            weight_thin: 1,
        }
    }

    pub fn effective_gamma(&self) -> Option<f64> {
        match self.learner {
            LearnerKind::FixedShare => Some(self.gamma.unwrap_or(1.0 / (2.0 * self.tau.max(1) as f64))),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let fail = |reason: String| {
            Err(EngineError::Config {
                name: self.name.clone(),
                reason,
            })
        };
        if self.tau == 0 {
            return fail("tau must be at least 1".into());
        }
        if let EtaMode::Fixed { value } = self.eta {
            if !(value > 0.0 && value <= 1.0) {
                return fail(format!("fixed eta {value} must lie in (0, 1]"));
            }
        }
        if let EtaMode::NonAdaptiveOptimal { scale } = self.eta {
            if !(scale > 0.0 && scale.is_finite()) {
                return fail(format!("eta scale {scale} must be positive"));
            }
        }
        if let Some(g) = self.effective_gamma() {
            if !(0.0..=0.5).contains(&g) {
                return fail(format!("gamma {g} must lie in [0, 1/2]"));
            }
        }
        if !(self.solver.tol > 0.0) {
            return fail("solver tolerance must be positive".into());
        }
        if self.weight_thin == 0 {
            return fail("weight_thin must be at least 1".into());
        }
        if let BaselineSource::Ogd { step, .. } = &self.baseline {
            if !(step.is_finite() && *step >= 0.0) {
                return fail(format!("ogd step {step} must be non-negative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// 1-based step index.
    pub t: usize,
    pub timestamp: Option<NaiveDateTime>,
    pub y: f64,
    pub baseline: Option<f64>,
    pub policy: PredictionPolicy,
    /// Sampled prediction (equals the policy value when deterministic).
    pub p: f64,
    pub group_values: Vec<f64>,
    /// Expected loss of each objective under the policy.
    pub losses: Vec<f64>,
    /// Loss of each objective at the sampled prediction.
    pub realized: Vec<f64>,
    /// Adversary weights the learner played against.
    pub q: Vec<f64>,
    pub eta: f64,
    pub solver_value: f64,
    pub solver_residual: f64,
}

impl StepRecord {
    pub fn p_mean(&self) -> f64 {
        self.policy.mean()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// The solver failed at `step`; earlier steps are kept.
    Aborted { step: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub config: RunConfig,
    pub objective_ids: Vec<String>,
    pub objectives: Vec<Objective>,
    pub group_ids: Vec<String>,
    pub range: LabelRange,
    /// The constant learning rate, or `None` for the windowed schedule.
    pub fixed_eta: Option<f64>,
    pub gamma: Option<f64>,
    pub steps: Vec<StepRecord>,
    pub status: RunStatus,
    pub elapsed_ms: f64,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn is_completed(&self) -> bool {
        self.status == RunStatus::Completed
    }

    pub fn labels(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.y).collect()
    }

    pub fn predictions(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.p).collect()
    }

    pub fn mean_predictions(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.p_mean()).collect()
    }

    /// Whether any step used a randomised policy.
    pub fn is_randomized(&self) -> bool {
        self.steps.iter().any(|s| !s.policy.is_deterministic())
    }

    /// Equal up to wall-clock time.
    pub fn same_run(&self, other: &RunTrace) -> bool {
        RunTrace { elapsed_ms: 0.0, ..self.clone() } == RunTrace { elapsed_ms: 0.0, ..other.clone() }
    }
}

fn build_learner(config: &RunConfig, n: usize, horizon: usize, schedule: EtaSchedule) -> Result<Box<dyn WeightLearner>, EngineError> {
    Ok(match config.learner {
        LearnerKind::Hedge => Box::new(HedgeLearner::new(n, schedule)),
        LearnerKind::FixedShare => Box::new(FixedShareLearner::new(
            n,
            schedule,
            config.effective_gamma().unwrap_or(0.0),
        )?),
        LearnerKind::AdaptiveObjectives => Box::new(AdaptiveObjectivesLearner::new(n, horizon, schedule)?),
    })
}

/// Learning rate for `config` on a stream of length `horizon`. The adaptive
/// objectives learner counts every objective/interval pair.
pub fn resolve_eta(config: &RunConfig, n_objectives: usize, n_groups: usize, horizon: usize) -> EtaSchedule {
    let n = match config.learner {
        LearnerKind::AdaptiveObjectives if matches!(config.eta, EtaMode::NonAdaptiveOptimal { .. }) => {
            AdaptiveObjectivesLearner::expanded_size(n_objectives, horizon).round() as usize
        }
        _ => n_objectives,
    };
    config.eta.resolve(&EtaContext {
        n_objectives: n,
        horizon,
        tau: config.tau,
        groups: n_groups,
        bins: config.problem.bins(),
    })
}

/// Plays one episode over `stream`.
pub fn run_episode(config: &RunConfig, stream: &SampleStream) -> Result<RunTrace, EngineError> {
    config.validate()?;
    if stream.is_empty() {
        return Err(EngineError::EmptyStream);
    }
    let started = Instant::now();
    let stream_err = |m: String| EngineError::Stream(m);
    let objectives = build_objective_set(&config.problem, &stream.groups)?;
    let n = objectives.len();
    let horizon = stream.len();
    let range = stream.range;

    let mut ogd = match &config.baseline {
        BaselineSource::External => {
            if config.problem.needs_baseline() && !stream.has_baseline() {
                return Err(EngineError::Config {
                    name: config.name.clone(),
                    reason: format!("problem {} needs a baseline column", config.problem.label()),
                });
            }
            None
        }
        BaselineSource::Ogd { features, step, intercept } => {
            let mut xs = stream.numeric_features(features).map_err(|e| stream_err(e.to_string()))?;
            if *intercept {
                xs.iter_mut().for_each(|x| x.push(1.0));
            }
            let dim = features.len() + usize::from(*intercept);
            Some((BaselineParams::zeros(dim, *step), xs))
        }
    };

    let schedule = resolve_eta(config, n, stream.groups.len(), horizon);
    let fixed_eta = match schedule {
        EtaSchedule::Fixed(v) => Some(v),
        EtaSchedule::Adaptive { .. } => None,
    };
    let mut learner = build_learner(config, n, horizon, schedule)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut steps = Vec::with_capacity(horizon);
    let mut status = RunStatus::Completed;

    for (i, rec) in stream.records.iter().enumerate() {
        let baseline = match &ogd {
            Some((params, xs)) => Some(params.predict(&xs[i], &range).map_err(|e| stream_err(e.to_string()))?),
            None => rec.baseline,
        };
        let ctx = StepContext {
            group_values: &rec.group_values,
            baseline,
            range,
        };
        let q = learner.weights().weights.clone();
        // the prediction depends only on q, x_t and the baseline
        let outcome = match solve_policy(&config.problem, &objectives, &q, &ctx, &config.solver) {
            Ok(o) => o,
            Err(e) => {
                status = RunStatus::Aborted {
                    step: i + 1,
                    reason: e.to_string(),
                };
                break;
            }
        };
        let p = if outcome.policy.is_deterministic() {
            outcome.policy.mean()
        } else {
            outcome.policy.sample(&mut rng)
        };
        let y = rec.y;
        let losses: Vec<f64> = objectives
            .iter()
            .map(|o| outcome.policy.expect(|pp| o.evaluate(pp, y, &ctx)))
            .collect();
        let realized: Vec<f64> = objectives.iter().map(|o| o.evaluate(p, y, &ctx)).collect();
        let eta = learner.update(&losses)?;
        if let Some((params, xs)) = &mut ogd {
            *params = ogd_baseline_step(params, &xs[i], y, CostKind::Squared).map_err(|e| stream_err(e.to_string()))?;
        }
        steps.push(StepRecord {
            t: i + 1,
            timestamp: rec.timestamp,
            y,
            baseline,
            policy: outcome.policy,
            p,
            group_values: rec.group_values.clone(),
            losses,
            realized,
            q,
            eta,
            solver_value: outcome.value,
            solver_residual: outcome.residual,
        });
    }

    Ok(RunTrace {
        config: config.clone(),
        objective_ids: objectives.iter().map(|o| o.id.clone()).collect(),
        objectives,
        group_ids: stream.groups.iter().map(|g| g.id.clone()).collect(),
        range,
        fixed_eta,
        gamma: config.effective_gamma(),
        steps,
        status,
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

/// Runs independent episodes in parallel; results keep the input order.
pub fn run_matrix(configs: &[RunConfig], stream: &SampleStream) -> Vec<Result<RunTrace, EngineError>> {
    configs.par_iter().map(|c| run_episode(c, stream)).collect()
}

/// As [`run_matrix`] on a dedicated pool of `workers` threads.
pub fn run_matrix_with_workers(
    configs: &[RunConfig],
    stream: &SampleStream,
    workers: usize,
) -> Vec<Result<RunTrace, EngineError>> {
    match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(pool) => pool.install(|| run_matrix(configs, stream)),
        Err(_) => configs.iter().map(|c| run_episode(c, stream)).collect(),
    }
}
