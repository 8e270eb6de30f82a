//! Locally adaptive multi-objective online learning.
//!
//! An adversary keeps a distribution over a finite set of bounded losses
//! (multiaccuracy, multicalibration, coverage, prediction error, ...) and a
//! learner answers each step with the minimax prediction against that
//! distribution. Fixed Share weights give guarantees on every time interval,
//! not only over the whole horizon.

pub mod engine;
pub mod evaluation;
pub mod experiment;
pub mod ingest;
pub mod minimax;
pub mod objectives;
pub mod svg;
pub mod trace_io;
pub mod weights;
