//! Adaptive sensor placement on `[0, 1]` as a combinatorial bandit.
//!
//! Events arrive as an inhomogeneous Poisson process. Each round a set of at
//! most `U` intervals is sensed at cost `C` per unit length, events inside are
//! observed, and the intensity is learned with a Bayesian histogram whose
//! bins are refined over time. Actions are chosen by Thompson sampling (or a
//! baseline policy) followed by an exact maximum-weight interval selection.
//!
//! The numerics are generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`.

// `!(x > 0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asim;
pub mod binning;
pub mod error;
pub mod harness;
pub mod inference;
pub mod point_process;
pub mod policies;
pub mod scalar;
pub mod special;

pub use asim::{asim_select, brute_force_select, oracle_check, select_runs, OracleReport, Selection};
pub use binning::{Action, BinStats, Histogram, History, Mesh, RebinSchedule, ScheduleKind};
pub use error::{Error, Result};
pub use harness::{
    emit_traces, expected_reward, optimal_continuous_action, optimal_discrete_action,
    run_experiment, regret_bound, BoundParams, ExperimentConfig, ExperimentResult, RegretTrace,
};
pub use inference::{PriorParams, TgPosterior};
pub use point_process::{EventBatch, RateFunction, RateShape};
pub use policies::{Decision, PolicyConfig, PolicyKind, RoundContext};
pub use scalar::Scalar;

pub type Action64 = Action<f64>;
pub type Mesh64 = Mesh<f64>;
pub type Histogram64 = Histogram<f64>;
pub type RateFunction64 = RateFunction<f64>;
pub type RateShape64 = RateShape<f64>;
pub type PriorParams64 = PriorParams<f64>;
pub type TgPosterior64 = TgPosterior<f64>;
pub type PolicyConfig64 = PolicyConfig<f64>;
pub type ExperimentConfig64 = ExperimentConfig<f64>;
pub type ExperimentResult64 = ExperimentResult<f64>;
pub type RegretTrace64 = RegretTrace<f64>;

pub type Action32 = Action<f32>;
pub type RateFunction32 = RateFunction<f32>;
pub type TgPosterior32 = TgPosterior<f32>;
