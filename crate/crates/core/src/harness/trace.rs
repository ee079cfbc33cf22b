use serde::{Deserialize, Serialize};

use crate::binning::Action;
use crate::scalar::Scalar;

use super::bound::BoundParams;

/// Regret bookkeeping for one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct TraceRow<S> {
    pub t: u64,
    /// `K_t`, the bin count the action was chosen on.
    pub bins: usize,
    pub action: Action<S>,
    /// Realized number of events inside the action.
    pub events: usize,
    /// Expected reward `r(A_t)`.
    pub reward: S,
    /// `δ(A_t) = r(A*) - r(A_t)`.
    pub inst_regret: S,
    /// `δ(A*_t) = r(A*) - r(A*_t)`.
    pub disc_regret: S,
    pub cum_regret: S,
}

impl<S: Scalar> TraceRow<S> {
    /// `δ_t(A_t) = r(A*_t) - r(A_t)`.
    pub fn step_regret(&self) -> S {
        self.inst_regret - self.disc_regret
    }
}

/// Rounds `1..=T` of one replication of one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct RegretTrace<S> {
    pub run_id: String,
    pub arm: String,
    pub replication: usize,
    pub rows: Vec<TraceRow<S>>,
}

impl<S: Scalar> RegretTrace<S> {
    pub fn final_regret(&self) -> S {
        self.rows.last().map_or(S::zero(), |r| r.cum_regret)
    }

    pub fn bins_per_round(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.bins).collect()
    }

    pub fn bound_params(&self, lambda_max: S, cost: S, sensors: usize) -> BoundParams<S> {
        let (k_low, k_high) = BoundParams::schedule_constants(&self.bins_per_round());
        BoundParams {
            k_low,
            k_high,
            lambda_max,
            cost,
            sensors,
            horizon: self.rows.len() as u64,
        }
    }

    /// Rounds where `δ(A*_t) > 2 C U / K_t + slack`.
    pub fn discretisation_violations(&self, cost: S, sensors: usize, slack: S) -> Vec<u64> {
        let cu2 = S::lit(2.0) * cost * S::lit(sensors as f64);
        self.rows
            .iter()
            .filter(|r| r.disc_regret > cu2 / S::lit(r.bins as f64) + slack)
            .map(|r| r.t)
            .collect()
    }
}

/// Per-bin state of one arm at a chosen round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct BinSnapshot<S> {
    pub lo: S,
    pub hi: S,
    pub events: u64,
    pub sensed: u64,
    pub shape: S,
    pub rate: S,
    pub mean: S,
    pub ci_low: S,
    pub ci_high: S,
    /// The value the policy optimized against in this bin, if it computed one.
    pub index: Option<S>,
    /// Bin average of the true rate.
    pub true_rate: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct PosteriorSnapshot<S> {
    pub arm: String,
    pub replication: usize,
    pub round: u64,
    pub credible_mass: S,
    pub bins: Vec<BinSnapshot<S>>,
    pub action: Action<S>,
}
