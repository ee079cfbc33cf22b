//! Numeric form of the Bayesian regret bound for Thompson sampling under
//! cube-root refinement.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Inputs of the bound. `k_low` and `k_high` bracket `K_t / t^{1/3}` over
/// the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct BoundParams<S> {
    pub k_low: S,
    pub k_high: S,
    pub lambda_max: S,
    pub cost: S,
    pub sensors: usize,
    pub horizon: u64,
}

impl<S: Scalar> BoundParams<S> {
    /// Empirical `(min, max)` of `K_t / t^{1/3}` for the bin counts used in
    /// rounds `1..=len`.
    pub fn schedule_constants(bins_per_round: &[usize]) -> (S, S) {
        let mut lo = S::infinity();
        let mut hi = S::zero();
        for (i, &k) in bins_per_round.iter().enumerate() {
            let t = S::lit((i + 1) as f64);
            let ratio = S::lit(k as f64) / t.cbrt();
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        (lo, hi)
    }
}

/// `4 K̄ (log(T+1) log T + 2 λ_max) T^{1/3} + (C U / K̲ + sqrt(24 K̄ λ_max log T)) T^{2/3}`.
pub fn regret_bound<S: Scalar>(p: &BoundParams<S>) -> S {
    let t = S::lit(p.horizon as f64);
    let log_t = t.ln();
    let log_t1 = (t + S::one()).ln();
    let two = S::lit(2.0);
    let first = S::lit(4.0) * p.k_high * (log_t1 * log_t + two * p.lambda_max) * t.cbrt();
    let second = (p.cost * S::lit(p.sensors as f64) / p.k_low
        + (S::lit(24.0) * p.k_high * p.lambda_max * log_t).sqrt())
        * t.cbrt().powi(2);
    first + second
}
