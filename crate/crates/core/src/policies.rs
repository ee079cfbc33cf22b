//! Decision rules mapping per-bin statistics to an action.
//!
//! Every policy turns the histogram into one number per bin and hands those
//! numbers to [`asim_select`]. Thompson sampling draws them from the
//! truncated-Gamma posterior; UCB and mUCB add confidence radii to the
//! empirical means; ε-greedy uses the empirical means except on exploration
//! rounds, where it draws from the untruncated prior.
//!
//! The frequentist policies need every bin sensed at least once, so their
//! first round senses all of `[0, 1]`. Refinement preserves this: a child
//! bin inherits its parent's sensed count.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::asim::asim_select;
use crate::binning::{Action, BinStats, Mesh};
use crate::error::{Error, Result};
use crate::inference::{confidence_radius, empirical_mean, posterior_for_bin, PriorParams};
use crate::scalar::Scalar;

pub const DEFAULT_EPSILON: f64 = 0.01;
pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Thompson,
    Ucb,
    Mucb,
    Epsgreedy,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Thompson => "thompson",
            PolicyKind::Ucb => "ucb",
            PolicyKind::Mucb => "mucb",
            PolicyKind::Epsgreedy => "epsgreedy",
        }
    }

    /// Whether round 1 is a forced full-interval sensing round.
    pub fn initializes_with_full_sweep(self) -> bool {
        !matches!(self, PolicyKind::Thompson)
    }
}

/// Fully resolved policy parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct PolicyConfig<S> {
    pub kind: PolicyKind,
    pub prior: PriorParams<S>,
    /// Exploration probability, used by ε-greedy only.
    pub epsilon: S,
    /// Rate bound in the UCB radius.
    pub lambda_max_policy: S,
}

impl<S: Scalar> PolicyConfig<S> {
    /// Defaults for sensing cost `cost`: `alpha = 0.5`, `beta = 0.5 / cost`,
    /// `epsilon = 0.01`.
    pub fn with_defaults(kind: PolicyKind, cost: S, lambda_max: S) -> Result<Self> {
        let alpha = S::lit(DEFAULT_ALPHA);
        let beta = alpha / cost;
        let config = Self {
            kind,
            prior: PriorParams::new(alpha, beta, lambda_max)?,
            epsilon: S::lit(DEFAULT_EPSILON),
            lambda_max_policy: lambda_max,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        if !(self.epsilon >= S::zero() && self.epsilon <= S::one()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in [0, 1], got {}",
                self.epsilon
            )));
        }
        if !(self.lambda_max_policy > S::zero()) || !self.lambda_max_policy.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "policy lambda_max must be positive and finite, got {}",
                self.lambda_max_policy
            )));
        }
        Ok(())
    }
}

/// Everything a policy sees at the start of round `t`.
#[derive(Debug, Clone, Copy)]
pub struct RoundContext<'a, S> {
    pub stats: &'a BinStats,
    pub mesh: &'a Mesh<S>,
    pub t: u64,
    pub cost: S,
    pub sensors: usize,
}

/// Chosen action and the per-bin values it was optimized against.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision<S> {
    pub action: Action<S>,
    /// Sampled rates or indices, one per bin. Empty on forced sweeps.
    pub indices: Vec<S>,
    /// True on ε-greedy exploration rounds.
    pub explored: bool,
}

impl<S: Scalar> Decision<S> {
    fn sweep() -> Self {
        Self {
            action: Action::full(),
            indices: Vec::new(),
            explored: false,
        }
    }

    fn optimize(ctx: &RoundContext<'_, S>, indices: Vec<S>, explored: bool) -> Result<Self> {
        let action = asim_select(&indices, ctx.cost, ctx.sensors, ctx.mesh)?;
        Ok(Self {
            action,
            indices,
            explored,
        })
    }
}

/// One posterior draw per bin.
pub fn thompson_samples<S: Scalar, R: Rng + ?Sized>(
    stats: &BinStats,
    mesh: &Mesh<S>,
    prior: &PriorParams<S>,
    rng: &mut R,
) -> Result<Vec<S>> {
    let delta = mesh.width();
    stats
        .events()
        .iter()
        .zip(stats.sensed())
        .map(|(&h, &n)| posterior_for_bin(prior, h, n, delta)?.sample(rng))
        .collect()
}

/// Thompson sampling: optimal action for one posterior draw of the rates.
pub fn ts_step<S: Scalar, R: Rng + ?Sized>(
    ctx: &RoundContext<'_, S>,
    prior: &PriorParams<S>,
    rng: &mut R,
) -> Result<Decision<S>> {
    let samples = thompson_samples(ctx.stats, ctx.mesh, prior, rng)?;
    Decision::optimize(ctx, samples, false)
}

/// `ψ̂ + 2 log t / (ΔN) + sqrt(6 λ_max log t / (ΔN))` per bin.
pub fn ucb_indices<S: Scalar>(
    stats: &BinStats,
    mesh: &Mesh<S>,
    t: u64,
    lambda_max: S,
) -> Result<Vec<S>> {
    let delta = mesh.width();
    stats
        .events()
        .iter()
        .zip(stats.sensed())
        .map(|(&h, &n)| Ok(empirical_mean(h, n, delta)? + confidence_radius(t, n, delta, lambda_max)?))
        .collect()
}

/// Same as [`ucb_indices`] with each bin's empirical mean in place of `λ_max`.
pub fn mucb_indices<S: Scalar>(stats: &BinStats, mesh: &Mesh<S>, t: u64) -> Result<Vec<S>> {
    let delta = mesh.width();
    stats
        .events()
        .iter()
        .zip(stats.sensed())
        .map(|(&h, &n)| {
            let mean = empirical_mean(h, n, delta)?;
            Ok(mean + confidence_radius(t, n, delta, mean)?)
        })
        .collect()
}

pub fn empirical_means<S: Scalar>(stats: &BinStats, mesh: &Mesh<S>) -> Result<Vec<S>> {
    let delta = mesh.width();
    stats
        .events()
        .iter()
        .zip(stats.sensed())
        .map(|(&h, &n)| empirical_mean(h, n, delta))
        .collect()
}

pub fn ucb_step<S: Scalar>(ctx: &RoundContext<'_, S>, lambda_max: S) -> Result<Decision<S>> {
    if ctx.t <= 1 {
        return Ok(Decision::sweep());
    }
    let indices = ucb_indices(ctx.stats, ctx.mesh, ctx.t, lambda_max)?;
    Decision::optimize(ctx, indices, false)
}

pub fn mucb_step<S: Scalar>(ctx: &RoundContext<'_, S>) -> Result<Decision<S>> {
    if ctx.t <= 1 {
        return Ok(Decision::sweep());
    }
    let indices = mucb_indices(ctx.stats, ctx.mesh, ctx.t)?;
    Decision::optimize(ctx, indices, false)
}

/// With probability `epsilon` optimize against independent untruncated
/// `Gamma(alpha, beta)` prior draws, otherwise against the empirical means.
pub fn epsgreedy_step<S: Scalar, R: Rng + ?Sized>(
    ctx: &RoundContext<'_, S>,
    prior: &PriorParams<S>,
    epsilon: S,
    rng: &mut R,
) -> Result<Decision<S>> {
    if ctx.t <= 1 {
        return Ok(Decision::sweep());
    }
    if S::sample_unit(rng) < epsilon {
        let draws = (0..ctx.mesh.len())
            .map(|_| {
                S::sample_gamma(prior.alpha, prior.beta, rng).ok_or_else(|| {
                    Error::Numerical(format!(
                        "gamma sampler rejected prior ({}, {})",
                        prior.alpha, prior.beta
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Decision::optimize(ctx, draws, true)
    } else {
        let means = empirical_means(ctx.stats, ctx.mesh)?;
        Decision::optimize(ctx, means, false)
    }
}

impl<S: Scalar> PolicyConfig<S> {
    pub fn decide<R: Rng + ?Sized>(
        &self,
        ctx: &RoundContext<'_, S>,
        rng: &mut R,
    ) -> Result<Decision<S>> {
        match self.kind {
            PolicyKind::Thompson => ts_step(ctx, &self.prior, rng),
            PolicyKind::Ucb => ucb_step(ctx, self.lambda_max_policy),
            PolicyKind::Mucb => mucb_step(ctx),
            PolicyKind::Epsgreedy => epsgreedy_step(ctx, &self.prior, self.epsilon, rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctx<'a>(stats: &'a BinStats, mesh: &'a Mesh<f64>, t: u64) -> RoundContext<'a, f64> {
        RoundContext {
            stats,
            mesh,
            t,
            cost: 10.0,
            sensors: 1,
        }
    }

    #[test]
    fn thompson_low_prior_senses_nothing() {
        let mesh = Mesh::new(8).unwrap();
        let stats = BinStats::zeros(8);
        // prior mass concentrated far below the cost
        let prior = PriorParams::new(1.0, 1000.0, 50.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = ts_step(&ctx(&stats, &mesh, 1), &prior, &mut rng).unwrap();
        assert!(d.action.is_empty());
        assert_eq!(d.indices.len(), 8);
    }

    #[test]
    fn thompson_high_prior_senses_everything() {
        let mesh = Mesh::new(8).unwrap();
        let stats = BinStats::zeros(8);
        // Gamma(10^4, 10^2) sits at 100 +- 1, far above the cost of 10
        let prior = PriorParams::new(1e4, 1e2, 1e3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = ts_step(&ctx(&stats, &mesh, 1), &prior, &mut rng).unwrap();
        assert_eq!(d.action, Action::full());
    }

    #[test]
    fn thompson_replays_with_seed() {
        let mesh = Mesh::new(16).unwrap();
        let stats =
            BinStats::from_counts((0..16).map(|k| k % 5).collect(), vec![3; 16]).unwrap();
        let prior = PriorParams::new(0.5, 0.05, 119.0).unwrap();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            ts_step(&ctx(&stats, &mesh, 4), &prior, &mut rng).unwrap()
        };
        assert_eq!(run(7), run(7));
    }

    #[test]
    fn ucb_sweeps_first_round() {
        let mesh = Mesh::new(4).unwrap();
        let stats = BinStats::zeros(4);
        let d = ucb_step(&ctx(&stats, &mesh, 1), 12.0).unwrap();
        assert_eq!(d.action, Action::full());
        assert!(ucb_step(&ctx(&stats, &mesh, 2), 12.0).is_err());
    }

    #[test]
    fn ucb_large_radius_senses_everything() {
        let mesh = Mesh::new(4).unwrap();
        let stats = BinStats::from_counts(vec![0; 4], vec![1; 4]).unwrap();
        let d = ucb_step(&ctx(&stats, &mesh, 100), 12.0).unwrap();
        assert_eq!(d.action, Action::full());
    }

    #[test]
    fn ucb_indices_by_hand() {
        let mesh = Mesh::<f64>::new(2).unwrap();
        let stats = BinStats::from_counts(vec![4, 1], vec![2, 5]).unwrap();
        let idx = ucb_indices(&stats, &mesh, 7, 15.0).unwrap();
        let l = 7f64.ln();
        let manual = |h: f64, n: f64| h / (0.5 * n) + 2.0 * l / (0.5 * n) + (6.0 * 15.0 * l / (0.5 * n)).sqrt();
        assert!((idx[0] - manual(4.0, 2.0)).abs() < 1e-12);
        assert!((idx[1] - manual(1.0, 5.0)).abs() < 1e-12);
        for (k, &i) in idx.iter().enumerate() {
            let mean = empirical_mean(stats.events()[k], stats.sensed()[k], 0.5).unwrap();
            assert!(i >= mean);
        }
    }

    #[test]
    fn mucb_reductions() {
        let mesh = Mesh::<f64>::new(2).unwrap();
        // bin 0 empty: index is just 2 log t / (ΔN)
        let stats = BinStats::from_counts(vec![0, 6], vec![3, 2]).unwrap();
        let t = 9;
        let m = mucb_indices(&stats, &mesh, t).unwrap();
        assert!((m[0] - 2.0 * 9f64.ln() / 1.5).abs() < 1e-12);
        // bin 1 mean is 6 / 1 = 6: with lambda_max = 6 the indices agree
        let u = ucb_indices(&stats, &mesh, t, 6.0).unwrap();
        assert!((m[1] - u[1]).abs() < 1e-12);
    }

    #[test]
    fn epsilon_extremes() {
        let mesh = Mesh::new(4).unwrap();
        let stats = BinStats::from_counts(vec![10, 0, 0, 1], vec![2, 2, 2, 2]).unwrap();
        let prior = PriorParams::new(0.5, 0.05, 100.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = ctx(&stats, &mesh, 5);
        for _ in 0..50 {
            let greedy = epsgreedy_step(&c, &prior, 0.0, &mut rng).unwrap();
            assert!(!greedy.explored);
            // only bin 0 has mean 20 > 10
            assert_eq!(greedy.action.intervals(), &[(0.0, 0.25)]);
            let explore = epsgreedy_step(&c, &prior, 1.0, &mut rng).unwrap();
            assert!(explore.explored);
        }
    }
}
