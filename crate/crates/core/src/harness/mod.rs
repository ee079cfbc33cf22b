//! Experiment orchestration: true rewards, optimal actions, regret
//! accounting and the replication runner.

mod bound;
mod config;
mod output;
mod trace;

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::asim::select_runs;
use crate::binning::{Action, Histogram, Mesh};
use crate::error::Result;
use crate::inference::{credible_interval, posterior_for_bin};
use crate::point_process::RateFunction;
use crate::policies::RoundContext;
use crate::scalar::Scalar;

pub use bound::{regret_bound, BoundParams};
pub use config::{
    ArmConfig, ExperimentConfig, ResolvedArm, DEFAULT_LAMBDA_MAX_FACTOR, DEFAULT_SEED,
};
pub use output::{
    emit_traces, read_trace_csv, summarize, write_trace_csv, ArmSummary, Checkpoint, CsvRow,
    ExperimentSummary, OutputPaths,
};
pub use trace::{BinSnapshot, PosteriorSnapshot, RegretTrace, TraceRow};

/// Grid used to approximate the continuous optimum.
pub const FINE_BINS: usize = 1 << 16;

/// Credible mass reported in posterior snapshots.
pub const SNAPSHOT_MASS: f64 = 0.95;

/// `r(A) = ∫_A (λ(x) - C) dx`.
pub fn expected_reward<S: Scalar>(
    action: &Action<S>,
    rate: &RateFunction<S>,
    cost: S,
    tol: S,
) -> Result<S> {
    let mut total = S::zero();
    for &(lo, hi) in action.intervals() {
        total = total + rate.integrate(lo, hi, tol)? - cost * (hi - lo);
    }
    Ok(total)
}

/// Exact optimum on a mesh from true per-bin integrals.
pub fn optimal_discrete_action<S: Scalar>(
    rate: &RateFunction<S>,
    cost: S,
    sensors: usize,
    mesh: &Mesh<S>,
    tol: S,
) -> Result<Action<S>> {
    let integrals = (0..mesh.len())
        .map(|k| {
            let (lo, hi) = mesh.bounds(k)?;
            rate.integrate(lo, hi, tol)
        })
        .collect::<Result<Vec<_>>>()?;
    select_on_mesh(&integrals, cost, sensors, mesh)
}

/// Optimum over the `FINE_BINS` grid.
pub fn optimal_continuous_action<S: Scalar>(
    rate: &RateFunction<S>,
    cost: S,
    sensors: usize,
    tol: S,
) -> Result<Action<S>> {
    optimal_discrete_action(rate, cost, sensors, &Mesh::new(FINE_BINS)?, tol)
}

fn select_on_mesh<S: Scalar>(
    integrals: &[S],
    cost: S,
    sensors: usize,
    mesh: &Mesh<S>,
) -> Result<Action<S>> {
    let charge = cost * mesh.width();
    let weights: Vec<S> = integrals.iter().map(|&i| i - charge).collect();
    let selection = select_runs(&weights, sensors)?;
    mesh.action_from_runs(&selection.runs)
}

/// True rewards and optima for one experiment. Optima on coarse meshes that
/// divide the fine grid are assembled from the fine-bin integrals.
#[derive(Debug, Clone)]
pub struct RegretOracle<S> {
    rate: RateFunction<S>,
    cost: S,
    sensors: usize,
    tol: S,
    fine_integrals: Vec<S>,
    best: Action<S>,
    best_reward: S,
}

impl<S: Scalar> RegretOracle<S> {
    pub fn new(rate: RateFunction<S>, cost: S, sensors: usize, tol: S) -> Result<Self> {
        let fine = Mesh::new(FINE_BINS)?;
        let fine_integrals = (0..FINE_BINS)
            .into_par_iter()
            .map(|k| {
                let (lo, hi) = fine.bounds(k)?;
                rate.integrate(lo, hi, tol)
            })
            .collect::<Result<Vec<_>>>()?;
        let best = select_on_mesh(&fine_integrals, cost, sensors, &fine)?;
        let best_reward = expected_reward(&best, &rate, cost, tol)?;
        Ok(Self {
            rate,
            cost,
            sensors,
            tol,
            fine_integrals,
            best,
            best_reward,
        })
    }

    pub fn rate(&self) -> &RateFunction<S> {
        &self.rate
    }

    /// `A*`.
    pub fn optimal_action(&self) -> &Action<S> {
        &self.best
    }

    /// `r(A*)`.
    pub fn optimal_reward(&self) -> S {
        self.best_reward
    }

    pub fn reward(&self, action: &Action<S>) -> Result<S> {
        expected_reward(action, &self.rate, self.cost, self.tol)
    }

    /// `A*_t` for `mesh` and its reward.
    pub fn discrete_optimum(&self, mesh: &Mesh<S>) -> Result<(Action<S>, S)> {
        let k = mesh.len();
        let action = if FINE_BINS.is_multiple_of(k) {
            let group = FINE_BINS / k;
            let integrals: Vec<S> = self
                .fine_integrals
                .chunks(group)
                .map(|c| c.iter().copied().fold(S::zero(), |a, b| a + b))
                .collect();
            select_on_mesh(&integrals, self.cost, self.sensors, mesh)?
        } else {
            optimal_discrete_action(&self.rate, self.cost, self.sensors, mesh, self.tol)?
        };
        let reward = self.reward(&action)?;
        Ok((action, reward))
    }

    /// Bin averages `ψ_k` of the true rate on `mesh`.
    pub fn bin_rates(&self, mesh: &Mesh<S>) -> Result<Vec<S>> {
        (0..mesh.len())
            .map(|k| {
                let (lo, hi) = mesh.bounds(k)?;
                Ok(self.rate.integrate(lo, hi, self.tol)? / mesh.width())
            })
            .collect()
    }
}

const STREAM_ENVIRONMENT: u64 = 0;
const STREAM_POLICY: u64 = 1;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a path of counters into an independent seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix(master), |acc, &p| splitmix(acc ^ splitmix(p)))
}

/// The environment stream depends only on the replication, so arms of the
/// same replication face the same seed.
fn replication_rngs(master: u64, arm: usize, replication: usize) -> (ChaCha8Rng, ChaCha8Rng) {
    let rep = replication as u64;
    let env = derive_seed(master, &[rep, STREAM_ENVIRONMENT]);
    let policy = derive_seed(master, &[rep, STREAM_POLICY, arm as u64]);
    (
        ChaCha8Rng::seed_from_u64(env),
        ChaCha8Rng::seed_from_u64(policy),
    )
}

#[derive(Debug, Clone)]
pub struct ArmResult<S> {
    pub arm: ResolvedArm<S>,
    pub traces: Vec<RegretTrace<S>>,
    /// Taken from replication 0.
    pub snapshot: Option<PosteriorSnapshot<S>>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult<S> {
    pub config: ExperimentConfig<S>,
    pub optimal_action: Action<S>,
    pub optimal_reward: S,
    pub arms: Vec<ArmResult<S>>,
}

impl<S: Scalar> ExperimentResult<S> {
    pub fn arm(&self, label: &str) -> Option<&ArmResult<S>> {
        self.arms.iter().find(|a| a.arm.label == label)
    }

    pub fn traces(&self) -> impl Iterator<Item = &RegretTrace<S>> {
        self.arms.iter().flat_map(|a| a.traces.iter())
    }
}

impl<S: Scalar> ArmResult<S> {
    pub fn mean_final_regret(&self) -> S {
        let n = S::lit(self.traces.len() as f64);
        self.traces
            .iter()
            .map(|t| t.final_regret())
            .fold(S::zero(), |a, b| a + b)
            / n
    }
}

/// Runs every arm and replication of `config`. Replications run in parallel;
/// results come back in (arm, replication) order.
pub fn run_experiment<S: Scalar>(config: &ExperimentConfig<S>) -> Result<ExperimentResult<S>> {
    config.validate()?;
    let arms = config.resolve_arms()?;
    let oracle = RegretOracle::new(
        config.rate_function()?,
        config.cost,
        config.sensors,
        config.quadrature_tol(),
    )?;
    let jobs: Vec<(usize, usize)> = (0..arms.len())
        .flat_map(|a| (0..config.replications).map(move |r| (a, r)))
        .collect();
    let mut outputs = jobs
        .par_iter()
        .map(|&(a, r)| run_replication(config, &oracle, &arms[a], a, r))
        .collect::<Result<Vec<_>>>()?
        .into_iter();

    let mut results = Vec::with_capacity(arms.len());
    for arm in arms {
        let mut traces = Vec::with_capacity(config.replications);
        let mut snapshot = None;
        for r in 0..config.replications {
            let (trace, snap) = outputs.next().expect("one output per job");
            if r == 0 {
                snapshot = snap;
            }
            traces.push(trace);
        }
        results.push(ArmResult {
            arm,
            traces,
            snapshot,
        });
    }
    Ok(ExperimentResult {
        config: config.clone(),
        optimal_action: oracle.optimal_action().clone(),
        optimal_reward: oracle.optimal_reward(),
        arms: results,
    })
}

/// One replication of one arm. A posterior snapshot is produced for
/// replication 0 only.
pub fn run_replication<S: Scalar>(
    config: &ExperimentConfig<S>,
    oracle: &RegretOracle<S>,
    arm: &ResolvedArm<S>,
    arm_index: usize,
    replication: usize,
) -> Result<(RegretTrace<S>, Option<PosteriorSnapshot<S>>)> {
    let (mut env_rng, mut policy_rng) = replication_rngs(config.seed, arm_index, replication);
    let mut hist = Histogram::new(arm.schedule);
    let mut optima: HashMap<usize, S> = HashMap::new();
    let mut rows = Vec::with_capacity(config.horizon as usize);
    let mut snapshot = None;
    let snapshot_round = (replication == 0).then(|| config.snapshot_at());
    let best = oracle.optimal_reward();
    let mut cum = S::zero();

    for t in 1..=config.horizon {
        let ctx = RoundContext {
            stats: hist.stats(),
            mesh: hist.mesh(),
            t,
            cost: config.cost,
            sensors: config.sensors,
        };
        let decision = arm.policy.decide(&ctx, &mut policy_rng)?;
        if snapshot_round == Some(t) {
            snapshot = Some(posterior_snapshot(
                oracle,
                arm,
                &hist,
                t,
                &decision.indices,
                &decision.action,
            )?);
        }
        let batch = oracle
            .rate()
            .simulate_round(t, &decision.action, &mut env_rng);

        let bins = hist.mesh().len();
        let best_t = match optima.get(&bins) {
            Some(&r) => r,
            None => {
                let (_, r) = oracle.discrete_optimum(hist.mesh())?;
                optima.insert(bins, r);
                r
            }
        };
        let reward = oracle.reward(&decision.action)?;
        let inst = best - reward;
        cum = cum + inst;
        rows.push(TraceRow {
            t,
            bins,
            events: batch.len(),
            action: decision.action.clone(),
            reward,
            inst_regret: inst,
            disc_regret: best - best_t,
            cum_regret: cum,
        });

        hist.record(&decision.action, &batch)?;
        hist.maybe_rebin(t)?;
    }

    let trace = RegretTrace {
        run_id: format!("{}/{}/{}", config.name, arm.label, replication),
        arm: arm.label.clone(),
        replication,
        rows,
    };
    Ok((trace, snapshot))
}

fn posterior_snapshot<S: Scalar>(
    oracle: &RegretOracle<S>,
    arm: &ResolvedArm<S>,
    hist: &Histogram<S>,
    round: u64,
    indices: &[S],
    action: &Action<S>,
) -> Result<PosteriorSnapshot<S>> {
    let mesh = hist.mesh();
    let stats = hist.stats();
    let truth = oracle.bin_rates(mesh)?;
    let mass = S::lit(SNAPSHOT_MASS);
    let bins = (0..mesh.len())
        .map(|k| {
            let (lo, hi) = mesh.bounds(k)?;
            let (h, n) = (stats.events()[k], stats.sensed()[k]);
            let post = posterior_for_bin(&arm.policy.prior, h, n, mesh.width())?;
            let (ci_low, ci_high) = credible_interval(&post, mass)?;
            Ok(BinSnapshot {
                lo,
                hi,
                events: h,
                sensed: n,
                shape: post.shape(),
                rate: post.rate(),
                mean: post.mean()?,
                ci_low,
                ci_high,
                index: indices.get(k).copied(),
                true_rate: truth[k],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorSnapshot {
        arm: arm.label.clone(),
        replication: 0,
        round,
        credible_mass: mass,
        bins,
        action: action.clone(),
    })
}
