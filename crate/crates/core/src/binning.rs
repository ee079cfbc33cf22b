//! Actions, the refining histogram mesh and its sufficient statistics.
//!
//! Bin indices are zero-based: bin `k` of a mesh with `K` bins covers
//! `[k/K, (k+1)/K)`, with the last bin closed at 1 so that an event at
//! exactly 1.0 is still counted.
//!
//! Per-bin statistics are always expressed on the *current* mesh over *all*
//! past rounds: `N_k` counts rounds in which bin `k` lay inside the action and
//! `H_k` counts detected events in bin `k` from those rounds. Because a
//! refined bin's counts cannot be read off the coarse counts, the full round
//! history (actions and detected locations) is retained.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point_process::EventBatch;
use crate::scalar::Scalar;

/// A union of disjoint closed subintervals of `[0, 1]`, sorted by position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(S, S)>", into = "Vec<(S, S)>", bound = "S: Scalar")]
pub struct Action<S> {
    intervals: Vec<(S, S)>,
}

impl<S: Scalar> Default for Action<S> {
    fn default() -> Self {
        Self::empty()
    }
}

impl<S: Scalar> TryFrom<Vec<(S, S)>> for Action<S> {
    type Error = Error;

    fn try_from(intervals: Vec<(S, S)>) -> Result<Self> {
        Self::new(intervals)
    }
}

impl<S: Scalar> From<Action<S>> for Vec<(S, S)> {
    fn from(action: Action<S>) -> Self {
        action.intervals
    }
}

impl<S: Scalar> Action<S> {
    pub fn new(intervals: Vec<(S, S)>) -> Result<Self> {
        for &(lo, hi) in &intervals {
            if !(lo >= S::zero() && lo < hi && hi <= S::one()) {
                return Err(Error::InvalidAction(format!(
                    "interval [{lo}, {hi}] is not a non-degenerate subinterval of [0, 1]"
                )));
            }
        }
        if let Some(w) = intervals.windows(2).find(|w| !(w[0].1 < w[1].0)) {
            return Err(Error::InvalidAction(format!(
                "intervals [{}, {}] and [{}, {}] overlap or are out of order",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
        Ok(Self { intervals })
    }

    pub fn empty() -> Self {
        Self {
            intervals: Vec::new(),
        }
    }

    pub fn full() -> Self {
        Self {
            intervals: vec![(S::zero(), S::one())],
        }
    }

    pub fn intervals(&self) -> &[(S, S)] {
        &self.intervals
    }

    /// Number of subintervals (sensors in use).
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Total length `|A|`.
    pub fn measure(&self) -> S {
        self.intervals.iter().map(|&(lo, hi)| hi - lo).sum()
    }

    pub fn contains(&self, x: S) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo <= x && x <= hi)
    }

    /// Fails if the action needs more than `sensors` subintervals.
    pub fn check_sensors(&self, sensors: usize) -> Result<()> {
        if self.len() > sensors {
            return Err(Error::InvalidAction(format!(
                "{} intervals exceed the {sensors} available sensors",
                self.len()
            )));
        }
        Ok(())
    }
}

/// Uniform grid of `K` bins of width `1/K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Mesh<S> {
    k_count: usize,
    width: S,
    round_created: u64,
}

impl<S: Scalar> Mesh<S> {
    pub fn new(k_count: usize) -> Result<Self> {
        Self::created_at(k_count, 0)
    }

    pub fn created_at(k_count: usize, round_created: u64) -> Result<Self> {
        if k_count == 0 {
            return Err(Error::InvalidParameter("mesh needs at least one bin".into()));
        }
        Ok(Self {
            k_count,
            width: S::one() / S::lit(k_count as f64),
            round_created,
        })
    }

    pub fn len(&self) -> usize {
        self.k_count
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Bin width `Δ = 1/K`.
    pub fn width(&self) -> S {
        self.width
    }

    /// Round after which this mesh became active (0 for the initial mesh).
    pub fn round_created(&self) -> u64 {
        self.round_created
    }

    fn boundary(&self, k: usize) -> S {
        S::lit(k as f64) / S::lit(self.k_count as f64)
    }

    /// `[k/K, (k+1)/K)` for zero-based `k`.
    pub fn bounds(&self, k: usize) -> Result<(S, S)> {
        if k >= self.k_count {
            return Err(Error::BinOutOfRange {
                index: k,
                bins: self.k_count,
            });
        }
        Ok((self.boundary(k), self.boundary(k + 1)))
    }

    /// Bin containing `x`; 1.0 maps to the last bin.
    pub fn bin_of(&self, x: S) -> usize {
        let k = (x * S::lit(self.k_count as f64)).floor();
        let k = k.to_usize().unwrap_or(0);
        k.min(self.k_count - 1)
    }

    fn grid_index(&self, endpoint: S) -> Result<usize> {
        let scaled = endpoint * S::lit(self.k_count as f64);
        let nearest = scaled.round();
        let tol = S::lit(8.0) * S::epsilon() * S::lit(self.k_count as f64).max(S::one());
        if (scaled - nearest).abs() > tol {
            return Err(Error::Misaligned {
                endpoint: endpoint.as_f64(),
                bins: self.k_count,
            });
        }
        Ok(nearest.to_usize().unwrap_or(0))
    }

    /// Half-open bin ranges `[first, end)` covered by each interval of `action`.
    pub fn bin_ranges(&self, action: &Action<S>) -> Result<Vec<(usize, usize)>> {
        action
            .intervals()
            .iter()
            .map(|&(lo, hi)| Ok((self.grid_index(lo)?, self.grid_index(hi)?)))
            .collect()
    }

    /// Builds the action covering maximal runs of bins, given as inclusive
    /// `(first, last)` index pairs in increasing order.
    pub fn action_from_runs(&self, runs: &[(usize, usize)]) -> Result<Action<S>> {
        let mut intervals = Vec::with_capacity(runs.len());
        for &(first, last) in runs {
            if first > last || last >= self.k_count {
                return Err(Error::BinOutOfRange {
                    index: last,
                    bins: self.k_count,
                });
            }
            intervals.push((self.boundary(first), self.boundary(last + 1)));
        }
        Action::new(intervals)
    }

    /// The same grid with twice as many bins, active from `round + 1`.
    pub fn refined(&self, round: u64) -> Self {
        Self::created_at(self.k_count * 2, round).expect("non-empty mesh")
    }
}

/// Indices of the bins covered by a bin-aligned action, in increasing order.
pub fn action_to_bins<S: Scalar>(action: &Action<S>, mesh: &Mesh<S>) -> Result<Vec<usize>> {
    Ok(mesh
        .bin_ranges(action)?
        .into_iter()
        .flat_map(|(first, end)| first..end)
        .collect())
}

/// Groups sorted bin indices into maximal runs and builds the matching action.
pub fn bins_to_action<S: Scalar>(bins: &[usize], mesh: &Mesh<S>) -> Result<Action<S>> {
    mesh.action_from_runs(&runs_of(bins))
}

/// Maximal runs of consecutive indices as inclusive pairs.
pub fn runs_of(bins: &[usize]) -> Vec<(usize, usize)> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for &k in bins {
        match runs.last_mut() {
            Some(run) if run.1 + 1 == k => run.1 = k,
            _ => runs.push((k, k)),
        }
    }
    runs
}

/// Per-bin detected-event counts `H` and sensed-round counts `N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinStats {
    events: Vec<u64>,
    sensed: Vec<u64>,
}

impl BinStats {
    pub fn zeros(bins: usize) -> Self {
        Self {
            events: vec![0; bins],
            sensed: vec![0; bins],
        }
    }

    pub fn from_counts(events: Vec<u64>, sensed: Vec<u64>) -> Result<Self> {
        if events.len() != sensed.len() {
            return Err(Error::InvalidParameter(format!(
                "count vectors differ in length: {} vs {}",
                events.len(),
                sensed.len()
            )));
        }
        Ok(Self { events, sensed })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// `H_k` for every bin.
    pub fn events(&self) -> &[u64] {
        &self.events
    }

    /// `N_k` for every bin.
    pub fn sensed(&self) -> &[u64] {
        &self.sensed
    }

    pub fn total_events(&self) -> u64 {
        self.events.iter().sum()
    }

    pub fn total_sensed(&self) -> u64 {
        self.sensed.iter().sum()
    }
}

/// One round of raw observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct RoundRecord<S> {
    pub round: u64,
    pub action: Action<S>,
    pub events: Vec<S>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct History<S> {
    rounds: Vec<RoundRecord<S>>,
}

impl<S: Scalar> History<S> {
    pub fn new() -> Self {
        Self { rounds: Vec::new() }
    }

    pub fn rounds(&self) -> &[RoundRecord<S>] {
        &self.rounds
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn push(&mut self, record: RoundRecord<S>) {
        self.rounds.push(record);
    }
}

fn in_ranges(ranges: &[(usize, usize)], k: usize) -> bool {
    ranges.iter().any(|&(first, end)| first <= k && k < end)
}

/// Recounts `H` and `N` on `mesh` from the full history.
pub fn stats_recompute<S: Scalar>(history: &History<S>, mesh: &Mesh<S>) -> Result<BinStats> {
    let mut stats = BinStats::zeros(mesh.len());
    for record in history.rounds() {
        let ranges = mesh.bin_ranges(&record.action)?;
        for &(first, end) in &ranges {
            for n in &mut stats.sensed[first..end] {
                *n += 1;
            }
        }
        for &x in &record.events {
            let k = mesh.bin_of(x);
            if in_ranges(&ranges, k) {
                stats.events[k] += 1;
            }
        }
    }
    Ok(stats)
}

/// How fast the mesh is refined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    /// Double whenever `t` has doubled since the last refinement.
    Linear,
    /// Double whenever `sqrt(t)` has doubled.
    Sqrt,
    /// Double whenever `cbrt(t)` has doubled.
    Cuberoot,
}

impl ScheduleKind {
    /// `f(t) >= 2 f(s)` is equivalent to `t >= 2^p s` with this `p`.
    fn growth_power(self) -> u32 {
        match self {
            ScheduleKind::Linear => 1,
            ScheduleKind::Sqrt => 2,
            ScheduleKind::Cuberoot => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Linear => "linear",
            ScheduleKind::Sqrt => "sqrt",
            ScheduleKind::Cuberoot => "cuberoot",
        }
    }

    /// `f(t)` for this schedule.
    pub fn growth<S: Scalar>(self, t: u64) -> S {
        let t = S::lit(t as f64);
        match self {
            ScheduleKind::Linear => t,
            ScheduleKind::Sqrt => t.sqrt(),
            ScheduleKind::Cuberoot => t.cbrt(),
        }
    }
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ScheduleKind::Linear),
            "sqrt" => Ok(ScheduleKind::Sqrt),
            "cuberoot" => Ok(ScheduleKind::Cuberoot),
            other => Err(Error::Config(format!("unknown schedule '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RebinSchedule {
    pub kind: ScheduleKind,
    pub k0: usize,
}

impl RebinSchedule {
    pub fn new(kind: ScheduleKind, k0: usize) -> Result<Self> {
        if k0 == 0 {
            return Err(Error::InvalidParameter("K_0 must be positive".into()));
        }
        Ok(Self { kind, k0 })
    }

    /// Whether the mesh doubles at the end of round `t`, given the round of
    /// the previous refinement (1 before any refinement).
    pub fn doubles_after(&self, t: u64, last_rebin: u64) -> bool {
        let factor = 1u64 << self.kind.growth_power();
        t >= last_rebin.saturating_mul(factor)
    }

    /// Number of bins in use during each round `1..=horizon`.
    pub fn bins_per_round(&self, horizon: u64) -> Vec<usize> {
        let mut k = self.k0;
        let mut last = 1;
        let mut out = Vec::with_capacity(horizon as usize);
        for t in 1..=horizon {
            out.push(k);
            if self.doubles_after(t, last) {
                k *= 2;
                last = t;
            }
        }
        out
    }
}

/// Mesh, statistics and history evolving together over a run.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "S: Scalar")]
pub struct Histogram<S> {
    schedule: RebinSchedule,
    mesh: Mesh<S>,
    stats: BinStats,
    history: History<S>,
    last_rebin: u64,
}

impl<S: Scalar> Histogram<S> {
    pub fn new(schedule: RebinSchedule) -> Self {
        let mesh = Mesh::new(schedule.k0).expect("schedule K_0 is positive");
        Self {
            schedule,
            stats: BinStats::zeros(mesh.len()),
            mesh,
            history: History::new(),
            last_rebin: 1,
        }
    }

    pub fn schedule(&self) -> &RebinSchedule {
        &self.schedule
    }

    pub fn mesh(&self) -> &Mesh<S> {
        &self.mesh
    }

    pub fn stats(&self) -> &BinStats {
        &self.stats
    }

    pub fn history(&self) -> &History<S> {
        &self.history
    }

    /// Adds one round's observations. The action must be aligned to the
    /// current mesh.
    pub fn record(&mut self, action: &Action<S>, batch: &EventBatch<S>) -> Result<()> {
        let ranges = self.mesh.bin_ranges(action)?;
        for &(first, end) in &ranges {
            for n in &mut self.stats.sensed[first..end] {
                *n += 1;
            }
        }
        for &x in &batch.locations {
            let k = self.mesh.bin_of(x);
            if in_ranges(&ranges, k) {
                self.stats.events[k] += 1;
            }
        }
        self.history.push(RoundRecord {
            round: batch.round,
            action: action.clone(),
            events: batch.locations.clone(),
        });
        Ok(())
    }

    /// Applies the refinement schedule at the end of round `t`. Returns true
    /// if the mesh doubled; the new mesh is used from round `t + 1`.
    pub fn maybe_rebin(&mut self, t: u64) -> Result<bool> {
        if !self.schedule.doubles_after(t, self.last_rebin) {
            return Ok(false);
        }
        let fine = self.mesh.refined(t);
        self.stats = refine_stats(&self.stats, &self.history, &fine)?;
        self.mesh = fine;
        self.last_rebin = t;
        Ok(true)
    }
}

/// Statistics on a mesh with twice the bins: each child inherits its parent's
/// `N` (every stored action is aligned to a coarser mesh, so a child was
/// sensed exactly when its parent was) and `H` is recounted from history.
fn refine_stats<S: Scalar>(
    coarse: &BinStats,
    history: &History<S>,
    fine: &Mesh<S>,
) -> Result<BinStats> {
    let sensed: Vec<u64> = coarse.sensed.iter().flat_map(|&n| [n, n]).collect();
    let mut events = vec![0; fine.len()];
    for record in history.rounds() {
        let ranges = fine.bin_ranges(&record.action)?;
        for &x in &record.events {
            let k = fine.bin_of(x);
            if in_ranges(&ranges, k) {
                events[k] += 1;
            }
        }
    }
    Ok(BinStats { events, sensed })
}
