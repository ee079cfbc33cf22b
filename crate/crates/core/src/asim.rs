//! Action selection by iterative merging.
//!
//! Given a piecewise-constant rate on a mesh, finds the union of at most `U`
//! disjoint bin-aligned intervals maximizing `Σ ∫_I (λ - C)`. Bins are first
//! grouped into maximal same-sign runs, so neighbouring intervals alternate in
//! sign, and negative intervals at either end are discarded. While more than
//! `U` positive intervals remain, the interval with the smallest `|w|` is
//! removed from play: an interior one is fused with both neighbours, an end
//! one is dropped together with its neighbour. Either step removes exactly one
//! positive interval. Restricting the choice to interior intervals alone is
//! not enough: on `(+2, -4, +4, -5, +4)` with two sensors it would fuse the
//! middle `+4` and end at weight 6 instead of 8.
//!
//! Ties are broken toward the leftmost interval.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::binning::{Action, Mesh};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest mesh the exhaustive oracle accepts.
pub const BRUTE_FORCE_LIMIT: usize = 20;

/// Run of bins `first..=last` with weight `Σ Δ(ψ_k - C)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct WeightedInterval<S> {
    pub first: usize,
    pub last: usize,
    pub weight: S,
}

impl<S: Scalar> WeightedInterval<S> {
    // A positive run always starts with a strictly positive bin, so the sign
    // of the accumulated weight is the run's sign.
    fn is_positive(&self) -> bool {
        self.weight > S::zero()
    }
}

/// Outcome of a selection with bookkeeping used by the complexity checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection<S> {
    /// Chosen runs as inclusive bin ranges, left to right.
    pub runs: Vec<(usize, usize)>,
    /// Total weight of the chosen runs.
    pub weight: S,
    /// Number of sign-alternating intervals after trimming negative ends.
    pub initial_intervals: usize,
    pub merges: usize,
}

/// Per-bin weights `Δ(ψ_k - C)`.
pub fn bin_weights<S: Scalar>(bin_rates: &[S], cost: S, mesh: &Mesh<S>) -> Result<Vec<S>> {
    if bin_rates.len() != mesh.len() {
        return Err(Error::InvalidParameter(format!(
            "{} rates for a mesh of {} bins",
            bin_rates.len(),
            mesh.len()
        )));
    }
    let delta = mesh.width();
    Ok(bin_rates.iter().map(|&psi| delta * (psi - cost)).collect())
}

/// Groups bins into maximal same-sign runs.
///
/// A zero-weight bin takes the sign of the run before it; leading zeros count
/// as negative.
pub fn build_initial_intervals<S: Scalar>(weights: &[S]) -> Result<Vec<WeightedInterval<S>>> {
    if weights.is_empty() {
        return Err(Error::EmptyInput("bin weights"));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
        return Err(Error::Numerical(format!("non-finite bin weight {w}")));
    }
    let mut out: Vec<WeightedInterval<S>> = Vec::new();
    for (k, &w) in weights.iter().enumerate() {
        let positive = match out.last() {
            _ if w > S::zero() => true,
            _ if w < S::zero() => false,
            Some(run) => run.is_positive(),
            None => false,
        };
        match out.last_mut() {
            Some(run) if run.is_positive() == positive => {
                run.last = k;
                run.weight = run.weight + w;
            }
            _ => out.push(WeightedInterval {
                first: k,
                last: k,
                weight: w,
            }),
        }
    }
    Ok(out)
}

const NIL: u32 = u32::MAX;

/// Heap entry `(|w| as ordered bits, first bin, slot)`. An entry is current
/// while its slot still has the same first bin and magnitude; dead slots have
/// `first == NIL`.
type Candidate = (u64, u32, u32);

#[derive(Debug, Clone, Copy)]
struct Node<S> {
    weight: S,
    first: u32,
    last: u32,
    prev: u32,
    next: u32,
}

/// Doubly linked list of intervals supporting in-place triple fusion.
struct Chain<S> {
    nodes: Vec<Node<S>>,
    head: u32,
}

impl<S: Scalar> Chain<S> {
    fn new(items: &[WeightedInterval<S>]) -> Self {
        let n = items.len() as u32;
        let nodes = items
            .iter()
            .zip(0u32..)
            .map(|(iv, i)| Node {
                weight: iv.weight,
                first: iv.first as u32,
                last: iv.last as u32,
                prev: if i == 0 { NIL } else { i - 1 },
                next: if i + 1 == n { NIL } else { i + 1 },
            })
            .collect();
        Self {
            nodes,
            head: if n == 0 { NIL } else { 0 },
        }
    }

    fn candidate(&self, i: u32) -> Reverse<Candidate> {
        let node = &self.nodes[i as usize];
        Reverse((node.weight.magnitude_key(), node.first, i))
    }

    fn is_current(&self, &(key, first, slot): &Candidate) -> bool {
        let node = &self.nodes[slot as usize];
        node.first == first && node.weight.magnitude_key() == key
    }

    /// Fuses `i` with both neighbours, storing the result in slot `i`.
    fn fuse(&mut self, i: u32) {
        let Node { prev: p, next: q, .. } = self.nodes[i as usize];
        let (left, right) = (self.nodes[p as usize], self.nodes[q as usize]);
        self.nodes[p as usize].first = NIL;
        self.nodes[q as usize].first = NIL;
        let node = &mut self.nodes[i as usize];
        node.weight = left.weight + node.weight + right.weight;
        node.first = left.first;
        node.last = right.last;
        node.prev = left.prev;
        node.next = right.next;
        if left.prev == NIL {
            self.head = i;
        } else {
            self.nodes[left.prev as usize].next = i;
        }
        if right.next != NIL {
            self.nodes[right.next as usize].prev = i;
        }
    }

    /// Removes end interval `i` together with its only neighbour.
    fn drop_end(&mut self, i: u32) {
        let Node { prev: p, next: q, .. } = self.nodes[i as usize];
        self.nodes[i as usize].first = NIL;
        if p == NIL {
            self.nodes[q as usize].first = NIL;
            self.head = self.nodes[q as usize].next;
            if self.head != NIL {
                self.nodes[self.head as usize].prev = NIL;
            }
        } else {
            self.nodes[p as usize].first = NIL;
            let tail = self.nodes[p as usize].prev;
            if tail == NIL {
                self.head = NIL;
            } else {
                self.nodes[tail as usize].next = NIL;
            }
        }
    }

    fn in_order(&self) -> Vec<WeightedInterval<S>> {
        let mut out = Vec::new();
        let mut cur = self.head;
        while cur != NIL {
            let node = &self.nodes[cur as usize];
            out.push(WeightedInterval {
                first: node.first as usize,
                last: node.last as usize,
                weight: node.weight,
            });
            cur = node.next;
        }
        out
    }
}

/// Optimal runs for the given per-bin weights and sensor budget.
pub fn select_runs<S: Scalar>(weights: &[S], sensors: usize) -> Result<Selection<S>> {
    if sensors == 0 {
        return Err(Error::InvalidParameter("at least one sensor is required".into()));
    }
    if weights.len() >= NIL as usize {
        return Err(Error::SizeGuard {
            size: weights.len(),
            limit: NIL as usize - 1,
        });
    }
    let mut intervals = build_initial_intervals(weights)?;
    // A negative end interval never belongs to an optimal action.
    while intervals.last().is_some_and(|iv| !iv.is_positive()) {
        intervals.pop();
    }
    let lead = intervals.iter().take_while(|iv| !iv.is_positive()).count();
    intervals.drain(..lead);
    let initial_intervals = intervals.len();

    let mut positives = intervals.iter().filter(|iv| iv.is_positive()).count();
    let mut chain = Chain::new(&intervals);
    let mut merges = 0;

    if positives > sensors {
        // The smallest |w| among live intervals is never heavier than its
        // neighbours, so the global minimum is always a valid pivot.
        let mut heap: BinaryHeap<Reverse<Candidate>> =
            (0..chain.nodes.len() as u32).map(|i| chain.candidate(i)).collect();
        while positives > sensors {
            let Some(Reverse(top)) = heap.pop() else {
                break;
            };
            if !chain.is_current(&top) {
                continue;
            }
            let i = top.2;
            let node = chain.nodes[i as usize];
            merges += 1;
            positives -= 1;
            if node.prev != NIL && node.next != NIL {
                chain.fuse(i);
                heap.push(chain.candidate(i));
            } else {
                chain.drop_end(i);
            }
        }
    }

    let mut chosen: Vec<WeightedInterval<S>> = chain
        .in_order()
        .into_iter()
        .filter(WeightedInterval::is_positive)
        .collect();
    if chosen.len() > sensors {
        // heaviest first, leftmost on ties; the sort is stable
        chosen.sort_by(|a, b| b.weight.partial_cmp(&a.weight).unwrap_or(Ordering::Equal));
        chosen.truncate(sensors);
        chosen.sort_by_key(|iv| iv.first);
    }
    let runs: Vec<(usize, usize)> = chosen.iter().map(|iv| (iv.first, iv.last)).collect();
    Ok(Selection {
        weight: runs_weight(weights, &runs),
        runs,
        initial_intervals,
        merges,
    })
}

/// Optimal action when the rate in bin `k` is `bin_rates[k]`.
pub fn asim_select<S: Scalar>(
    bin_rates: &[S],
    cost: S,
    sensors: usize,
    mesh: &Mesh<S>,
) -> Result<Action<S>> {
    let weights = bin_weights(bin_rates, cost, mesh)?;
    let selection = select_runs(&weights, sensors)?;
    mesh.action_from_runs(&selection.runs)
}

/// Total weight of inclusive runs, summed bin by bin from the left.
pub fn runs_weight<S: Scalar>(weights: &[S], runs: &[(usize, usize)]) -> S {
    runs.iter()
        .flat_map(|&(first, last)| weights[first..=last].iter().copied())
        .fold(S::zero(), |acc, w| acc + w)
}

/// Exhaustive search over every bin subset forming at most `sensors` runs.
///
/// Ties go to fewer bins, then to the lexicographically smallest bin list.
pub fn brute_force_select<S: Scalar>(weights: &[S], sensors: usize) -> Result<Selection<S>> {
    let k = weights.len();
    if k > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeGuard {
            size: k,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if sensors == 0 {
        return Err(Error::InvalidParameter("at least one sensor is required".into()));
    }
    let mut best_mask = 0u32;
    let mut best_weight = S::zero();
    for mask in 1u32..(1u32 << k) {
        let starts = mask & !(mask << 1);
        if starts.count_ones() as usize > sensors {
            continue;
        }
        let total = (0..k)
            .filter(|b| mask >> b & 1 == 1)
            .fold(S::zero(), |acc, b| acc + weights[b]);
        let better = match total.partial_cmp(&best_weight) {
            Some(Ordering::Greater) => true,
            Some(Ordering::Equal) => prefer_on_tie(mask, best_mask),
            _ => false,
        };
        if better {
            best_mask = mask;
            best_weight = total;
        }
    }
    let bins: Vec<usize> = (0..k).filter(|b| best_mask >> b & 1 == 1).collect();
    let runs = crate::binning::runs_of(&bins);
    Ok(Selection {
        weight: runs_weight(weights, &runs),
        runs,
        initial_intervals: 0,
        merges: 0,
    })
}

fn prefer_on_tie(mask: u32, incumbent: u32) -> bool {
    match mask.count_ones().cmp(&incumbent.count_ones()) {
        Ordering::Less => true,
        Ordering::Greater => false,
        // same size: the smaller lowest differing bin wins lexicographically
        Ordering::Equal => {
            let diff = mask ^ incumbent;
            diff != 0 && mask & (diff & diff.wrapping_neg()) != 0
        }
    }
}

/// Counts from a randomized comparison of [`select_runs`] against
/// [`brute_force_select`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub instances: usize,
    pub passed: usize,
    pub failed: usize,
    /// Largest absolute gap between the two total weights.
    pub max_gap: f64,
}

/// Draws `instances` problems with `K` in `1..=max_bins`, `U` in
/// `1..=max_sensors` and weights uniform on `[-1, 1]`, and compares the
/// total weight of both selections against `tol`.
pub fn oracle_check<R: rand::Rng + ?Sized>(
    instances: usize,
    max_bins: usize,
    max_sensors: usize,
    tol: f64,
    rng: &mut R,
) -> Result<OracleReport> {
    if !(1..=BRUTE_FORCE_LIMIT).contains(&max_bins) || max_sensors < 1 {
        return Err(Error::InvalidParameter(format!(
            "oracle check needs 1 <= K <= {BRUTE_FORCE_LIMIT} and U >= 1"
        )));
    }
    let mut report = OracleReport {
        instances,
        passed: 0,
        failed: 0,
        max_gap: 0.0,
    };
    for _ in 0..instances {
        let k = rng.random_range(1..=max_bins);
        let u = rng.random_range(1..=max_sensors);
        let weights: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let fast = select_runs(&weights, u)?;
        let slow = brute_force_select(&weights, u)?;
        let gap = (runs_weight(&weights, &fast.runs) - slow.weight).abs();
        report.max_gap = report.max_gap.max(gap);
        if gap <= tol && fast.runs.len() <= u {
            report.passed += 1;
        } else {
            report.failed += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn runs(weights: &[f64], u: usize) -> Vec<(usize, usize)> {
        select_runs(weights, u).unwrap().runs
    }

    #[test]
    fn initial_runs_group_by_sign() {
        let iv = build_initial_intervals(&[1.0, 2.0, -1.0, 3.0]).unwrap();
        let got: Vec<_> = iv.iter().map(|i| (i.first, i.last, i.weight)).collect();
        assert_eq!(got, vec![(0, 1, 3.0), (2, 2, -1.0), (3, 3, 3.0)]);
        let neg = build_initial_intervals(&[-1.0, -2.0, -0.5]).unwrap();
        assert_eq!(neg.len(), 1);
        assert_eq!(neg[0].weight, -3.5);
        let pos = build_initial_intervals(&[1.0, 0.5]).unwrap();
        assert_eq!(pos.len(), 1);
        assert!(build_initial_intervals::<f64>(&[]).is_err());
    }

    #[test]
    fn zeros_join_preceding_run() {
        let iv = build_initial_intervals(&[0.0, -1.0, 0.0, 2.0, 0.0, -1.0]).unwrap();
        let got: Vec<_> = iv.iter().map(|i| (i.first, i.last)).collect();
        assert_eq!(got, vec![(0, 2), (3, 4), (5, 5)]);
    }

    #[test]
    fn signs_alternate() {
        let iv = build_initial_intervals(&[1.0, -1.0, -2.0, 0.0, 3.0, 0.0, 1.0, -4.0]).unwrap();
        assert!(iv.windows(2).all(|w| (w[0].weight > 0.0) != (w[1].weight > 0.0)));
    }

    #[test]
    fn merge_through_cheap_gap() {
        assert_eq!(runs(&[3.0, -1.0, 2.0], 1), vec![(0, 2)]);
        assert_eq!(select_runs(&[3.0, -1.0, 2.0], 1).unwrap().weight, 4.0);
    }

    #[test]
    fn expensive_gap_keeps_best_single() {
        assert_eq!(runs(&[3.0, -2.5, 2.0], 1), vec![(0, 0)]);
    }

    #[test]
    fn enough_sensors_take_every_positive_run() {
        assert_eq!(runs(&[3.0, -1.0, 2.0], 2), vec![(0, 0), (2, 2)]);
    }

    #[test]
    fn all_negative_is_empty() {
        for u in 1..4 {
            assert!(runs(&[-1.0, -0.1, -3.0], u).is_empty());
        }
        assert!(runs(&[0.0, 0.0], 1).is_empty());
    }

    #[test]
    fn zero_sensors_rejected() {
        assert!(select_runs(&[1.0], 0).is_err());
    }

    #[test]
    fn brute_force_examples() {
        let s = brute_force_select(&[3.0, -1.0, 2.0], 2).unwrap();
        assert_eq!(s.runs, vec![(0, 0), (2, 2)]);
        assert_eq!(s.weight, 5.0);
        assert!(brute_force_select(&[-1.0], 1).unwrap().runs.is_empty());
        assert!(matches!(
            brute_force_select(&[0.0; 21], 1),
            Err(Error::SizeGuard { .. })
        ));
    }

    #[test]
    fn brute_force_tie_rules() {
        // {0} and {2} tie; fewer bins equal, lexicographic picks bin 0
        let s = brute_force_select(&[1.0, -1.0, 1.0], 1).unwrap();
        assert_eq!(s.runs, vec![(0, 0)]);
        // {0} and {0,1} tie on weight; fewer bins wins
        let s = brute_force_select(&[1.0, 0.0], 1).unwrap();
        assert_eq!(s.runs, vec![(0, 0)]);
    }

    #[test]
    fn action_from_rates() {
        let mesh = Mesh::<f64>::new(4).unwrap();
        let a = asim_select(&[12.0, 12.0, 1.0, 12.0], 10.0, 1, &mesh).unwrap();
        assert_eq!(a.intervals(), &[(0.0, 0.5)]);
        let all = asim_select(&[11.0; 4], 10.0, 1, &mesh).unwrap();
        assert_eq!(all, Action::full());
        assert!(asim_select(&[1.0; 3], 10.0, 1, &mesh).is_err());
    }

    #[test]
    fn light_end_interval_is_dropped() {
        let w = [2.0, -4.0, 4.0, -5.0, 4.0];
        let s = select_runs(&w, 2).unwrap();
        assert_eq!(s.runs, vec![(2, 2), (4, 4)]);
        assert_eq!(s.weight, 8.0);
        assert_eq!(brute_force_select(&w, 2).unwrap().weight, 8.0);
        let s = select_runs(&[4.0, -5.0, 4.0, -4.0, 2.0], 2).unwrap();
        assert_eq!(s.runs, vec![(0, 0), (2, 2)]);
    }

    #[test]
    fn oracle_report_counts() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let r = oracle_check(300, 12, 3, 1e-12, &mut rng).unwrap();
        assert_eq!((r.passed, r.failed), (300, 0));
        assert!(oracle_check(1, 21, 1, 1e-12, &mut rng).is_err());
    }
}
