//! Rate functions on `[0, 1]` and one-round simulation of the event process.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::binning::Action;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default absolute tolerance for [`RateFunction::integrate`].
pub const DEFAULT_QUAD_TOL: f64 = 1e-9;

/// Grid used to locate the maximum of rates without a closed-form peak.
const SUP_GRID_POINTS: usize = 1 << 16;

/// Parametric description of an intensity on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", bound = "S: Scalar")]
pub enum RateShape<S> {
    /// `scale * (x - x^2)`; the reference experiment uses `scale = 1000/21`.
    Unimodal { scale: S },
    /// `max(0.001, 15 sin(10x) / (sqrt(10x + 1) + x))`.
    Bimodal,
    /// Step function; `breaks` runs from 0 to 1 and has one more entry than
    /// `values`. Segment `i` is `[breaks[i], breaks[i+1])`, the last is closed.
    PiecewiseConstant { breaks: Vec<S>, values: Vec<S> },
    Constant { value: S },
}

impl<S: Scalar> RateShape<S> {
    /// The unimodal test rate with its reference scale.
    pub fn reference_unimodal() -> Self {
        RateShape::Unimodal {
            scale: S::lit(1000.0 / 21.0),
        }
    }
}

/// A validated intensity together with an upper bound on its supremum.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "S: Scalar")]
pub struct RateFunction<S> {
    shape: RateShape<S>,
    max_rate: S,
    sup_bound: S,
}

fn check_unit<S: Scalar>(what: &'static str, x: S) -> Result<()> {
    if x >= S::zero() && x <= S::one() {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value: x.as_f64(),
            domain: "[0, 1]",
        })
    }
}

fn bimodal<S: Scalar>(x: S) -> S {
    let ten = S::lit(10.0);
    let raw = S::lit(15.0) * (ten * x).sin() / ((ten * x + S::one()).sqrt() + x);
    raw.max(S::lit(0.001))
}

impl<S: Scalar> RateFunction<S> {
    pub fn new(shape: RateShape<S>) -> Result<Self> {
        let max_rate = match &shape {
            RateShape::Unimodal { scale } => {
                if !(*scale >= S::zero()) || !scale.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "unimodal scale must be finite and non-negative, got {scale}"
                    )));
                }
                *scale * S::lit(0.25)
            }
            RateShape::Constant { value } => {
                if !(*value >= S::zero()) || !value.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "constant rate must be finite and non-negative, got {value}"
                    )));
                }
                *value
            }
            RateShape::PiecewiseConstant { breaks, values } => {
                validate_steps(breaks, values)?;
                values.iter().copied().fold(S::zero(), S::max)
            }
            RateShape::Bimodal => locate_max(bimodal::<S>),
        };
        // Grid-located maxima get a relative safety margin so that thinning
        // never sees an acceptance ratio above one.
        let sup_bound = match shape {
            RateShape::Bimodal => max_rate * (S::one() + S::lit(1e-9)),
            _ => max_rate,
        };
        Ok(Self {
            shape,
            max_rate,
            sup_bound,
        })
    }

    pub fn unimodal() -> Self {
        Self::new(RateShape::reference_unimodal()).expect("reference rate is valid")
    }

    pub fn bimodal() -> Self {
        Self::new(RateShape::Bimodal).expect("reference rate is valid")
    }

    pub fn constant(value: S) -> Result<Self> {
        Self::new(RateShape::Constant { value })
    }

    pub fn shape(&self) -> &RateShape<S> {
        &self.shape
    }

    /// Best known value of `max λ` on `[0, 1]`.
    pub fn max_rate(&self) -> S {
        self.max_rate
    }

    /// Upper bound on `λ` used as the dominating rate for thinning.
    pub fn sup_bound(&self) -> S {
        self.sup_bound
    }

    /// `λ(x)` for `x` in `[0, 1]`.
    pub fn eval(&self, x: S) -> Result<S> {
        check_unit("x", x)?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: S) -> S {
        match &self.shape {
            RateShape::Unimodal { scale } => *scale * (x - x * x),
            RateShape::Bimodal => bimodal(x),
            RateShape::Constant { value } => *value,
            RateShape::PiecewiseConstant { breaks, values } => values[segment_of(breaks, x)],
        }
    }

    /// `∫_a^b λ(x) dx` to absolute accuracy `tol`.
    ///
    /// Step and constant rates are integrated exactly; smooth rates use
    /// adaptive Simpson quadrature.
    pub fn integrate(&self, a: S, b: S, tol: S) -> Result<S> {
        check_unit("lower limit", a)?;
        check_unit("upper limit", b)?;
        if a > b {
            return Err(Error::InvalidParameter(format!(
                "integration limits out of order: {a} > {b}"
            )));
        }
        if !(tol > S::zero()) {
            return Err(Error::InvalidParameter(format!(
                "quadrature tolerance must be positive, got {tol}"
            )));
        }
        if a == b {
            return Ok(S::zero());
        }
        Ok(match &self.shape {
            RateShape::Constant { value } => *value * (b - a),
            RateShape::PiecewiseConstant { breaks, values } => {
                let mut total = S::zero();
                for (i, v) in values.iter().enumerate() {
                    let lo = breaks[i].max(a);
                    let hi = breaks[i + 1].min(b);
                    if hi > lo {
                        total = total + *v * (hi - lo);
                    }
                }
                total
            }
            _ => adaptive_simpson(|x| self.eval_unchecked(x), a, b, tol),
        })
    }

    /// Draws the events of one round that fall inside `action`, by thinning a
    /// homogeneous process at rate [`sup_bound`](Self::sup_bound).
    pub fn simulate_round<R: Rng + ?Sized>(
        &self,
        round: u64,
        action: &Action<S>,
        rng: &mut R,
    ) -> EventBatch<S> {
        let mut locations = Vec::new();
        let sup = self.sup_bound;
        if sup > S::zero() {
            for &(lo, hi) in action.intervals() {
                let mut x = lo;
                loop {
                    x = x + S::sample_exp1(rng) / sup;
                    if x > hi {
                        break;
                    }
                    if S::sample_unit(rng) * sup < self.eval_unchecked(x) {
                        locations.push(x);
                    }
                }
            }
        }
        EventBatch { round, locations }
    }
}

fn validate_steps<S: Scalar>(breaks: &[S], values: &[S]) -> Result<()> {
    if values.is_empty() || breaks.len() != values.len() + 1 {
        return Err(Error::InvalidParameter(format!(
            "piecewise rate needs len(breaks) = len(values) + 1 >= 2, got {} and {}",
            breaks.len(),
            values.len()
        )));
    }
    if breaks[0] != S::zero() || *breaks.last().unwrap() != S::one() {
        return Err(Error::InvalidParameter(
            "piecewise breaks must start at 0 and end at 1".into(),
        ));
    }
    if breaks.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter(
            "piecewise breaks must be strictly increasing".into(),
        ));
    }
    if values.iter().any(|v| !(*v >= S::zero()) || !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "piecewise values must be finite and non-negative".into(),
        ));
    }
    Ok(())
}

fn segment_of<S: Scalar>(breaks: &[S], x: S) -> usize {
    let last = breaks.len() - 2;
    // number of interior breaks <= x
    let idx = breaks[1..breaks.len() - 1].partition_point(|b| *b <= x);
    idx.min(last)
}

/// Dense grid search followed by golden-section refinement on the best cell.
fn locate_max<S: Scalar>(f: impl Fn(S) -> S) -> S {
    let n = SUP_GRID_POINTS;
    let step = S::one() / S::lit(n as f64);
    let mut best_i = 0;
    let mut best = f(S::zero());
    for i in 1..=n {
        let v = f(S::lit(i as f64) * step);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let mut lo = (S::lit(best_i as f64) - S::one()).max(S::zero()) * step;
    let mut hi = (S::lit(best_i as f64) + S::one()).min(S::lit(n as f64)) * step;
    let ratio = S::lit(0.618_033_988_749_894_8);
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if hi - lo <= S::epsilon() {
            break;
        }
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = f(d);
        }
    }
    best.max(fc).max(fd)
}

const SIMPSON_MAX_DEPTH: u32 = 40;
const SIMPSON_PANELS: usize = 8;

fn adaptive_simpson<S: Scalar>(f: impl Fn(S) -> S, a: S, b: S, tol: S) -> S {
    let panels = S::lit(SIMPSON_PANELS as f64);
    let panel_tol = tol / panels;
    let width = (b - a) / panels;
    let six = S::lit(6.0);
    let mut total = S::zero();
    for p in 0..SIMPSON_PANELS {
        let lo = a + width * S::lit(p as f64);
        let hi = if p + 1 == SIMPSON_PANELS {
            b
        } else {
            a + width * S::lit((p + 1) as f64)
        };
        let mid = (lo + hi) * S::lit(0.5);
        let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
        let whole = (hi - lo) / six * (flo + S::lit(4.0) * fmid + fhi);
        total = total + simpson_step(&f, lo, hi, flo, fmid, fhi, whole, panel_tol, SIMPSON_MAX_DEPTH);
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<S: Scalar>(
    f: &impl Fn(S) -> S,
    a: S,
    b: S,
    fa: S,
    fm: S,
    fb: S,
    whole: S,
    tol: S,
    depth: u32,
) -> S {
    let half = S::lit(0.5);
    let six = S::lit(6.0);
    let four = S::lit(4.0);
    let m = (a + b) * half;
    let lm = (a + m) * half;
    let rm = (m + b) * half;
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / six * (fa + four * flm + fm);
    let right = (b - m) / six * (fm + four * frm + fb);
    let delta = left + right - whole;
    // below this the difference is rounding noise, not truncation error
    let noise = S::lit(64.0) * S::epsilon() * (b - a) * (fa.abs() + fm.abs() + fb.abs());
    if depth == 0 || delta.abs() <= S::lit(15.0) * tol || delta.abs() <= noise {
        return left + right + delta / S::lit(15.0);
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol * half, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol * half, depth - 1)
}

/// Detected events of a single round, sorted by location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct EventBatch<S> {
    pub round: u64,
    pub locations: Vec<S>,
}

impl<S: Scalar> EventBatch<S> {
    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unimodal_antiderivative(x: f64) -> f64 {
        1000.0 / 21.0 * (x * x / 2.0 - x * x * x / 3.0)
    }

    #[test]
    fn eval_reference_points() {
        let uni = RateFunction::<f64>::unimodal();
        assert!((uni.eval(0.5).unwrap() - 1000.0 / 21.0 * 0.25).abs() < 1e-12);
        assert!((uni.eval(0.5).unwrap() - 11.9048).abs() < 1e-4);
        assert_eq!(uni.eval(0.0).unwrap(), 0.0);
        // sin(5) < 0, so the floor applies
        let bi = RateFunction::<f64>::bimodal();
        assert_eq!(bi.eval(0.5).unwrap(), 0.001);
    }

    #[test]
    fn eval_rejects_outside_unit_interval() {
        let uni = RateFunction::<f64>::unimodal();
        assert!(matches!(uni.eval(1.5), Err(Error::Domain { .. })));
        assert!(uni.eval(-1e-12).is_err());
        assert!(uni.eval(f64::NAN).is_err());
    }

    #[test]
    fn integrate_matches_antiderivative() {
        let uni = RateFunction::<f64>::unimodal();
        let got = uni.integrate(0.0, 1.0, 1e-9).unwrap();
        assert!((got - 500.0 / 63.0).abs() < 1e-9);
        let got = uni.integrate(0.3, 0.7, 1e-9).unwrap();
        let want = unimodal_antiderivative(0.7) - unimodal_antiderivative(0.3);
        assert!((got - want).abs() < 1e-9);
    }

    #[test]
    fn integrate_empty_and_constant() {
        let uni = RateFunction::<f64>::unimodal();
        assert_eq!(uni.integrate(0.4, 0.4, 1e-9).unwrap(), 0.0);
        let step = RateFunction::<f64>::new(RateShape::PiecewiseConstant {
            breaks: vec![0.0, 1.0],
            values: vec![5.0],
        })
        .unwrap();
        assert!((step.integrate(0.2, 0.6, 1e-9).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn integrate_rejects_bad_limits() {
        let uni = RateFunction::<f64>::unimodal();
        assert!(uni.integrate(0.6, 0.2, 1e-9).is_err());
        assert!(uni.integrate(0.0, 1.2, 1e-9).is_err());
        assert!(uni.integrate(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn bimodal_integral_against_fine_midpoint_rule() {
        let bi = RateFunction::<f64>::bimodal();
        let n = 2_000_000;
        let h = 1.0 / n as f64;
        let midpoint: f64 = (0..n).map(|i| bi.eval((i as f64 + 0.5) * h).unwrap()).sum::<f64>() * h;
        let got = bi.integrate(0.0, 1.0, 1e-10).unwrap();
        assert!((got - midpoint).abs() < 1e-8, "{got} vs {midpoint}");
    }

    #[test]
    fn piecewise_segments_and_last_closed() {
        let step = RateFunction::<f64>::new(RateShape::PiecewiseConstant {
            breaks: vec![0.0, 0.25, 0.5, 1.0],
            values: vec![1.0, 2.0, 4.0],
        })
        .unwrap();
        assert_eq!(step.eval(0.0).unwrap(), 1.0);
        assert_eq!(step.eval(0.25).unwrap(), 2.0);
        assert_eq!(step.eval(0.49).unwrap(), 2.0);
        assert_eq!(step.eval(1.0).unwrap(), 4.0);
        assert_eq!(step.max_rate(), 4.0);
        assert!((step.integrate(0.0, 1.0, 1e-9).unwrap() - (0.25 + 0.5 + 2.0)).abs() < 1e-15);
    }

    #[test]
    fn piecewise_validation() {
        let bad = RateFunction::<f64>::new(RateShape::PiecewiseConstant {
            breaks: vec![0.0, 0.7, 0.5, 1.0],
            values: vec![1.0, 2.0, 3.0],
        });
        assert!(bad.is_err());
        let bad = RateFunction::<f64>::new(RateShape::PiecewiseConstant {
            breaks: vec![0.0, 1.0],
            values: vec![-1.0],
        });
        assert!(bad.is_err());
    }

    #[test]
    fn sup_bound_dominates_dense_grid() {
        for rate in [RateFunction::<f64>::unimodal(), RateFunction::bimodal()] {
            for i in 0..=100_000 {
                let x = i as f64 / 100_000.0;
                let v = rate.eval(x).unwrap();
                assert!(v >= 0.0);
                assert!(v <= rate.sup_bound(), "x={x}");
            }
        }
    }

    #[test]
    fn zero_rate_gives_no_events() {
        let zero = RateFunction::<f64>::constant(0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = zero.simulate_round(1, &Action::full(), &mut rng);
        assert!(batch.is_empty());
    }

    #[test]
    fn events_are_sorted_and_inside_action() {
        let uni = RateFunction::<f64>::unimodal();
        let action = Action::new(vec![(0.1, 0.3), (0.5, 0.9)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for t in 1..200 {
            let batch = uni.simulate_round(t, &action, &mut rng);
            assert_eq!(batch.round, t);
            assert!(batch.locations.windows(2).all(|w| w[0] <= w[1]));
            assert!(batch.locations.iter().all(|&x| action.contains(x)));
        }
    }

    #[test]
    fn single_precision_rates() {
        let uni = RateFunction::<f32>::unimodal();
        let got = uni.integrate(0.0, 1.0, 1e-5).unwrap();
        assert!((got - 500.0 / 63.0).abs() < 1e-4);
    }
}
