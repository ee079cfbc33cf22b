//! Conjugate truncated-Gamma posteriors over per-bin average rates, plus the
//! frequentist quantities (empirical means, confidence radii, reward bounds)
//! used by the optimistic baselines and the coverage checks.
//!
//! Gamma parameters are shape/**rate**: the posterior update adds `Δ·N` to
//! the second parameter, which is only conjugate for a Poisson likelihood
//! under the rate parameterization.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::binning::{action_to_bins, Action, BinStats, Mesh};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::special::{gamma_p, ln_gamma, ln_gamma_p};

/// From this truncation mass on, the sampler draws from the plain Gamma and
/// rejects draws beyond the truncation point; at most two tries on average.
pub const REJECTION_MIN_MASS: f64 = 0.5;

const MAX_REJECTIONS: usize = 10_000;
const MAX_SOLVER_STEPS: usize = 400;

/// Prior `TG(alpha, beta, 0, lambda_max)` shared by every bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct PriorParams<S> {
    pub alpha: S,
    pub beta: S,
    pub lambda_max: S,
}

impl<S: Scalar> PriorParams<S> {
    pub fn new(alpha: S, beta: S, lambda_max: S) -> Result<Self> {
        let prior = Self {
            alpha,
            beta,
            lambda_max,
        };
        prior.validate()?;
        Ok(prior)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > S::zero()) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "prior {name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.lambda_max > S::zero()) {
            return Err(Error::InvalidParameter(format!(
                "lambda_max must be positive, got {}",
                self.lambda_max
            )));
        }
        Ok(())
    }
}

/// Gamma(shape, rate) restricted to `[0, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct TgPosterior<S> {
    shape: S,
    rate: S,
    upper: S,
}

impl<S: Scalar> TgPosterior<S> {
    /// `upper` may be `+inf`, giving an ordinary Gamma.
    pub fn new(shape: S, rate: S, upper: S) -> Result<Self> {
        if !(shape > S::zero()) || !shape.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "truncated gamma shape must be positive, got {shape}"
            )));
        }
        if !(rate > S::zero()) || !rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "truncated gamma rate must be positive, got {rate}"
            )));
        }
        if !(upper > S::zero()) {
            return Err(Error::InvalidParameter(format!(
                "truncation point must be positive, got {upper}"
            )));
        }
        Ok(Self { shape, rate, upper })
    }

    pub fn shape(&self) -> S {
        self.shape
    }

    pub fn rate(&self) -> S {
        self.rate
    }

    pub fn upper(&self) -> S {
        self.upper
    }

    /// `ln P(X <= upper)` under the untruncated Gamma.
    fn ln_mass(&self) -> Result<S> {
        ln_gamma_p(self.shape, self.rate * self.upper)
    }

    /// Density of the truncated distribution at `x`.
    pub fn pdf(&self, x: S) -> Result<S> {
        if x < S::zero() || x > self.upper {
            return Ok(S::zero());
        }
        let ln_untruncated = self.shape * self.rate.ln() + (self.shape - S::one()) * x.ln()
            - self.rate * x
            - ln_gamma(self.shape);
        Ok((ln_untruncated - self.ln_mass()?).exp())
    }

    pub fn cdf(&self, x: S) -> Result<S> {
        if x <= S::zero() {
            return Ok(S::zero());
        }
        if x >= self.upper {
            return Ok(S::one());
        }
        Ok((ln_gamma_p(self.shape, self.rate * x)? - self.ln_mass()?).exp())
    }

    /// `E[X | X <= upper] = (a/b) P(a+1, b u) / P(a, b u)`.
    pub fn mean(&self) -> Result<S> {
        let plain = self.shape / self.rate;
        if self.upper.is_infinite() {
            return Ok(plain);
        }
        let y = self.rate * self.upper;
        let ratio = (ln_gamma_p(self.shape + S::one(), y)? - ln_gamma_p(self.shape, y)?).exp();
        Ok(plain * ratio)
    }

    /// Inverse CDF of the truncated distribution.
    pub fn quantile(&self, p: S) -> Result<S> {
        if !(p >= S::zero() && p <= S::one()) {
            return Err(Error::Domain {
                what: "probability",
                value: p.as_f64(),
                domain: "[0, 1]",
            });
        }
        if p == S::zero() {
            return Ok(S::zero());
        }
        if p == S::one() && self.upper.is_finite() {
            return Ok(self.upper);
        }
        let ln_mass = self.ln_mass()?;
        self.solve_ln_cdf(p.ln() + ln_mass)
    }

    /// Exact draw. Gamma draws are rejected above `upper` when that keeps
    /// most of them; heavier truncation falls back to inverse-CDF sampling.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<S> {
        let ln_mass = self.ln_mass()?;
        if ln_mass >= S::lit(REJECTION_MIN_MASS).ln() {
            for _ in 0..MAX_REJECTIONS {
                let x = S::sample_gamma(self.shape, self.rate, rng).ok_or_else(|| {
                    Error::Numerical(format!(
                        "gamma sampler rejected shape {} rate {}",
                        self.shape, self.rate
                    ))
                })?;
                if !x.is_finite() {
                    return Err(Error::Numerical(format!("non-finite gamma draw {x}")));
                }
                if x <= self.upper {
                    return Ok(x);
                }
            }
            return Err(Error::Numerical(
                "rejection sampler exhausted its attempts".into(),
            ));
        }
        // u in (0, 1]
        let u = S::one() - S::sample_unit(rng);
        self.solve_ln_cdf(u.ln() + ln_mass)
    }

    /// Solves `ln P(shape, rate x) = target` on `(0, upper]` with Newton steps
    /// safeguarded by bisection.
    fn solve_ln_cdf(&self, target: S) -> Result<S> {
        let fail = |msg: &str| {
            Error::Numerical(format!(
                "truncated gamma quantile ({msg}) for shape {} rate {} upper {}",
                self.shape, self.rate, self.upper
            ))
        };
        if !target.is_finite() {
            return Err(fail("non-finite target"));
        }
        let mut lo = S::zero();
        let mut hi = if self.upper.is_finite() {
            self.upper
        } else {
            // bracket by doubling past the mean
            let mut h = (self.shape / self.rate).max(S::one());
            while ln_gamma_p(self.shape, self.rate * h)? < target {
                h = h * S::lit(2.0);
                if !h.is_finite() {
                    return Err(fail("no upper bracket"));
                }
            }
            h
        };
        let mut x = (self.shape / self.rate).min(hi * S::lit(0.5));
        if !(x > lo && x < hi) {
            x = hi * S::lit(0.5);
        }
        let ln_gamma_shape = ln_gamma(self.shape);
        let tol = S::lit(4.0) * S::epsilon();
        for _ in 0..MAX_SOLVER_STEPS {
            let g = ln_gamma_p(self.shape, self.rate * x)? - target;
            if g == S::zero() {
                return Ok(x);
            }
            if g > S::zero() {
                hi = x;
            } else {
                lo = x;
            }
            // d/dx ln P(a, b x) = b f(b x) / P(a, b x)
            let y = self.rate * x;
            let ln_density = (self.shape - S::one()) * y.ln() - y - ln_gamma_shape;
            let ln_p = g + target;
            let slope = self.rate * (ln_density - ln_p).exp();
            let mut next = x - g / slope;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = lo + (hi - lo) * S::lit(0.5);
            }
            if (next - x).abs() <= tol * x || hi - lo <= tol * hi {
                if !next.is_finite() {
                    return Err(fail("non-finite iterate"));
                }
                return Ok(next);
            }
            x = next;
        }
        Err(fail("no convergence"))
    }
}

/// `TG(alpha + H, beta + delta N, 0, lambda_max)`.
pub fn posterior_for_bin<S: Scalar>(
    prior: &PriorParams<S>,
    events: u64,
    sensed: u64,
    delta: S,
) -> Result<TgPosterior<S>> {
    if !(delta > S::zero() && delta <= S::one()) {
        return Err(Error::Domain {
            what: "bin width",
            value: delta.as_f64(),
            domain: "(0, 1]",
        });
    }
    TgPosterior::new(
        prior.alpha + S::from_count(events),
        prior.beta + delta * S::from_count(sensed),
        prior.lambda_max,
    )
}

/// `H / (delta N)`.
pub fn empirical_mean<S: Scalar>(events: u64, sensed: u64, delta: S) -> Result<S> {
    if sensed == 0 {
        return Err(Error::UndefinedStatistic(
            "empirical mean of a bin that was never sensed".into(),
        ));
    }
    Ok(S::from_count(events) / (delta * S::from_count(sensed)))
}

/// `2 log t / (delta N) + sqrt(6 lambda_max log t / (delta N))`.
pub fn confidence_radius<S: Scalar>(t: u64, sensed: u64, delta: S, lambda_max: S) -> Result<S> {
    if sensed == 0 {
        return Err(Error::UndefinedStatistic(
            "confidence radius of a bin that was never sensed".into(),
        ));
    }
    if t == 0 {
        return Err(Error::Domain {
            what: "round",
            value: 0.0,
            domain: "t >= 1",
        });
    }
    let log_t = S::from_count(t).ln();
    let exposure = delta * S::from_count(sensed);
    Ok(S::lit(2.0) * log_t / exposure + (S::lit(6.0) * lambda_max * log_t / exposure).sqrt())
}

/// Lower and upper confidence bounds on `r(A)` from the bins covered by `A`.
pub fn reward_bounds<S: Scalar>(
    action: &Action<S>,
    stats: &BinStats,
    mesh: &Mesh<S>,
    t: u64,
    lambda_max: S,
    cost: S,
) -> Result<(S, S)> {
    let delta = mesh.width();
    let mut lower = S::zero();
    let mut upper = S::zero();
    for k in action_to_bins(action, mesh)? {
        let (h, n) = (stats.events()[k], stats.sensed()[k]);
        let mean = empirical_mean(h, n, delta)?;
        let radius = confidence_radius(t, n, delta, lambda_max)?;
        lower = lower + (mean - radius);
        upper = upper + (mean + radius);
    }
    let charge = cost * action.measure();
    Ok((delta * lower - charge, delta * upper - charge))
}

/// Equal-tailed interval holding `mass` of the posterior.
pub fn credible_interval<S: Scalar>(post: &TgPosterior<S>, mass: S) -> Result<(S, S)> {
    let tail = (S::one() - mass) * S::lit(0.5);
    Ok((post.quantile(tail)?, post.quantile(S::one() - tail)?))
}

/// `P(X <= upper)` under the untruncated Gamma.
pub fn truncation_mass<S: Scalar>(post: &TgPosterior<S>) -> Result<S> {
    gamma_p(post.shape, post.rate * post.upper)
}
