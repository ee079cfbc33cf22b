//! Floating-point abstraction shared by every numerical module.
//!
//! All of the math in this crate is written against [`Scalar`] so that it can
//! run in `f32` for cheap sweeps or `f64` for the reference experiments. The
//! trait also carries the handful of random draws the simulator needs, since
//! `rand_distr` exposes them per concrete float type.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst};
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real number type used throughout the crate.
pub trait Scalar:
    Float
    + FloatConst
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Lossy for `f32`.
    fn lit(x: f64) -> Self;

    fn from_count(n: u64) -> Self {
        Self::lit(n as f64)
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Uniform draw on `[0, 1)`.
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Standard exponential draw (mean one).
    fn sample_exp1<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Gamma draw with the given shape and *rate* (inverse scale).
    /// Returns `None` when the parameters are rejected by the sampler.
    fn sample_gamma<R: Rng + ?Sized>(shape: Self, rate: Self, rng: &mut R) -> Option<Self>;

    /// Integer whose order matches the order of non-negative values.
    fn magnitude_key(self) -> u64;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.random::<$t>()
            }

            #[inline]
            fn sample_exp1<R: Rng + ?Sized>(rng: &mut R) -> Self {
                Exp1.sample(rng)
            }

            fn sample_gamma<R: Rng + ?Sized>(shape: Self, rate: Self, rng: &mut R) -> Option<Self> {
                let gamma = Gamma::<$t>::new(shape, 1.0 / rate).ok()?;
                Some(gamma.sample(rng))
            }

            #[inline]
            fn magnitude_key(self) -> u64 {
                u64::from(self.abs().to_bits())
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_draws_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let u = f32::sample_unit(&mut rng);
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn magnitude_keys_are_monotone() {
        let xs = [0.0f64, 1e-300, 0.5, 1.0, 3.0, 1e300, f64::INFINITY];
        assert!(xs.windows(2).all(|p| p[0].magnitude_key() < p[1].magnitude_key()));
        assert_eq!((-2.0f32).magnitude_key(), 2.0f32.magnitude_key());
        assert!(1.5f32.magnitude_key() < 2.0f32.magnitude_key());
    }

    #[test]
    fn gamma_rejects_bad_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(f64::sample_gamma(-1.0, 1.0, &mut rng).is_none());
        assert!(f64::sample_gamma(2.0, 1.0, &mut rng).is_some());
    }
}
