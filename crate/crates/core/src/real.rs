//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All algebra is written against [`Real`], so the same code runs in `f32`
//! or `f64`. Random variate generation is part of the trait because
//! `rand_distr` only implements its distributions for the concrete float
//! types, and a where-clause on a foreign type would have to be repeated on
//! every generic function.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson, StandardNormal};

/// Floating-point scalar usable by the laboratory: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn sample_std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Unit-rate exponential variate.
    fn sample_exp1<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Uniform variate on `[0, 1)`.
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Gamma(shape, 1) variate; `shape` must be positive.
    fn sample_gamma<R: Rng + ?Sized>(shape: Self, rng: &mut R) -> Self;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn sample_std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            #[inline]
            fn sample_exp1<R: Rng + ?Sized>(rng: &mut R) -> Self {
                Exp1.sample(rng)
            }

            #[inline]
            fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.random::<$t>()
            }

            fn sample_gamma<R: Rng + ?Sized>(shape: Self, rng: &mut R) -> Self {
                Gamma::new(shape, 1.0)
                    .expect("positive gamma shape")
                    .sample(rng)
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Poisson count with the given mean. Counts are drawn in `f64` regardless of
/// the working precision so that `f32` runs see the same jump counts.
pub fn sample_poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let draw: f64 = Poisson::new(mean).expect("positive Poisson mean").sample(rng);
    draw as u64
}

/// `ln k!` for `k = 0..=n_max`, accumulated exactly as a running sum of logs.
pub fn ln_factorials<T: Real>(n_max: usize) -> Vec<T> {
    let mut table = Vec::with_capacity(n_max + 1);
    let mut acc = T::zero();
    table.push(acc);
    for k in 1..=n_max {
        acc = acc + T::from_count(k).ln();
        table.push(acc);
    }
    table
}

/// `ln C(n, k)` from a log-factorial table.
#[inline]
pub fn ln_binomial<T: Real>(ln_fact: &[T], n: usize, k: usize) -> T {
    debug_assert!(k <= n);
    ln_fact[n] - ln_fact[k] - ln_fact[n - k]
}
