//! Generic scalar support.
//!
//! All model math is written against the [`Float`] trait so the whole
//! pipeline runs in either `f32` or `f64`. The concrete aliases at the crate
//! root pick `f64`, which is what the CLI uses.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Floating-point scalar the channel model is generic over.
///
/// Besides the usual `num_traits` bundle this carries the two random draws
/// the model needs, so call sites don't have to thread `rand` bounds around.
pub trait Float:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::NumAssign
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal (table constants, config values).
    fn of(v: f64) -> Self;

    /// Standard normal draw, `N(0, 1)`.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Uniform draw on `[0, 1)`.
    fn uniform_01<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

macro_rules! impl_float {
    ($t:ty) => {
        impl Float for $t {
            #[inline]
            fn of(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                <StandardNormal as Distribution<$t>>::sample(&StandardNormal, rng)
            }

            #[inline]
            fn uniform_01<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.random::<$t>()
            }
        }
    };
}

impl_float!(f32);
impl_float!(f64);

/// Uniform draw on `(-pi, pi]`, used for the random initial phases.
pub fn uniform_phase<T: Float, R: Rng + ?Sized>(rng: &mut R) -> T {
    let u = T::uniform_01(rng);
    T::PI() - u * T::of(2.0) * T::PI()
}

/// dB -> linear power ratio.
#[inline]
pub fn db_to_lin<T: Float>(db: T) -> T {
    T::of(10.0).powf(db / T::of(10.0))
}

/// Linear power ratio -> dB.
#[inline]
pub fn lin_to_db<T: Float>(lin: T) -> T {
    T::of(10.0) * lin.log10()
}
