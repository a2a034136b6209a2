//! Scalar abstractions.
//!
//! [`Scalar`] is a field: enough for every closed-form ball quantity, so the
//! same code runs over `f32`, `f64` and exact rationals. [`Real`] adds the
//! transcendental functions needed by quadrature, sources and solvers.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, Neg, SubAssign};

use num_rational::Ratio;
use num_traits::{Float, FloatConst, Num};

/// Ordered field element with lossless construction from small ratios.
pub trait Scalar:
    Num + Copy + PartialOrd + Neg<Output = Self> + Debug + Display + Send + Sync + 'static
{
    fn from_ratio(num: i64, den: i64) -> Self;

    fn from_int(v: i64) -> Self {
        Self::from_ratio(v, 1)
    }

    fn from_usize(v: usize) -> Self {
        Self::from_ratio(v as i64, 1)
    }

    /// Nearest `f64`, used for reporting and tolerance checks.
    fn to_f64(self) -> f64;

    fn abs_val(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }

    fn max_val(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    /// `self^e` by repeated multiplication.
    fn powu(self, e: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..e {
            acc = acc * self;
        }
        acc
    }

    /// `true` when the type carries no rounding error.
    fn is_exact() -> bool {
        false
    }
}

/// Floating-point scalar.
pub trait Real:
    Scalar + Float + FloatConst + AddAssign + SubAssign + MulAssign + Sum<Self>
{
    /// Rounds an `f64` literal into this type.
    fn lit(v: f64) -> Self;
}

macro_rules! impl_float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn from_ratio(num: i64, den: i64) -> Self {
                num as $t / den as $t
            }
            fn to_f64(self) -> f64 {
                self as f64
            }
        }

        impl Real for $t {
            fn lit(v: f64) -> Self {
                v as $t
            }
        }
    };
}

impl_float_scalar!(f32);
impl_float_scalar!(f64);

macro_rules! impl_ratio_scalar {
    ($i:ty) => {
        impl Scalar for Ratio<$i> {
            fn from_ratio(num: i64, den: i64) -> Self {
                Ratio::new(num as $i, den as $i)
            }
            fn to_f64(self) -> f64 {
                *self.numer() as f64 / *self.denom() as f64
            }
            fn is_exact() -> bool {
                true
            }
        }
    };
}

impl_ratio_scalar!(i64);
impl_ratio_scalar!(i128);

/// Volume of the unit ball in `n` dimensions.
pub fn unit_ball_volume<T: Real>(n: usize) -> T {
    unit_sphere_area::<T>(n) / T::from_usize(n)
}

/// Surface area of the unit sphere `S^{n-1}`.
pub fn unit_sphere_area<T: Real>(n: usize) -> T {
    // |S^{n-1}| satisfies |S^{n+1}| = 2π/n · |S^{n-1}|, seeded by |S^0| = 2, |S^1| = 2π.
    let two = T::from_int(2);
    let mut area = if n.is_multiple_of(2) { two * T::PI() } else { two };
    let mut k = if n.is_multiple_of(2) { 2 } else { 1 };
    while k < n {
        area = area * two * T::PI() / T::from_usize(k);
        k += 2;
    }
    area
}
