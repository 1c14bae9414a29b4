//! Scalar abstractions shared by the weight, metric and geometry code.
//!
//! [`Scalar`] covers every ordered signed number type the geometry needs:
//! machine integers, floats and exact rationals. [`Real`] adds the
//! transcendental operations required by weight laws and shortest paths.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, Num, Signed, ToPrimitive};

/// Exact rational used wherever a geometric quantity must be compared
/// without rounding.
pub type Rational = num_rational::Ratio<i128>;

pub trait Scalar:
    Num + Signed + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    fn from_i64(v: i64) -> Self {
        <Self as FromPrimitive>::from_i64(v).expect("i64 representable in scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl<T> Scalar for T where
    T: Num + Signed + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
}

/// Floating point scalar: `f32` or `f64`.
pub trait Real: Scalar + Float + FloatConst {
    fn of(v: f64) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("f64 representable in real scalar")
    }

    /// Largest value strictly below one.
    fn one_minus_ulp() -> Self {
        Self::one() - Self::epsilon() / (Self::one() + Self::one())
    }
}

impl<T> Real for T where T: Scalar + Float + FloatConst {}

/// Rational with the given numerator and denominator.
pub fn ratio(num: i128, den: i128) -> Rational {
    Rational::new(num, den)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square<T: Scalar>(x: T) -> T {
        x * x
    }

    #[test]
    fn scalar_covers_ints_floats_and_rationals() {
        assert_eq!(square(3i64), 9);
        assert_eq!(square(1.5f32), 2.25);
        assert_eq!(square(ratio(1, 3)), ratio(1, 9));
        assert_eq!(<Rational as Scalar>::from_i64(4), ratio(4, 1));
        assert_eq!(ratio(1, 4).to_f64_lossy(), 0.25);
    }

    #[test]
    fn one_minus_ulp_is_below_one() {
        assert!(f32::one_minus_ulp() < 1.0);
        assert!(f64::one_minus_ulp() < 1.0);
    }
}
