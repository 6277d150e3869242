//! Scalar abstraction for the numerical core.
//!
//! Everything in this crate is generic over the floating-point type through
//! [`Scalar`]; `f32` and `f64` both qualify. The crate root re-exports
//! `f64`-backed aliases for the common types.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar usable throughout the crate.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Converts an `f64` constant into the working scalar type.
#[inline]
pub fn real<S: Scalar>(v: f64) -> S {
    S::from_f64(v).expect("constant representable in scalar type")
}

/// Euclidean norm of a state or input vector.
#[inline]
pub fn norm<S: Scalar>(v: &[S]) -> S {
    v.iter().map(|&c| c * c).sum::<S>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_works_for_f32_and_f64() {
        assert_eq!(norm::<f64>(&[3.0, 4.0]), 5.0);
        assert_eq!(norm::<f32>(&[3.0, 4.0]), 5.0);
    }
}
