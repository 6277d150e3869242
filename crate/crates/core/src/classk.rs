//! Class-K comparison functions.
//!
//! A class-K function is continuous, strictly increasing and zero at zero;
//! class-K∞ additionally grows without bound. Two families are supported:
//! power laws `k·r^p` (closed-form inverse) and tabulated monotone samples
//! (interpolated, inverted by bisection).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};

/// Absolute time/value tolerance for bisection-based inversion of tabulated
/// functions.
const TABULATED_INVERSE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(
    bound(serialize = "S: Serialize", deserialize = "S: serde::de::DeserializeOwned"),
    rename_all = "kebab-case"
)]
pub enum ClassKFn<S: Scalar> {
    /// `k · r^p` with `k > 0`, `p > 0`.
    PowerLaw { coeff: S, exponent: S },
    /// Piecewise-linear interpolation of strictly increasing samples starting
    /// at `(0, 0)`. Beyond the last sample the final slope is extended, so the
    /// function stays strictly increasing and unbounded.
    Tabulated { radii: Vec<S>, values: Vec<S> },
}

impl<S: Scalar> ClassKFn<S> {
    pub fn power_law(coeff: S, exponent: S) -> Result<Self> {
        if !(coeff > S::zero()) || !coeff.is_finite() {
            return Err(Error::InvalidClassK(format!(
                "power-law coefficient must be positive, got {coeff}"
            )));
        }
        if !(exponent > S::zero()) || !exponent.is_finite() {
            return Err(Error::InvalidClassK(format!(
                "power-law exponent must be positive, got {exponent}"
            )));
        }
        Ok(ClassKFn::PowerLaw { coeff, exponent })
    }

    /// Builds a tabulated function from `(radius, value)` samples. The first
    /// sample must be `(0, 0)` and both coordinates must be strictly
    /// increasing.
    pub fn tabulated(samples: &[(S, S)]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidClassK(
                "tabulated form needs at least two samples".into(),
            ));
        }
        if !(samples[0].0 == S::zero() && samples[0].1 == S::zero()) {
            return Err(Error::InvalidClassK(
                "tabulated form must start at (0, 0)".into(),
            ));
        }
        for w in samples.windows(2) {
            if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) {
                return Err(Error::InvalidClassK(
                    "tabulated samples must be strictly increasing".into(),
                ));
            }
        }
        Ok(ClassKFn::Tabulated {
            radii: samples.iter().map(|s| s.0).collect(),
            values: samples.iter().map(|s| s.1).collect(),
        })
    }

    /// Evaluates the function at `r ≥ 0`.
    pub fn eval(&self, r: S) -> Result<S> {
        if r < S::zero() {
            return Err(Error::OutOfRange(format!(
                "class-K functions are defined for r >= 0, got {r}"
            )));
        }
        Ok(self.eval_unchecked(r))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, r: S) -> S {
        match self {
            ClassKFn::PowerLaw { coeff, exponent } => {
                if r == S::zero() {
                    S::zero()
                } else {
                    *coeff * r.powf(*exponent)
                }
            }
            ClassKFn::Tabulated { radii, values } => {
                let last = radii.len() - 1;
                if r >= radii[last] {
                    // Extend with the final slope.
                    let slope =
                        (values[last] - values[last - 1]) / (radii[last] - radii[last - 1]);
                    return values[last] + slope * (r - radii[last]);
                }
                let idx = match radii.iter().position(|&g| g > r) {
                    Some(i) => i,
                    None => last,
                };
                let (r0, r1) = (radii[idx - 1], radii[idx]);
                let (v0, v1) = (values[idx - 1], values[idx]);
                v0 + (v1 - v0) * (r - r0) / (r1 - r0)
            }
        }
    }

    /// Inverse map `v ↦ r` with `f(r) = v`, for `v ≥ 0`. Closed form for the
    /// power law, bisection for tabulated samples.
    pub fn inverse(&self, v: S) -> Result<S> {
        if v < S::zero() {
            return Err(Error::OutOfRange(format!(
                "class-K inverse is defined for v >= 0, got {v}"
            )));
        }
        if v == S::zero() {
            return Ok(S::zero());
        }
        match self {
            ClassKFn::PowerLaw { coeff, exponent } => {
                Ok((v / *coeff).powf(S::one() / *exponent))
            }
            ClassKFn::Tabulated { radii, values } => {
                let last = radii.len() - 1;
                if v >= values[last] {
                    let slope =
                        (values[last] - values[last - 1]) / (radii[last] - radii[last - 1]);
                    return Ok(radii[last] + (v - values[last]) / slope);
                }
                let mut lo = S::zero();
                let mut hi = radii[last];
                let tol = real::<S>(TABULATED_INVERSE_TOL);
                while hi - lo > tol {
                    let mid = (lo + hi) * real(0.5);
                    if self.eval_unchecked(mid) < v {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok((lo + hi) * real(0.5))
            }
        }
    }

    /// Whether the function is unbounded (class-K∞). True for every power law
    /// with positive exponent and for tabulated samples because of the linear
    /// extension.
    pub fn is_k_infinity(&self) -> bool {
        match self {
            ClassKFn::PowerLaw { exponent, .. } => *exponent > S::zero(),
            ClassKFn::Tabulated { .. } => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gamma() -> ClassKFn<f64> {
        // 2r²
        ClassKFn::power_law(2.0, 2.0).unwrap()
    }

    #[test]
    fn zero_at_origin() {
        assert_eq!(gamma().eval(0.0).unwrap(), 0.0);
    }

    #[test]
    fn power_law_direct_values() {
        assert_eq!(gamma().eval(2.0).unwrap(), 8.0);
        assert_eq!(gamma().eval(0.5).unwrap(), 0.5);
    }

    #[test]
    fn negative_argument_rejected() {
        assert!(gamma().eval(-1.0).is_err());
        assert!(gamma().inverse(-1.0).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(ClassKFn::<f64>::power_law(0.0, 2.0).is_err());
        assert!(ClassKFn::<f64>::power_law(1.0, 0.0).is_err());
        assert!(ClassKFn::<f64>::power_law(-1.0, 2.0).is_err());
    }

    #[test]
    fn power_law_inverse_round_trip() {
        let f = gamma();
        for r in [0.0, 0.1, 1.0, 7.5] {
            let v = f.eval(r).unwrap();
            assert!((f.inverse(v).unwrap() - r).abs() < 1e-12);
        }
    }

    #[test]
    fn tabulated_interpolates_monotonically() {
        let f = ClassKFn::tabulated(&[(0.0, 0.0), (1.0, 2.0), (2.0, 8.0)]).unwrap();
        assert_eq!(f.eval(0.5).unwrap(), 1.0);
        assert_eq!(f.eval(1.5).unwrap(), 5.0);
        // linear extension beyond the last sample
        assert_eq!(f.eval(3.0).unwrap(), 14.0);
        let v: f64 = f.eval(1.3).unwrap();
        assert!((f.inverse(v).unwrap() - 1.3).abs() < 1e-9);
    }

    #[test]
    fn tabulated_must_be_strictly_increasing() {
        assert!(ClassKFn::<f64>::tabulated(&[(0.0, 0.0), (1.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(ClassKFn::<f64>::tabulated(&[(0.0, 0.0), (1.0, 1.0), (2.0, 1.0)]).is_err());
        assert!(ClassKFn::<f64>::tabulated(&[(0.1, 0.0), (1.0, 1.0)]).is_err());
    }
}
