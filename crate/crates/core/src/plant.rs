//! Plant dynamics, feedback laws and the input-hold strategies used while
//! transmissions are denied.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::certificate::LyapunovCertificate;
use crate::classk::ClassKFn;
use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};

type DynamicsFn<S> = Arc<dyn Fn(&[S], &[S], S, &mut [S]) + Send + Sync>;
type FeedbackFn<S> = Arc<dyn Fn(&[S], &mut [S]) + Send + Sync>;

/// Continuous-time plant `ẋ = f(x, u)` together with the state-feedback law
/// `u = ψ(x)` that closes the loop. Evaluators must be deterministic and
/// re-entrant; the model is immutable and safe to share across threads.
pub struct PlantModel<S: Scalar> {
    pub name: String,
    pub state_dim: usize,
    pub input_dim: usize,
    dynamics: DynamicsFn<S>,
    feedback: FeedbackFn<S>,
}

impl<S: Scalar> PlantModel<S> {
    /// Builds a plant and verifies that the origin is a closed-loop
    /// equilibrium: `f(0, ψ(0), t) = 0`.
    pub fn new(
        name: impl Into<String>,
        state_dim: usize,
        input_dim: usize,
        dynamics: impl Fn(&[S], &[S], S, &mut [S]) + Send + Sync + 'static,
        feedback: impl Fn(&[S], &mut [S]) + Send + Sync + 'static,
    ) -> Result<Self> {
        if state_dim == 0 || input_dim == 0 {
            return Err(Error::InvalidPlant(
                "state and input dimensions must be positive".into(),
            ));
        }
        let model = PlantModel {
            name: name.into(),
            state_dim,
            input_dim,
            dynamics: Arc::new(dynamics),
            feedback: Arc::new(feedback),
        };
        let origin = vec![S::zero(); state_dim];
        let u0 = model.feedback(&origin);
        let mut dx = vec![S::zero(); state_dim];
        model.dynamics_into(&origin, &u0, S::zero(), &mut dx);
        let tol = real::<S>(1e-12);
        if dx.iter().any(|d| !d.is_finite() || d.abs() > tol) {
            return Err(Error::InvalidPlant(format!(
                "origin is not a closed-loop equilibrium of '{}'",
                model.name
            )));
        }
        Ok(model)
    }

    #[inline]
    pub fn dynamics_into(&self, x: &[S], u: &[S], t: S, out: &mut [S]) {
        (self.dynamics)(x, u, t, out);
    }

    #[inline]
    pub fn feedback_into(&self, x: &[S], out: &mut [S]) {
        (self.feedback)(x, out);
    }

    pub fn feedback(&self, x: &[S]) -> Vec<S> {
        let mut u = vec![S::zero(); self.input_dim];
        self.feedback_into(x, &mut u);
        u
    }
}

/// What the actuator applies while a transmission is denied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HoldStrategy {
    /// Keep applying the feedback computed from the most recent successfully
    /// transmitted state.
    HoldLast,
    /// Apply zero input until the next successful transmission.
    ZeroInput,
}

/// Sampling error `e(t) = x(t_k) − x(t)` relative to the last successfully
/// transmitted state; zero at every transmission instant.
pub fn closed_loop_error<S: Scalar>(last_sample: &[S], x: &[S]) -> Vec<S> {
    last_sample.iter().zip(x).map(|(&s, &c)| s - c).collect()
}

/// Input applied after a denied transmission. `HoldLast` re-evaluates the
/// feedback on the last successful sample; `ZeroInput` returns zeros. When no
/// transmission has ever succeeded both strategies return the zero input.
pub fn held_input<S: Scalar>(
    plant: &PlantModel<S>,
    strategy: HoldStrategy,
    last_sample: Option<&[S]>,
) -> Vec<S> {
    match (strategy, last_sample) {
        (HoldStrategy::HoldLast, Some(sample)) => plant.feedback(sample),
        _ => vec![S::zero(); plant.input_dim],
    }
}

/// Scalar benchmark plant `ẋ = −sgn(x)·|x|^{1/2} + x + u` with `ψ(x) = −2x`,
/// paired with the certificate `V = x²`, `a = 3/4`, `c = 2`, `γ(r) = 2r²`,
/// `α₁ = r²`, `α₂ = 3r²`, `λ = 0.5`, `μ = 55.43` on the ball `|x| < 3`.
///
/// `sgn(0) = 0`, so the origin is an exact equilibrium.
pub fn builtin_example<S: Scalar>() -> (PlantModel<S>, LyapunovCertificate<S>) {
    let plant = PlantModel::new(
        "signed_sqrt",
        1,
        1,
        |x: &[S], u: &[S], _t: S, out: &mut [S]| {
            let xv = x[0];
            let sgn = if xv == S::zero() {
                S::zero()
            } else {
                xv.signum()
            };
            out[0] = -sgn * xv.abs().sqrt() + xv + u[0];
        },
        |x: &[S], out: &mut [S]| {
            out[0] = -real::<S>(2.0) * x[0];
        },
    )
    .expect("builtin plant is well-formed");

    let cert = LyapunovCertificate::new(
        |x: &[S]| x[0] * x[0],
        Some(Arc::new(|x: &[S]| vec![real::<S>(2.0) * x[0]])),
        real(0.75),
        real(2.0),
        ClassKFn::power_law(real(2.0), real(2.0)).expect("valid gamma"),
        ClassKFn::power_law(real(1.0), real(2.0)).expect("valid alpha1"),
        ClassKFn::power_law(real(3.0), real(2.0)).expect("valid alpha2"),
        real(55.43),
        real(0.5),
        real(3.0),
    )
    .expect("builtin certificate is well-formed");

    (plant, cert)
}

/// Exact closed-loop solution of the builtin plant under the continuous
/// feedback `u = −2x` from `x₀ > 0`: with `w = √x`,
/// `w(t) = (1 + √x₀)·e^{−t/2} − 1` until it reaches zero, and `x ≡ 0` after.
pub fn builtin_exact_solution(x0: f64, t: f64) -> f64 {
    assert!(x0 >= 0.0, "closed form derived for x0 >= 0");
    let w = (1.0 + x0.sqrt()) * (-t / 2.0).exp() - 1.0;
    if w <= 0.0 {
        0.0
    } else {
        w * w
    }
}

/// Settling instant of [`builtin_exact_solution`]: `2·ln(1 + √x₀)`.
pub fn builtin_exact_settling(x0: f64) -> f64 {
    2.0 * (1.0 + x0.sqrt()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_dynamics_values() {
        let (plant, _) = builtin_example::<f64>();
        let mut dx = [0.0];
        plant.dynamics_into(&[1.0], &[-2.0], 0.0, &mut dx);
        assert_eq!(dx[0], -2.0); // −1 + 1 − 2
        plant.dynamics_into(&[0.0], &[0.0], 0.0, &mut dx);
        assert_eq!(dx[0], 0.0); // sgn(0) = 0 keeps the origin fixed
        assert_eq!(plant.feedback(&[3.0]), vec![-6.0]);
    }

    #[test]
    fn held_input_variants() {
        let (plant, _) = builtin_example::<f64>();
        assert_eq!(
            held_input(&plant, HoldStrategy::HoldLast, Some(&[3.0])),
            vec![-6.0]
        );
        assert_eq!(
            held_input(&plant, HoldStrategy::ZeroInput, Some(&[3.0])),
            vec![0.0]
        );
        assert_eq!(held_input(&plant, HoldStrategy::HoldLast, None), vec![0.0]);
    }

    #[test]
    fn closed_loop_error_zero_at_transmission() {
        let e = closed_loop_error(&[1.5, -2.0], &[1.5, -2.0]);
        assert!(e.iter().all(|&c| c == 0.0));
        assert_eq!(closed_loop_error(&[2.0], &[0.5]), vec![1.5]);
    }

    #[test]
    fn non_equilibrium_plant_rejected() {
        let bad = PlantModel::<f64>::new(
            "drifting",
            1,
            1,
            |_x, _u, _t, out| out[0] = 1.0,
            |_x, out| out[0] = 0.0,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn exact_solution_settles_at_closed_form_instant() {
        let t_star = builtin_exact_settling(3.0);
        assert!((t_star - 2.0101).abs() < 1e-3);
        assert!(builtin_exact_solution(3.0, t_star - 0.01) > 0.0);
        assert_eq!(builtin_exact_solution(3.0, t_star + 1e-9), 0.0);
        assert!((builtin_exact_solution(3.0, 0.0) - 3.0).abs() < 1e-12);
    }
}
