//! Lyapunov certificates for finite-time input-to-state stability and the
//! closed-form margins derived from them.
//!
//! A certificate bundles a Lyapunov function `V` with the constants of the
//! decay inequality `V̇ ≤ −c·V^a + γ(‖e‖)`, the sandwich bounds
//! `α₁(‖x‖) ≤ V(x) ≤ α₂(‖x‖)`, and the gain constant `μ` with
//! `γ(4‖x‖) ≤ μ·α₁(‖x‖)^a` on a ball around the origin. All checks here are
//! grid-based: the conditions are sampled, never proved.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use std::sync::Arc;

use crate::classk::ClassKFn;
use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};

/// Default radial resolution used when sampling certificate conditions.
pub const DEFAULT_GRID_DENSITY: usize = 10_000;
/// Number of random directions sampled per radius when the state dimension
/// exceeds one.
const DIRECTION_SAMPLES: usize = 1_000;
/// Seed for the direction sampler, recorded in every report.
const DIRECTION_SEED: u64 = 0x5eed_d1ce;
/// Absolute slack allowed when sampling the certificate inequalities.
const CHECK_TOL: f64 = 1e-9;
/// Relative accuracy of the golden-section refinement in [`min_mu`].
const MIN_MU_REL_TOL: f64 = 1e-6;

type ScalarField<S> = Arc<dyn Fn(&[S]) -> S + Send + Sync>;
type GradientField<S> = Arc<dyn Fn(&[S]) -> Vec<S> + Send + Sync>;

/// Certificate of finite-time input-to-state stability on a ball of radius
/// `domain_radius` around the origin.
pub struct LyapunovCertificate<S: Scalar> {
    /// Lyapunov function evaluator, non-negative on the domain.
    pub v: ScalarField<S>,
    /// Optional gradient evaluator; informational, not used by the checks.
    pub grad_v: Option<GradientField<S>>,
    /// Decay exponent, strictly inside (0, 1).
    pub a: S,
    /// Decay rate, positive.
    pub c: S,
    /// Gain function of the decay inequality.
    pub gamma: ClassKFn<S>,
    /// Lower sandwich bound.
    pub alpha1: ClassKFn<S>,
    /// Upper sandwich bound.
    pub alpha2: ClassKFn<S>,
    /// Gain constant: `γ(4‖x‖) ≤ μ·α₁(‖x‖)^a` on the domain.
    pub mu: S,
    /// Trigger aggressiveness, strictly inside (0, 1).
    pub lambda: S,
    /// Radius of the certified neighborhood of the origin.
    pub domain_radius: S,
}

impl<S: Scalar> LyapunovCertificate<S> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        v: impl Fn(&[S]) -> S + Send + Sync + 'static,
        grad_v: Option<GradientField<S>>,
        a: S,
        c: S,
        gamma: ClassKFn<S>,
        alpha1: ClassKFn<S>,
        alpha2: ClassKFn<S>,
        mu: S,
        lambda: S,
        domain_radius: S,
    ) -> Result<Self> {
        let cert = LyapunovCertificate {
            v: Arc::new(v),
            grad_v,
            a,
            c,
            gamma,
            alpha1,
            alpha2,
            mu,
            lambda,
            domain_radius,
        };
        cert.validate()?;
        Ok(cert)
    }

    /// Re-checks the scalar parameter ranges; called after field overrides.
    pub fn validate(&self) -> Result<()> {
        if !(self.a > S::zero() && self.a < S::one()) {
            return Err(Error::InvalidCertificate(format!(
                "exponent a must lie in (0, 1), got {}",
                self.a
            )));
        }
        if !(self.c > S::zero()) {
            return Err(Error::InvalidCertificate(format!(
                "decay rate c must be positive, got {}",
                self.c
            )));
        }
        if !(self.mu > S::zero()) {
            return Err(Error::InvalidCertificate(format!(
                "gain constant mu must be positive, got {}",
                self.mu
            )));
        }
        if !(self.lambda > S::zero() && self.lambda < S::one()) {
            return Err(Error::InvalidCertificate(format!(
                "lambda must lie in (0, 1), got {}",
                self.lambda
            )));
        }
        if !(self.domain_radius > S::zero()) {
            return Err(Error::InvalidCertificate(format!(
                "domain radius must be positive, got {}",
                self.domain_radius
            )));
        }
        if !self.gamma.is_k_infinity() || !self.alpha1.is_k_infinity() || !self.alpha2.is_k_infinity()
        {
            return Err(Error::InvalidCertificate(
                "gamma, alpha1, alpha2 must be class-K-infinity".into(),
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn eval_v(&self, x: &[S]) -> S {
        (self.v)(x)
    }

    /// Trigger threshold `c·(1−λ)·V^a(x)`.
    #[inline]
    pub fn trigger_threshold(&self, v: S) -> S {
        self.c * (S::one() - self.lambda) * v.powf(self.a)
    }

    /// Trigger left-hand side `γ(4‖e‖)`.
    #[inline]
    pub fn trigger_gain(&self, err_norm: S) -> S {
        self.gamma.eval_unchecked(real::<S>(4.0) * err_norm)
    }
}

/// Which sampled certificate condition a violation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateCondition {
    /// `V(x) > 0` for `x ≠ 0` and `V(0) = 0`.
    PositiveDefinite,
    /// `α₁(‖x‖) ≤ V(x)`.
    LowerSandwich,
    /// `V(x) ≤ α₂(‖x‖)`.
    UpperSandwich,
    /// `γ(4‖x‖) ≤ μ·α₁(‖x‖)^a`.
    GainMargin,
    /// `V` evaluated to a non-finite value.
    NonFinite,
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound(serialize = "S: Serialize"))]
pub struct CertificateViolation<S: Scalar> {
    pub condition: CertificateCondition,
    pub point: Vec<S>,
    pub radius: S,
    pub lhs: S,
    pub rhs: S,
    pub residual: S,
}

/// Outcome of sampling every certificate condition over the domain ball.
#[derive(Debug, Clone, Serialize)]
#[serde(bound(serialize = "S: Serialize"))]
pub struct CertificateReport<S: Scalar> {
    pub grid_density: usize,
    pub direction_samples: usize,
    pub direction_seed: u64,
    pub violations: Vec<CertificateViolation<S>>,
    pub accepted: bool,
}

/// Samples the three certificate conditions on a radial grid of the domain
/// ball. For state dimension one the directions are `±1`; otherwise
/// [`DIRECTION_SAMPLES`] random unit directions are drawn from a fixed,
/// recorded seed. Non-finite `V` values are reported as violations rather
/// than aborting the sweep.
pub fn check_certificate<S: Scalar>(
    cert: &LyapunovCertificate<S>,
    state_dim: usize,
    grid_density: usize,
) -> Result<CertificateReport<S>> {
    if grid_density < 2 {
        return Err(Error::OutOfRange(
            "grid density must be at least 2".into(),
        ));
    }
    let tol = real::<S>(CHECK_TOL);
    let mut violations = Vec::new();

    // Origin condition.
    let origin = vec![S::zero(); state_dim];
    let v0 = cert.eval_v(&origin);
    if !v0.is_finite() {
        violations.push(CertificateViolation {
            condition: CertificateCondition::NonFinite,
            point: origin.clone(),
            radius: S::zero(),
            lhs: v0,
            rhs: S::zero(),
            residual: S::infinity(),
        });
    } else if v0.abs() > tol {
        violations.push(CertificateViolation {
            condition: CertificateCondition::PositiveDefinite,
            point: origin.clone(),
            radius: S::zero(),
            lhs: v0,
            rhs: S::zero(),
            residual: v0.abs(),
        });
    }

    let directions = sample_directions::<S>(state_dim);
    let a = cert.a;
    for i in 1..=grid_density {
        let r = cert.domain_radius * real::<S>(i as f64 / grid_density as f64);
        let lo = cert.alpha1.eval_unchecked(r);
        let hi = cert.alpha2.eval_unchecked(r);
        // Radial gain condition; direction-independent.
        let gain_lhs = cert.gamma.eval_unchecked(real::<S>(4.0) * r);
        let gain_rhs = cert.mu * lo.powf(a);
        if gain_lhs > gain_rhs + tol {
            violations.push(CertificateViolation {
                condition: CertificateCondition::GainMargin,
                point: directions[0].iter().map(|&d| d * r).collect(),
                radius: r,
                lhs: gain_lhs,
                rhs: gain_rhs,
                residual: gain_lhs - gain_rhs,
            });
        }
        for dir in &directions {
            let x: Vec<S> = dir.iter().map(|&d| d * r).collect();
            let v = cert.eval_v(&x);
            if !v.is_finite() {
                violations.push(CertificateViolation {
                    condition: CertificateCondition::NonFinite,
                    point: x,
                    radius: r,
                    lhs: v,
                    rhs: S::zero(),
                    residual: S::infinity(),
                });
                continue;
            }
            if v <= S::zero() {
                violations.push(CertificateViolation {
                    condition: CertificateCondition::PositiveDefinite,
                    point: x.clone(),
                    radius: r,
                    lhs: v,
                    rhs: S::zero(),
                    residual: -v,
                });
            }
            if lo > v + tol {
                violations.push(CertificateViolation {
                    condition: CertificateCondition::LowerSandwich,
                    point: x.clone(),
                    radius: r,
                    lhs: lo,
                    rhs: v,
                    residual: lo - v,
                });
            }
            if v > hi + tol {
                violations.push(CertificateViolation {
                    condition: CertificateCondition::UpperSandwich,
                    point: x.clone(),
                    radius: r,
                    lhs: v,
                    rhs: hi,
                    residual: v - hi,
                });
            }
        }
    }

    let accepted = violations.is_empty();
    Ok(CertificateReport {
        grid_density,
        direction_samples: directions.len(),
        direction_seed: DIRECTION_SEED,
        violations,
        accepted,
    })
}

fn sample_directions<S: Scalar>(state_dim: usize) -> Vec<Vec<S>> {
    if state_dim == 1 {
        return vec![vec![S::one()], vec![-S::one()]];
    }
    let mut rng = ChaCha12Rng::seed_from_u64(DIRECTION_SEED);
    let mut dirs = Vec::with_capacity(DIRECTION_SAMPLES);
    while dirs.len() < DIRECTION_SAMPLES {
        let raw: Vec<f64> = (0..state_dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let len = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if len < 1e-3 {
            continue;
        }
        dirs.push(raw.into_iter().map(|v| real::<S>(v / len)).collect());
    }
    dirs
}

/// Smallest `μ` with `γ(4r) ≤ μ·α₁(r)^a` for all `r ∈ (0, radius]`, computed
/// as the supremum of `γ(4r)/α₁(r)^a` over a radial grid and refined by
/// golden-section search around the grid argmax.
pub fn min_mu<S: Scalar>(
    gamma: &ClassKFn<S>,
    alpha1: &ClassKFn<S>,
    a: S,
    domain_radius: S,
    grid_density: usize,
) -> Result<S> {
    if !(domain_radius > S::zero()) {
        return Err(Error::OutOfRange("domain radius must be positive".into()));
    }
    if grid_density < 2 {
        return Err(Error::OutOfRange("grid density must be at least 2".into()));
    }
    if !(a > S::zero() && a < S::one()) {
        return Err(Error::OutOfRange("exponent a must lie in (0, 1)".into()));
    }
    let ratio = |r: S| -> Result<S> {
        let denom = alpha1.eval_unchecked(r).powf(a);
        if !(denom > S::zero()) {
            return Err(Error::InvalidCertificate(format!(
                "alpha1({r}) is not positive; certificate is degenerate"
            )));
        }
        Ok(gamma.eval_unchecked(real::<S>(4.0) * r) / denom)
    };

    let mut best = S::zero();
    let mut best_idx = 1usize;
    for i in 1..=grid_density {
        let r = domain_radius * real::<S>(i as f64 / grid_density as f64);
        let q = ratio(r)?;
        if q > best {
            best = q;
            best_idx = i;
        }
    }

    // Golden-section refinement on the bracket around the grid argmax.
    let lo_idx = best_idx.saturating_sub(1).max(1);
    let hi_idx = (best_idx + 1).min(grid_density);
    let mut lo = domain_radius * real::<S>(lo_idx as f64 / grid_density as f64);
    let mut hi = domain_radius * real::<S>(hi_idx as f64 / grid_density as f64);
    if best_idx == 1 {
        lo = domain_radius * real::<S>(0.5 / grid_density as f64);
    }
    let phi = real::<S>(0.618_033_988_749_894_9);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = ratio(x1)?;
    let mut f2 = ratio(x2)?;
    let rel_tol = real::<S>(MIN_MU_REL_TOL);
    while (hi - lo) > rel_tol * domain_radius.max(S::one()) * real(1e-3)
        || (f1 - f2).abs() > rel_tol * best.max(S::one())
    {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = ratio(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = ratio(x1)?;
        }
        if (hi - lo) <= real::<S>(1e-15) * domain_radius {
            break;
        }
    }
    Ok(best.max(f1).max(f2))
}

/// Closed-form margins of the finite-time stability condition under bounded
/// denial frequency and duration.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(bound(serialize = "S: Serialize"))]
pub struct StabilityMargin<S: Scalar> {
    /// Decay rate between events outside denial: `ω₁ = c·λ`.
    pub omega1: S,
    /// Growth rate while the feedback is stale: `ω₂ = c(1−λ) + 2μ`.
    pub omega2: S,
    /// Net decay rate `ξ = cλ − (1/θ + Δ̄/τ_D)(c + 2μ)`.
    pub xi: S,
    /// Denial-induced offset `ρ = (c + 2μ)(κ + Δ̄·η)`.
    pub rho: S,
    /// Admissible denial budget `cλ/(c + 2μ)` for `1/θ + Δ̄/τ_D`.
    pub threshold: S,
    /// True iff `ξ > 0`, i.e. the duty/frequency budget is met.
    pub satisfied: bool,
}

/// Evaluates the stability margin for denial parameters `(η, τ_D, κ, θ)` and
/// the inter-attempt bound `Δ̄`. `θ` must exceed one (an infinite `θ` encodes
/// "no average-duty constraint consumed").
pub fn stability_margin<S: Scalar>(
    cert: &LyapunovCertificate<S>,
    delta_bar: S,
    theta: S,
    tau_d: S,
    kappa: S,
    eta: S,
) -> Result<StabilityMargin<S>> {
    if !(theta > S::one()) {
        return Err(Error::OutOfRange(format!(
            "theta must exceed 1, got {theta}"
        )));
    }
    if !(tau_d > S::zero()) {
        return Err(Error::OutOfRange(format!(
            "tau_d must be positive, got {tau_d}"
        )));
    }
    if !(delta_bar > S::zero()) {
        return Err(Error::OutOfRange(format!(
            "delta_bar must be positive, got {delta_bar}"
        )));
    }
    if kappa < S::zero() || eta < S::zero() {
        return Err(Error::OutOfRange(
            "kappa and eta must be non-negative".into(),
        ));
    }
    let two = real::<S>(2.0);
    let omega1 = cert.c * cert.lambda;
    let omega2 = cert.c * (S::one() - cert.lambda) + two * cert.mu;
    let denial_rate = theta.recip() + delta_bar / tau_d;
    let c2mu = cert.c + two * cert.mu;
    let xi = omega1 - denial_rate * c2mu;
    let rho = c2mu * (kappa + delta_bar * eta);
    let threshold = omega1 / c2mu;
    Ok(StabilityMargin {
        omega1,
        omega2,
        xi,
        rho,
        threshold,
        satisfied: xi > S::zero(),
    })
}

/// Upper bound on the settling time: `(V₀^{1−a} + (1−a)·ρ) / ξ`.
pub fn settling_bound<S: Scalar>(
    cert: &LyapunovCertificate<S>,
    v0: S,
    margin: &StabilityMargin<S>,
) -> Result<S> {
    if !(margin.xi > S::zero()) {
        return Err(Error::OutOfRange(
            "settling bound requires a satisfied margin (xi > 0)".into(),
        ));
    }
    if v0 < S::zero() {
        return Err(Error::OutOfRange("v0 must be non-negative".into()));
    }
    let p = S::one() - cert.a;
    Ok((v0.powf(p) + p * margin.rho) / margin.xi)
}

/// State-norm envelope at time `t`:
/// `α₁⁻¹( max(0, α₂(‖x₀‖)^{1−a} + (1−a)(ρ − ξ·t))^{1/(1−a)} )`.
///
/// The inner expression is clamped at zero once the envelope has reached the
/// equilibrium.
pub fn state_envelope<S: Scalar>(
    cert: &LyapunovCertificate<S>,
    x0_norm: S,
    margin: &StabilityMargin<S>,
    t: S,
) -> Result<S> {
    if x0_norm < S::zero() || t < S::zero() {
        return Err(Error::OutOfRange(
            "x0 norm and t must be non-negative".into(),
        ));
    }
    let p = S::one() - cert.a;
    let inner = cert.alpha2.eval_unchecked(x0_norm).powf(p) + p * (margin.rho - margin.xi * t);
    if inner <= S::zero() {
        return Ok(S::zero());
    }
    cert.alpha1.inverse(inner.powf(p.recip()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::builtin_example;

    fn demo_cert() -> LyapunovCertificate<f64> {
        builtin_example::<f64>().1
    }

    #[test]
    fn builtin_certificate_accepted() {
        let cert = demo_cert();
        let report = check_certificate(&cert, 1, 2_000).unwrap();
        assert!(report.accepted, "violations: {:?}", report.violations);
    }

    #[test]
    fn undersized_mu_rejected_near_boundary() {
        let mut cert = demo_cert();
        cert.mu = 50.0;
        // 2·(4r)² = 32r² exceeds 50·r^{1.5} near r = 3: 288 > 259.81.
        let report = check_certificate(&cert, 1, 2_000).unwrap();
        assert!(!report.accepted);
        let worst = report
            .violations
            .iter()
            .filter(|v| v.condition == CertificateCondition::GainMargin)
            .last()
            .unwrap();
        assert!(worst.radius > 2.4, "witness at radius {}", worst.radius);
        assert!((worst.lhs - 288.0).abs() < 1.0);
        assert!((worst.rhs - 259.8).abs() < 1.0);
    }

    #[test]
    fn exponent_one_rejected_at_construction() {
        let (_, cert) = builtin_example::<f64>();
        let bad = LyapunovCertificate::new(
            move |x: &[f64]| x[0] * x[0],
            None,
            1.0,
            cert.c,
            cert.gamma.clone(),
            cert.alpha1.clone(),
            cert.alpha2.clone(),
            cert.mu,
            cert.lambda,
            cert.domain_radius,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn min_mu_matches_closed_form() {
        let cert = demo_cert();
        // sup of 32r²/r^{1.5} = 32·√r over (0, R]: 32·√R.
        let mu3 = min_mu(&cert.gamma, &cert.alpha1, cert.a, 3.0, DEFAULT_GRID_DENSITY).unwrap();
        assert!((mu3 - 32.0 * 3.0_f64.sqrt()).abs() < 1e-3, "mu3 = {mu3}");
        let mu1 = min_mu(&cert.gamma, &cert.alpha1, cert.a, 1.0, DEFAULT_GRID_DENSITY).unwrap();
        assert!((mu1 - 32.0).abs() < 1e-3, "mu1 = {mu1}");
    }

    #[test]
    fn min_mu_constant_ratio_case() {
        // gamma = alpha1^a exactly: gamma(4r) / alpha1(r)^a with alpha1 = r²,
        // a = 1/2, gamma = r: ratio = 4r / r = 4.
        let gamma = ClassKFn::power_law(1.0, 1.0).unwrap();
        let alpha1 = ClassKFn::power_law(1.0, 2.0).unwrap();
        let mu: f64 = min_mu(&gamma, &alpha1, 0.5, 5.0, 1_000).unwrap();
        assert!((mu - 4.0).abs() < 1e-6);
    }

    #[test]
    fn margin_reproduces_published_threshold() {
        let cert = demo_cert();
        let margin = stability_margin(&cert, 0.1, 250.0, 25.0, 0.5, 2.0).unwrap();
        assert!(((margin.threshold - 1.0 / 112.86) / (1.0 / 112.86)).abs() < 1e-12);
        // Direct substitution: xi = 1 − (1/250 + 0.1/25)·112.86.
        assert!((margin.xi - (1.0 - 0.008 * 112.86)).abs() < 1e-12);
        assert!((margin.rho - 112.86 * 0.7).abs() < 1e-9);
        assert!(margin.satisfied);
    }

    #[test]
    fn margin_no_denial_limit() {
        let cert = demo_cert();
        let margin =
            stability_margin(&cert, 0.1, f64::INFINITY, f64::INFINITY, 0.0, 0.0).unwrap();
        assert_eq!(margin.xi, cert.c * cert.lambda);
        assert_eq!(margin.rho, 0.0);
    }

    #[test]
    fn margin_rejects_theta_at_most_one() {
        let cert = demo_cert();
        assert!(stability_margin(&cert, 0.1, 1.0, 25.0, 0.0, 0.0).is_err());
        assert!(stability_margin(&cert, 0.1, 0.5, 25.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn settling_bound_direct_values() {
        let cert = demo_cert();
        let mut margin =
            stability_margin(&cert, 0.1, f64::INFINITY, f64::INFINITY, 0.0, 0.0).unwrap();
        margin.xi = 1.0;
        margin.rho = 0.0;
        let t = settling_bound(&cert, 9.0, &margin).unwrap();
        assert!((t - 3.0_f64.sqrt()).abs() < 1e-12);
        assert_eq!(settling_bound(&cert, 0.0, &margin).unwrap(), 0.0);

        margin.xi = 0.09712;
        margin.rho = 79.002;
        let t = settling_bound(&cert, 9.0, &margin).unwrap();
        assert!((t - 221.196).abs() < 5e-3, "t = {t}");
    }

    #[test]
    fn settling_bound_requires_positive_xi() {
        let cert = demo_cert();
        let mut margin =
            stability_margin(&cert, 0.1, f64::INFINITY, f64::INFINITY, 0.0, 0.0).unwrap();
        margin.xi = -0.5;
        assert!(settling_bound(&cert, 9.0, &margin).is_err());
    }

    #[test]
    fn envelope_dominates_initial_state_and_reaches_zero() {
        let cert = demo_cert();
        let mut margin =
            stability_margin(&cert, 0.1, f64::INFINITY, f64::INFINITY, 0.0, 0.0).unwrap();
        margin.xi = 1.0;
        margin.rho = 0.0;
        let env0 = state_envelope(&cert, 3.0, &margin, 0.0).unwrap();
        assert!((env0 - 27.0_f64.sqrt()).abs() < 1e-12);
        assert!(env0 >= 3.0);
        // zero point: alpha2(3)^{1/4} / ((1−a)·xi) = 27^{0.25}/0.25 ≈ 9.118.
        let t_zero = 27.0_f64.powf(0.25) / 0.25;
        assert!(state_envelope(&cert, 3.0, &margin, t_zero - 1e-3).unwrap() > 0.0);
        assert_eq!(state_envelope(&cert, 3.0, &margin, t_zero + 1e-3).unwrap(), 0.0);
        // non-increasing in t
        let mut prev = env0;
        for i in 1..=100 {
            let e = state_envelope(&cert, 3.0, &margin, 0.1 * i as f64).unwrap();
            assert!(e <= prev + 1e-12);
            prev = e;
        }
    }
}
