//! Denial-of-service schedules: half-open attack intervals, tightest-fit
//! frequency/duration characterization, constrained random generation, and
//! grid-based verification of the frequency and duration assumptions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};

/// Name of the pseudo-random generator used by [`generate_random`]; recorded
/// in run metadata for reproducibility.
pub const SCHEDULE_RNG: &str = "chacha12";
/// Proposal rejections tolerated before generation reports infeasibility.
const REJECTION_CAP: usize = 100_000;
/// Uniform grid resolution used by [`check_assumptions`].
const ASSUMPTION_GRID: usize = 10_000;

/// Ordered sequence of half-open denial intervals `[σ, σ+τ)` inside
/// `[0, horizon)`. Immutable once constructed.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "S: Serialize"))]
pub struct DosSchedule<S: Scalar> {
    intervals: Vec<(S, S)>,
    horizon: S,
}

impl<S: Scalar> DosSchedule<S> {
    /// Validates ordering, positivity and containment, then freezes the
    /// schedule.
    pub fn new(intervals: Vec<(S, S)>, horizon: S) -> Result<Self> {
        if !(horizon > S::zero()) || !horizon.is_finite() {
            return Err(Error::InvalidSchedule(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        let mut prev_end = S::zero();
        for (i, &(sigma, tau)) in intervals.iter().enumerate() {
            if !(sigma >= S::zero()) || !sigma.is_finite() {
                return Err(Error::InvalidSchedule(format!(
                    "interval {i}: start must be non-negative, got {sigma}"
                )));
            }
            if !(tau > S::zero()) || !tau.is_finite() {
                return Err(Error::InvalidSchedule(format!(
                    "interval {i}: duration must be positive, got {tau}"
                )));
            }
            if i > 0 && sigma < prev_end {
                return Err(Error::InvalidSchedule(format!(
                    "interval {i} starts at {sigma} before the previous one ends at {prev_end}"
                )));
            }
            if sigma + tau > horizon {
                return Err(Error::InvalidSchedule(format!(
                    "interval {i} ends at {} beyond the horizon {horizon}",
                    sigma + tau
                )));
            }
            prev_end = sigma + tau;
        }
        Ok(DosSchedule { intervals, horizon })
    }

    pub fn empty(horizon: S) -> Self {
        DosSchedule {
            intervals: Vec::new(),
            horizon,
        }
    }

    pub fn intervals(&self) -> &[(S, S)] {
        &self.intervals
    }

    pub fn horizon(&self) -> S {
        self.horizon
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    fn check_time(&self, t: S) -> Result<()> {
        if t < S::zero() || t > self.horizon {
            return Err(Error::OutOfRange(format!(
                "t = {t} outside [0, {}]",
                self.horizon
            )));
        }
        Ok(())
    }

    /// True iff `t` lies inside some denial interval. The right endpoint
    /// `σ + τ` is *not* denied (half-open convention).
    pub fn is_denied(&self, t: S) -> Result<bool> {
        self.check_time(t)?;
        Ok(self.is_denied_unchecked(t))
    }

    #[inline]
    pub(crate) fn is_denied_unchecked(&self, t: S) -> bool {
        // Binary search over starts, then test the candidate interval.
        let idx = self.intervals.partition_point(|&(sigma, _)| sigma <= t);
        if idx == 0 {
            return false;
        }
        let (sigma, tau) = self.intervals[idx - 1];
        t >= sigma && t < sigma + tau
    }

    /// Number of off→on denial transitions in `[0, t)`: intervals with
    /// `σ < t`.
    pub fn count_transitions(&self, t: S) -> Result<usize> {
        self.check_time(t)?;
        Ok(self.intervals.partition_point(|&(sigma, _)| sigma < t))
    }

    /// Total denied time in `[0, t)` (Lebesgue measure of the interval union
    /// clipped to `[0, t)`).
    pub fn total_denied(&self, t: S) -> Result<S> {
        self.check_time(t)?;
        Ok(self.total_denied_unchecked(t))
    }

    pub(crate) fn total_denied_unchecked(&self, t: S) -> S {
        let mut acc = S::zero();
        for &(sigma, tau) in &self.intervals {
            if sigma >= t {
                break;
            }
            acc += (sigma + tau).min(t) - sigma;
        }
        acc
    }

    /// Fraction of the horizon under denial.
    pub fn duty_cycle(&self) -> S {
        self.total_denied_unchecked(self.horizon) / self.horizon
    }

    /// Rescales every time in the schedule by `s > 0`.
    pub fn dilate(&self, s: S) -> Result<Self> {
        if !(s > S::zero()) {
            return Err(Error::OutOfRange("dilation factor must be positive".into()));
        }
        DosSchedule::new(
            self.intervals
                .iter()
                .map(|&(sigma, tau)| (sigma * s, tau * s))
                .collect(),
            self.horizon * s,
        )
    }
}

/// Frequency/duration parameters `(η, τ_D, κ, θ)` bounding a schedule:
/// `n(t) ≤ η + t/τ_D` and `|Ξ(t)| ≤ κ + t/θ`.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(bound(serialize = "S: Serialize"))]
pub struct DosCharacterization<S: Scalar> {
    pub eta: S,
    pub tau_d: S,
    pub kappa: S,
    pub theta: S,
    /// Observed denial fraction over the characterized horizon; zero when the
    /// parameters were supplied rather than fitted.
    pub duty_cycle: S,
}

impl<S: Scalar> DosCharacterization<S> {
    pub fn new(eta: S, tau_d: S, kappa: S, theta: S) -> Result<Self> {
        if eta < S::zero() || kappa < S::zero() {
            return Err(Error::OutOfRange(
                "eta and kappa must be non-negative".into(),
            ));
        }
        if !(tau_d > S::zero()) {
            return Err(Error::OutOfRange(format!(
                "tau_d must be positive, got {tau_d}"
            )));
        }
        if !(theta > S::one()) {
            return Err(Error::OutOfRange(format!(
                "theta must exceed 1, got {theta}"
            )));
        }
        Ok(DosCharacterization {
            eta,
            tau_d,
            kappa,
            theta,
            duty_cycle: S::zero(),
        })
    }
}

/// Fits the tightest `(τ_D, θ)` for caller-supplied anchors `(η, κ)`:
/// the minimal `1/τ_D` with `n(t) ≤ η + t/τ_D` at every transition instant
/// and the minimal `1/θ` with `|Ξ(t)| ≤ κ + t/θ` at every interval end.
/// An empty schedule yields `1/τ_D = 0` and `1/θ = 0` (both infinite).
///
/// The pair `(η, τ_D)` is not jointly identifiable from one trace, hence the
/// anchors; conventional defaults are `η = 1` and `κ` equal to the hybrid
/// policy's inter-attempt bound.
pub fn characterize<S: Scalar>(
    schedule: &DosSchedule<S>,
    eta: S,
    kappa: S,
) -> Result<DosCharacterization<S>> {
    if eta < S::zero() || kappa < S::zero() {
        return Err(Error::OutOfRange(
            "eta and kappa anchors must be non-negative".into(),
        ));
    }
    let mut inv_tau_d = S::zero();
    let mut inv_theta = S::zero();
    let mut denied = S::zero();
    for (i, &(sigma, tau)) in schedule.intervals().iter().enumerate() {
        let count = real::<S>((i + 1) as f64);
        if count > eta {
            if sigma <= S::zero() {
                return Err(Error::InvalidSchedule(format!(
                    "no finite tau_d fits: transition {} occurs at t = 0 with eta = {eta}",
                    i + 1
                )));
            }
            inv_tau_d = inv_tau_d.max((count - eta) / sigma);
        }
        denied += tau;
        let end = sigma + tau;
        if denied > kappa {
            inv_theta = inv_theta.max((denied - kappa) / end);
        }
    }
    let tau_d = if inv_tau_d > S::zero() {
        inv_tau_d.recip()
    } else {
        S::infinity()
    };
    let theta = if inv_theta > S::zero() {
        inv_theta.recip()
    } else {
        S::infinity()
    };
    if !(theta > S::one()) {
        return Err(Error::InvalidSchedule(format!(
            "no admissible theta > 1 fits this trace with kappa = {kappa}"
        )));
    }
    Ok(DosCharacterization {
        eta,
        tau_d,
        kappa,
        theta,
        duty_cycle: schedule.duty_cycle(),
    })
}

/// Which assumption a grid point violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssumptionKind {
    Frequency,
    Duration,
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound(serialize = "S: Serialize"))]
pub struct AssumptionViolation<S: Scalar> {
    pub kind: AssumptionKind,
    pub t: S,
    pub lhs: S,
    pub rhs: S,
    pub residual: S,
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound(serialize = "S: Serialize"))]
pub struct AssumptionReport<S: Scalar> {
    pub violations: Vec<AssumptionViolation<S>>,
    pub passed: bool,
}

/// Evaluates `n(t) ≤ η + t/τ_D` and `|Ξ(t)| ≤ κ + t/θ` on a dense grid: every
/// interval endpoint (plus a point just past each start, where the transition
/// count jumps) and [`ASSUMPTION_GRID`] uniform samples.
pub fn check_assumptions<S: Scalar>(
    schedule: &DosSchedule<S>,
    eta: S,
    tau_d: S,
    kappa: S,
    theta: S,
) -> AssumptionReport<S> {
    let horizon = schedule.horizon();
    let nudge = horizon * real::<S>(1e-12);
    let mut grid: Vec<S> = Vec::with_capacity(ASSUMPTION_GRID + 3 * schedule.intervals().len() + 2);
    for &(sigma, tau) in schedule.intervals() {
        grid.push(sigma);
        grid.push((sigma + nudge).min(horizon));
        grid.push(sigma + tau);
    }
    for i in 0..=ASSUMPTION_GRID {
        grid.push(horizon * real::<S>(i as f64 / ASSUMPTION_GRID as f64));
    }
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    grid.dedup();

    let mut violations = Vec::new();
    for &t in &grid {
        let n = schedule
            .intervals()
            .partition_point(|&(sigma, _)| sigma < t);
        let freq_lhs = real::<S>(n as f64);
        let freq_rhs = eta + t / tau_d;
        if freq_lhs > freq_rhs {
            violations.push(AssumptionViolation {
                kind: AssumptionKind::Frequency,
                t,
                lhs: freq_lhs,
                rhs: freq_rhs,
                residual: freq_lhs - freq_rhs,
            });
        }
        let dur_lhs = schedule.total_denied_unchecked(t);
        let dur_rhs = kappa + t / theta;
        if dur_lhs > dur_rhs {
            violations.push(AssumptionViolation {
                kind: AssumptionKind::Duration,
                t,
                lhs: dur_lhs,
                rhs: dur_rhs,
                residual: dur_lhs - dur_rhs,
            });
        }
    }
    let passed = violations.is_empty();
    AssumptionReport { violations, passed }
}

/// Draws a schedule satisfying the frequency and duration constraints.
///
/// Off-times and durations are drawn from uniform distributions scaled to the
/// constraint budgets; every candidate interval is accepted only if both
/// inequalities hold at its start and end (the binding points), so the result
/// always passes [`check_assumptions`] with the same parameters. Deterministic
/// for a fixed seed; the generator is [`SCHEDULE_RNG`] with one stream per
/// seed.
pub fn generate_random<S: Scalar>(
    constraints: &DosCharacterization<S>,
    horizon: S,
    seed: u64,
) -> Result<DosSchedule<S>> {
    let eta = constraints.eta.to_f64().expect("finite eta");
    let kappa = constraints.kappa.to_f64().expect("finite kappa");
    let theta = constraints.theta.to_f64().expect("theta");
    let tau_d = constraints.tau_d.to_f64().expect("tau_d");
    let horizon_f = horizon.to_f64().expect("finite horizon");
    if !(horizon_f > 0.0) {
        return Err(Error::OutOfRange("horizon must be positive".into()));
    }
    if theta.is_finite() && theta <= 1.0 {
        return Err(Error::InfeasibleConstraints(format!(
            "theta must exceed 1, got {theta}"
        )));
    }

    // Total duration and count budgets over the horizon.
    let duration_budget = kappa + if theta.is_finite() { horizon_f / theta } else { 0.0 };
    let count_budget = eta + if tau_d.is_finite() { horizon_f / tau_d } else { 0.0 };
    if duration_budget <= 0.0 || count_budget < 1.0 {
        return Ok(DosSchedule::empty(horizon));
    }

    let expected_count = count_budget.min(horizon_f * 20.0).max(1.0);
    let nominal_duration = (duration_budget / expected_count).min(horizon_f / 2.0);
    let nominal_gap = (horizon_f - duration_budget).max(horizon_f * 0.05) / (expected_count + 1.0);

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    let mut denied_so_far = 0.0;
    let mut rejections = 0usize;
    let mut cursor = rng.gen_range(0.0..nominal_gap.max(1e-9));

    while cursor < horizon_f && rejections < REJECTION_CAP {
        let sigma = cursor;
        let tau_cap = horizon_f - sigma;
        if tau_cap <= 1e-9 {
            break;
        }
        let tau_draw = rng.gen_range(0.2 * nominal_duration..=1.8 * nominal_duration);
        let tau = tau_draw.min(tau_cap);

        let count_ok = {
            let count = (intervals.len() + 1) as f64;
            count <= eta + if tau_d.is_finite() { sigma / tau_d } else { 0.0 } + 1e-12
        };
        let duration_ok = {
            let end = sigma + tau;
            denied_so_far + tau
                <= kappa + if theta.is_finite() { end / theta } else { 0.0 } + 1e-12
        };
        if count_ok && duration_ok && tau > 1e-9 {
            intervals.push((sigma, tau));
            denied_so_far += tau;
            cursor = sigma + tau + rng.gen_range(0.25 * nominal_gap..=1.75 * nominal_gap);
        } else {
            rejections += 1;
            // Move the candidate start forward; both budgets relax with time.
            cursor += rng.gen_range(0.1 * nominal_gap..=0.5 * nominal_gap).max(1e-6);
        }
    }
    if intervals.is_empty() && rejections >= REJECTION_CAP {
        return Err(Error::InfeasibleConstraints(format!(
            "no interval placeable after {REJECTION_CAP} rejections"
        )));
    }

    let schedule = DosSchedule::new(
        intervals
            .into_iter()
            .map(|(s, t)| (real::<S>(s), real::<S>(t)))
            .collect(),
        horizon,
    )?;
    debug_assert!(
        check_assumptions(
            &schedule,
            constraints.eta,
            constraints.tau_d,
            constraints.kappa,
            constraints.theta
        )
        .passed
    );
    Ok(schedule)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched(intervals: &[(f64, f64)], horizon: f64) -> DosSchedule<f64> {
        DosSchedule::new(intervals.to_vec(), horizon).unwrap()
    }

    #[test]
    fn denial_is_half_open() {
        let s = sched(&[(1.0, 1.0)], 5.0);
        assert!(s.is_denied(1.5).unwrap());
        assert!(s.is_denied(1.0).unwrap());
        assert!(!s.is_denied(2.0).unwrap());
        assert!(!s.is_denied(0.999_999).unwrap());
        assert!(s.is_denied(5.5).is_err());
    }

    #[test]
    fn empty_schedule_never_denies() {
        let s = DosSchedule::<f64>::empty(5.0);
        for t in [0.0, 2.5, 5.0] {
            assert!(!s.is_denied(t).unwrap());
        }
        assert_eq!(s.count_transitions(5.0).unwrap(), 0);
        assert_eq!(s.total_denied(5.0).unwrap(), 0.0);
    }

    #[test]
    fn counting_and_measure() {
        let s = sched(&[(0.0, 1.0), (2.0, 1.0)], 5.0);
        assert_eq!(s.count_transitions(2.5).unwrap(), 2);
        assert_eq!(s.total_denied(2.5).unwrap(), 1.5);
        assert_eq!(s.count_transitions(0.0).unwrap(), 0);
        assert_eq!(s.count_transitions(2.0).unwrap(), 1);
    }

    #[test]
    fn overlapping_intervals_rejected() {
        assert!(DosSchedule::new(vec![(0.0, 2.0), (1.0, 1.0)], 5.0).is_err());
        assert!(DosSchedule::new(vec![(4.0, 2.0)], 5.0).is_err());
        assert!(DosSchedule::new(vec![(0.0, 0.0)], 5.0).is_err());
    }

    #[test]
    fn characterize_empty_schedule() {
        let c = characterize(&DosSchedule::<f64>::empty(5.0), 1.0, 0.1).unwrap();
        assert!(c.tau_d.is_infinite());
        assert!(c.theta.is_infinite());
        assert_eq!(c.duty_cycle, 0.0);
    }

    #[test]
    fn characterize_periodic_trace() {
        // Intervals [n, n+0.5) for n = 0..9; eta = 1, kappa = 0.5.
        let intervals: Vec<(f64, f64)> = (0..10).map(|n| (n as f64, 0.5)).collect();
        let s = sched(&intervals, 10.0);
        let c = characterize(&s, 1.0, 0.5).unwrap();
        // Closed form: sup (n − 1)/σ_n = n/n = 1; sup (Ξ − 0.5)/end peaks at
        // the last interval end: 4.5/9.5.
        assert!((c.tau_d.recip() - 1.0).abs() < 1e-12);
        assert!((c.theta.recip() - 4.5 / 9.5).abs() < 1e-12);
        // Brute-force sweep oracle; accurate to its own grid resolution.
        let mut inv_tau_oracle: f64 = 0.0;
        let mut inv_theta_oracle: f64 = 0.0;
        for i in 1..=100_000 {
            let t = 10.0 * i as f64 / 100_000.0;
            let n = s.count_transitions(t).unwrap() as f64;
            if n > 1.0 {
                inv_tau_oracle = inv_tau_oracle.max((n - 1.0) / t);
            }
            let xi = s.total_denied(t).unwrap();
            if xi > 0.5 {
                inv_theta_oracle = inv_theta_oracle.max((xi - 0.5) / t);
            }
        }
        assert!((c.tau_d.recip() - inv_tau_oracle).abs() < 1e-3);
        assert!((c.theta.recip() - inv_theta_oracle).abs() < 1e-3);
        assert_eq!(c.duty_cycle, 0.5);
        // The fitted parameters must pass their own assumption check.
        assert!(check_assumptions(&s, 1.0, c.tau_d, 0.5, c.theta).passed);
    }

    #[test]
    fn assumptions_flag_full_denial() {
        let s = sched(&[(0.0, 5.0)], 5.0);
        let report = check_assumptions(&s, 1.0, f64::INFINITY, 0.0, 2.0);
        assert!(!report.passed);
        assert!(report
            .violations
            .iter()
            .any(|v| v.kind == AssumptionKind::Duration && v.t >= 4.9));
    }

    #[test]
    fn assumptions_pass_on_empty() {
        let report = check_assumptions(&DosSchedule::<f64>::empty(5.0), 0.0, 1.0, 0.0, 2.0);
        assert!(report.passed);
    }

    #[test]
    fn generation_is_deterministic_and_consistent() {
        let constraints = DosCharacterization::new(2.0, 1.25, 0.2, 3.0).unwrap();
        let a = generate_random(&constraints, 5.0, 42).unwrap();
        let b = generate_random(&constraints, 5.0, 42).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
        assert!(check_assumptions(&a, 2.0, 1.25, 0.2, 3.0).passed);
        let c = generate_random(&constraints, 5.0, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_duration_budget_gives_empty_schedule() {
        // theta = infinity and kappa = 0: no denial time allowed at all.
        let constraints = DosCharacterization {
            eta: 1.0,
            tau_d: 1.0,
            kappa: 0.0,
            theta: f64::INFINITY,
            duty_cycle: 0.0,
        };
        let s = generate_random(&constraints, 5.0, 7).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn dilation_scales_measure() {
        let s = sched(&[(1.0, 1.0), (3.0, 0.5)], 5.0);
        let d = s.dilate(2.0).unwrap();
        assert_eq!(d.horizon(), 10.0);
        assert_eq!(d.total_denied(10.0).unwrap(), 3.0);
        assert_eq!(d.duty_cycle(), s.duty_cycle());
    }
}
