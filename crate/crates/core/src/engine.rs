//! Deterministic fixed-step simulation of the sampled-data loop.
//!
//! The integrator is the classical 4th-order one-step method with the input
//! held constant across each (sub-)step. Trigger crossings are detected at
//! step endpoints and localized by bisection on a cubic Hermite interpolant
//! of the step. A single run is strictly single-threaded; identical inputs
//! produce bit-identical logs.
//!
//! Event mechanics: an event is an attempt to transmit the current state.
//! If the attempt instant is not denied, the feedback updates and the
//! sampling error resets; if it is denied, the input follows the configured
//! hold strategy. After a successful attempt the next event comes from the
//! error-threshold trigger; after a denied attempt the next one is scheduled
//! a fixed interval `Δ̄` later.

use serde::{Deserialize, Serialize};

use crate::certificate::LyapunovCertificate;
use crate::dos::DosSchedule;
use crate::error::{Error, Result};
use crate::plant::{HoldStrategy, PlantModel};
use crate::scalar::{norm, real, Scalar};

/// Default integration step.
pub const DEFAULT_STEP: f64 = 1e-4;
/// State-norm threshold below which the run is considered at the equilibrium.
pub const EPSILON_SETTLE: f64 = 1e-6;
/// Sampling-error gate for opening the settle window under event triggering;
/// keeps the trigger inequality within tolerance while events are paused.
const SETTLE_ERROR_GATE: f64 = 1e-4;
/// Inter-event times below this floor halt the run as Zeno-like.
pub const ZENO_FLOOR: f64 = 1e-6;
/// State norms beyond this limit end the run as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e6;
/// Absolute time tolerance of trigger localization.
pub const TRIGGER_LOCATE_TOL: f64 = 1e-8;

/// Sampling rule deciding when transmission attempts happen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    /// Pure error-threshold trigger. Not viable under denial: a denied
    /// attempt leaves the condition armed and the run halts at the Zeno
    /// guard.
    ContinuousEtm,
    /// Error-threshold trigger outside denial, fixed retry interval `Δ̄`
    /// after a denied attempt.
    HybridEtm,
    /// Periodic sampling regardless of state.
    TimeTriggered,
    /// Continuous feedback `u = ψ(x)` with no network in the loop; reference
    /// mode for integrator verification.
    ContinuousFeedback,
}

/// Complete sampling policy: trigger kind plus its parameters and the
/// input-hold strategy while denied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound(serialize = "S: Serialize"))]
pub struct TriggerPolicy<S: Scalar> {
    pub kind: PolicyKind,
    /// Trigger aggressiveness, in (0, 1) for the event-triggered kinds.
    pub lambda: S,
    /// Retry interval after a denied attempt; also the settle-confirmation
    /// window length.
    pub delta_bar: S,
    /// Lower bound kept as a Zeno guard; the retry interval itself is `Δ̄`.
    pub delta_lower: S,
    /// Sampling period for [`PolicyKind::TimeTriggered`].
    pub period: Option<S>,
    pub strategy: HoldStrategy,
}

impl<S: Scalar> TriggerPolicy<S> {
    pub fn continuous_etm(lambda: S) -> Self {
        TriggerPolicy {
            kind: PolicyKind::ContinuousEtm,
            lambda,
            delta_bar: real(0.1),
            delta_lower: real(1e-3),
            period: None,
            strategy: HoldStrategy::HoldLast,
        }
    }

    pub fn hybrid_etm(lambda: S, delta_bar: S, delta_lower: S) -> Self {
        TriggerPolicy {
            kind: PolicyKind::HybridEtm,
            lambda,
            delta_bar,
            delta_lower,
            period: None,
            strategy: HoldStrategy::HoldLast,
        }
    }

    pub fn time_triggered(period: S) -> Self {
        TriggerPolicy {
            kind: PolicyKind::TimeTriggered,
            lambda: real(0.5),
            delta_bar: real(0.1),
            delta_lower: real(1e-3),
            period: Some(period),
            strategy: HoldStrategy::HoldLast,
        }
    }

    pub fn continuous_feedback() -> Self {
        TriggerPolicy {
            kind: PolicyKind::ContinuousFeedback,
            lambda: real(0.5),
            delta_bar: real(0.1),
            delta_lower: real(1e-3),
            period: None,
            strategy: HoldStrategy::HoldLast,
        }
    }

    pub fn with_strategy(mut self, strategy: HoldStrategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn is_event_triggered(&self) -> bool {
        matches!(self.kind, PolicyKind::ContinuousEtm | PolicyKind::HybridEtm)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_lower > S::zero()) {
            return Err(Error::InvalidPolicy(format!(
                "delta_lower must be positive, got {}",
                self.delta_lower
            )));
        }
        if !(self.delta_bar >= self.delta_lower) {
            return Err(Error::InvalidPolicy(format!(
                "delta_bar = {} must be at least delta_lower = {}",
                self.delta_bar, self.delta_lower
            )));
        }
        if self.is_event_triggered() && !(self.lambda > S::zero() && self.lambda < S::one()) {
            return Err(Error::InvalidPolicy(format!(
                "lambda must lie in (0, 1), got {}",
                self.lambda
            )));
        }
        if self.kind == PolicyKind::TimeTriggered {
            match self.period {
                Some(p) if p > S::zero() => {}
                _ => {
                    return Err(Error::InvalidPolicy(
                        "time-triggered policy needs a positive period".into(),
                    ))
                }
            }
        }
        Ok(())
    }
}

/// One transmission attempt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "S: Serialize",
    deserialize = "S: serde::de::DeserializeOwned"
))]
pub struct Event<S: Scalar> {
    pub time: S,
    pub transmitted: bool,
    pub during_dos: bool,
    /// Lyapunov value at the attempt instant.
    pub lyapunov: S,
}

/// Terminal condition of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    bound(serialize = "S: Serialize", deserialize = "S: serde::de::DeserializeOwned"),
    rename_all = "kebab-case",
    tag = "kind"
)]
pub enum RunStatus<S: Scalar> {
    Completed,
    Diverged { at: S },
    ZenoHalted { at: S },
}

/// Dense record of a run: uniform grid samples plus the exact event instants.
#[derive(Debug, Clone, PartialEq)]
pub struct SimLog<S: Scalar> {
    pub state_dim: usize,
    pub input_dim: usize,
    pub step: S,
    pub horizon: S,
    pub kind: PolicyKind,
    pub strategy: HoldStrategy,
    pub times: Vec<S>,
    /// Row-major states, `state_dim` entries per grid row.
    pub states: Vec<S>,
    /// Row-major inputs, `input_dim` entries per grid row.
    pub inputs: Vec<S>,
    pub lyapunov: Vec<S>,
    /// Sampling-error norm `‖x(t_k(t)) − x(t)‖` per grid row; zero before the
    /// first successful transmission and in continuous-feedback mode.
    pub errors: Vec<S>,
    pub denied: Vec<bool>,
    /// Grid rows containing at least one event in `(t_{i−1}, t_i]`.
    pub event_rows: Vec<bool>,
    /// Grid rows containing at least one successful transmission.
    pub transmit_rows: Vec<bool>,
    pub events: Vec<Event<S>>,
    /// Start of the confirmed quiescent tail, if the run settled.
    pub settled_at: Option<S>,
    /// Smallest observed inter-event time; infinite with fewer than two
    /// events.
    pub min_inter_event: S,
    /// Periods during which event generation was paused while the state sat
    /// inside the settle threshold; `None` end means "until the horizon".
    pub freeze_windows: Vec<(S, Option<S>)>,
    pub status: RunStatus<S>,
}

impl<S: Scalar> SimLog<S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state_row(&self, i: usize) -> &[S] {
        &self.states[i * self.state_dim..(i + 1) * self.state_dim]
    }

    pub fn input_row(&self, i: usize) -> &[S] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn state_norm(&self, i: usize) -> S {
        norm(self.state_row(i))
    }

    pub fn transmitted_count(&self) -> usize {
        self.events.iter().filter(|e| e.transmitted).count()
    }

    pub fn diverged(&self) -> bool {
        matches!(self.status, RunStatus::Diverged { .. })
    }
}

struct Workspace<S> {
    k1: Vec<S>,
    k2: Vec<S>,
    k3: Vec<S>,
    k4: Vec<S>,
    stage: Vec<S>,
    ubuf: Vec<S>,
}

impl<S: Scalar> Workspace<S> {
    fn new(n: usize, m: usize) -> Self {
        Workspace {
            k1: vec![S::zero(); n],
            k2: vec![S::zero(); n],
            k3: vec![S::zero(); n],
            k4: vec![S::zero(); n],
            stage: vec![S::zero(); n],
            ubuf: vec![S::zero(); m],
        }
    }
}

fn rk4_into<S: Scalar>(
    model: &PlantModel<S>,
    x: &[S],
    u: &[S],
    t: S,
    h: S,
    out: &mut [S],
    ws: &mut Workspace<S>,
) {
    let half = h * real::<S>(0.5);
    model.dynamics_into(x, u, t, &mut ws.k1);
    for j in 0..x.len() {
        ws.stage[j] = x[j] + half * ws.k1[j];
    }
    model.dynamics_into(&ws.stage, u, t + half, &mut ws.k2);
    for j in 0..x.len() {
        ws.stage[j] = x[j] + half * ws.k2[j];
    }
    model.dynamics_into(&ws.stage, u, t + half, &mut ws.k3);
    for j in 0..x.len() {
        ws.stage[j] = x[j] + h * ws.k3[j];
    }
    model.dynamics_into(&ws.stage, u, t + h, &mut ws.k4);
    let sixth = h / real::<S>(6.0);
    let two = real::<S>(2.0);
    for j in 0..x.len() {
        out[j] = x[j] + sixth * (ws.k1[j] + two * ws.k2[j] + two * ws.k3[j] + ws.k4[j]);
    }
}

/// Same step with the feedback closed continuously: each stage re-evaluates
/// `u = ψ(x_stage)`.
fn rk4_closed_loop_into<S: Scalar>(
    model: &PlantModel<S>,
    x: &[S],
    t: S,
    h: S,
    out: &mut [S],
    ws: &mut Workspace<S>,
) {
    let half = h * real::<S>(0.5);
    model.feedback_into(x, &mut ws.ubuf);
    model.dynamics_into(x, &ws.ubuf, t, &mut ws.k1);
    for j in 0..x.len() {
        ws.stage[j] = x[j] + half * ws.k1[j];
    }
    model.feedback_into(&ws.stage, &mut ws.ubuf);
    model.dynamics_into(&ws.stage, &ws.ubuf, t + half, &mut ws.k2);
    for j in 0..x.len() {
        ws.stage[j] = x[j] + half * ws.k2[j];
    }
    model.feedback_into(&ws.stage, &mut ws.ubuf);
    model.dynamics_into(&ws.stage, &ws.ubuf, t + half, &mut ws.k3);
    for j in 0..x.len() {
        ws.stage[j] = x[j] + h * ws.k3[j];
    }
    model.feedback_into(&ws.stage, &mut ws.ubuf);
    model.dynamics_into(&ws.stage, &ws.ubuf, t + h, &mut ws.k4);
    let sixth = h / real::<S>(6.0);
    let two = real::<S>(2.0);
    for j in 0..x.len() {
        out[j] = x[j] + sixth * (ws.k1[j] + two * ws.k2[j] + two * ws.k3[j] + ws.k4[j]);
    }
}

/// One classical 4th-order step with the input held constant.
pub fn integrate_step<S: Scalar>(
    model: &PlantModel<S>,
    x: &[S],
    u: &[S],
    t: S,
    h: S,
) -> Result<Vec<S>> {
    if !(h > S::zero()) || !h.is_finite() {
        return Err(Error::InvalidRun(format!(
            "step size must be positive and finite, got {h}"
        )));
    }
    if x.len() != model.state_dim || u.len() != model.input_dim {
        return Err(Error::InvalidRun("state/input dimension mismatch".into()));
    }
    if x.iter().chain(u.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidRun("non-finite state or input".into()));
    }
    let mut ws = Workspace::new(model.state_dim, model.input_dim);
    let mut out = vec![S::zero(); model.state_dim];
    rk4_into(model, x, u, t, h, &mut out, &mut ws);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState(t.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(out)
}

/// Bisection for the earliest sign change of `condition` inside `bracket`,
/// to absolute time tolerance `tol`. Requires `condition(lo) ≤ 0 <
/// condition(hi)`; a condition already positive at the left end returns the
/// left end (immediate fire).
pub fn locate_trigger<S: Scalar>(
    condition: impl Fn(S) -> S,
    bracket: (S, S),
    tol: S,
) -> Result<S> {
    let (mut lo, mut hi) = bracket;
    if !(hi > lo) {
        return Err(Error::OutOfRange("empty bracket".into()));
    }
    if condition(lo) > S::zero() {
        return Ok(lo);
    }
    if !(condition(hi) > S::zero()) {
        return Err(Error::NoSignChange);
    }
    while hi - lo > tol {
        let mid = (lo + hi) * real::<S>(0.5);
        if condition(mid) > S::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Cubic Hermite value of one state component at fraction `s` of a step.
#[inline]
fn hermite<S: Scalar>(s: S, dt: S, xa: S, fa: S, xb: S, fb: S) -> S {
    let one = S::one();
    let two = real::<S>(2.0);
    let three = real::<S>(3.0);
    let s2 = s * s;
    let s3 = s2 * s;
    (two * s3 - three * s2 + one) * xa
        + (s3 - two * s2 + s) * dt * fa
        + (-two * s3 + three * s2) * xb
        + (s3 - s2) * dt * fb
}

enum Control {
    Continue,
    Halt,
}

struct Runner<'a, S: Scalar> {
    model: &'a PlantModel<S>,
    cert: &'a LyapunovCertificate<S>,
    policy: &'a TriggerPolicy<S>,
    schedule: &'a DosSchedule<S>,
    x: Vec<S>,
    u: Vec<S>,
    last_sample: Option<Vec<S>>,
    trigger_armed: bool,
    pending_attempt: Option<S>,
    tt_index: u64,
    prev_event: Option<S>,
    min_gap: S,
    candidate_since: Option<S>,
    clamped: bool,
    row_event: bool,
    row_transmit: bool,
    ws: Workspace<S>,
    log: SimLog<S>,
}

impl<'a, S: Scalar> Runner<'a, S> {
    fn frozen(&self) -> bool {
        self.policy.is_event_triggered() && (self.candidate_since.is_some() || self.clamped)
    }

    fn trigger_value(&self, x: &[S]) -> S {
        let anchor = self
            .last_sample
            .as_ref()
            .expect("trigger armed implies a successful sample");
        let err: S = anchor
            .iter()
            .zip(x)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<S>()
            .sqrt();
        let v = self.cert.eval_v(x);
        self.cert.trigger_gain(err)
            - self.cert.c * (S::one() - self.policy.lambda) * v.powf(self.cert.a)
    }

    fn error_norm(&self) -> S {
        if self.policy.kind == PolicyKind::ContinuousFeedback {
            return S::zero();
        }
        match &self.last_sample {
            Some(anchor) => anchor
                .iter()
                .zip(&self.x)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<S>()
                .sqrt(),
            None => S::zero(),
        }
    }

    fn fire_event(&mut self, t: S) -> Control {
        if let Some(prev) = self.prev_event {
            let gap = t - prev;
            if gap < self.min_gap {
                self.min_gap = gap;
            }
            if gap < real::<S>(ZENO_FLOOR) {
                self.log.status = RunStatus::ZenoHalted { at: t };
                return Control::Halt;
            }
        }
        self.prev_event = Some(t);

        let denied = if self.policy.kind == PolicyKind::ContinuousFeedback {
            false
        } else {
            self.schedule.is_denied_unchecked(t)
        };
        if !denied {
            self.last_sample = Some(self.x.clone());
            self.model.feedback_into(&self.x, &mut self.u);
            if self.policy.is_event_triggered() {
                self.trigger_armed = true;
                self.pending_attempt = None;
            }
        } else {
            match self.policy.strategy {
                HoldStrategy::ZeroInput => self.u.iter_mut().for_each(|v| *v = S::zero()),
                HoldStrategy::HoldLast => {
                    if self.last_sample.is_none() {
                        self.u.iter_mut().for_each(|v| *v = S::zero());
                    }
                }
            }
            match self.policy.kind {
                PolicyKind::HybridEtm => {
                    self.trigger_armed = false;
                    self.pending_attempt = Some(t + self.policy.delta_bar);
                }
                // The pure trigger stays armed; the Zeno guard will halt the
                // run if the condition refires immediately.
                PolicyKind::ContinuousEtm => {}
                _ => {}
            }
        }
        self.log.events.push(Event {
            time: t,
            transmitted: !denied,
            during_dos: denied,
            lyapunov: self.cert.eval_v(&self.x),
        });
        self.row_event = true;
        self.row_transmit |= !denied;
        Control::Continue
    }

    fn diverged(&mut self, t: S) -> bool {
        if self.x.iter().any(|v| !v.is_finite())
            || norm(&self.x) > real::<S>(DIVERGENCE_LIMIT)
        {
            self.log.status = RunStatus::Diverged { at: t };
            return true;
        }
        false
    }

    /// Advances from `t_cur` to `t_target`, firing every event in between.
    fn advance(&mut self, mut t_cur: S, t_target: S) -> Control {
        let tt_period = self.policy.period.unwrap_or(S::zero());
        loop {
            if t_cur >= t_target {
                return Control::Continue;
            }
            // Immediate fire: an armed trigger already past its threshold
            // (possible right after a settle-window abort).
            if self.trigger_armed && !self.frozen() && self.trigger_value(&self.x) > S::zero() {
                if let Control::Halt = self.fire_event(t_cur) {
                    return Control::Halt;
                }
                continue;
            }
            // Next boundary: retry deadline, periodic sample or the row end.
            let mut seg_end = t_target;
            if !self.frozen() {
                if let Some(ta) = self.pending_attempt {
                    if ta <= t_cur {
                        if let Control::Halt = self.fire_event(t_cur) {
                            return Control::Halt;
                        }
                        continue;
                    }
                    seg_end = seg_end.min(ta);
                }
            }
            let mut tt_time = None;
            if self.policy.kind == PolicyKind::TimeTriggered {
                let tn = tt_period * real::<S>(self.tt_index as f64);
                if tn < self.log.horizon {
                    if tn <= t_cur {
                        self.tt_index += 1;
                        if let Control::Halt = self.fire_event(t_cur) {
                            return Control::Halt;
                        }
                        continue;
                    }
                    if tn <= seg_end {
                        seg_end = tn;
                        tt_time = Some(tn);
                    }
                }
            }

            if !self.clamped {
                let dt = seg_end - t_cur;
                if self.policy.kind == PolicyKind::ContinuousFeedback {
                    let mut next = vec![S::zero(); self.model.state_dim];
                    rk4_closed_loop_into(self.model, &self.x, t_cur, dt, &mut next, &mut self.ws);
                    self.x = next;
                } else if self.trigger_armed && !self.frozen() {
                    let xa = self.x.clone();
                    let mut fa = vec![S::zero(); xa.len()];
                    self.model.dynamics_into(&xa, &self.u, t_cur, &mut fa);
                    let mut xb = vec![S::zero(); xa.len()];
                    rk4_into(self.model, &xa, &self.u, t_cur, dt, &mut xb, &mut self.ws);
                    if self.trigger_value(&xb) > S::zero() {
                        // Localize the crossing on the interpolated step.
                        let mut fb = vec![S::zero(); xa.len()];
                        self.model.dynamics_into(&xb, &self.u, seg_end, &mut fb);
                        let cert = self.cert;
                        let policy_lambda = self.policy.lambda;
                        let anchor = self.last_sample.as_ref().expect("armed").clone();
                        let cond = |t: S| {
                            let s = (t - t_cur) / dt;
                            let mut err_sq = S::zero();
                            let mut state = vec![S::zero(); xa.len()];
                            for j in 0..xa.len() {
                                state[j] = hermite(s, dt, xa[j], fa[j], xb[j], fb[j]);
                                let d = anchor[j] - state[j];
                                err_sq += d * d;
                            }
                            let v = cert.eval_v(&state);
                            cert.trigger_gain(err_sq.sqrt())
                                - cert.c * (S::one() - policy_lambda) * v.powf(cert.a)
                        };
                        let t_e =
                            locate_trigger(cond, (t_cur, seg_end), real(TRIGGER_LOCATE_TOL))
                                .unwrap_or(seg_end);
                        let mut xe = vec![S::zero(); xa.len()];
                        if t_e > t_cur {
                            rk4_into(
                                self.model,
                                &xa,
                                &self.u,
                                t_cur,
                                t_e - t_cur,
                                &mut xe,
                                &mut self.ws,
                            );
                        } else {
                            xe.copy_from_slice(&xa);
                        }
                        self.x = xe;
                        t_cur = t_e;
                        if self.diverged(t_cur) {
                            return Control::Halt;
                        }
                        if let Control::Halt = self.fire_event(t_e) {
                            return Control::Halt;
                        }
                        continue;
                    }
                    self.x = xb;
                } else {
                    let mut next = vec![S::zero(); self.model.state_dim];
                    rk4_into(self.model, &self.x, &self.u, t_cur, dt, &mut next, &mut self.ws);
                    self.x = next;
                }
            }
            t_cur = seg_end;
            if self.diverged(t_cur) {
                return Control::Halt;
            }
            // Events scheduled exactly at the segment end.
            if !self.frozen() {
                if let Some(ta) = self.pending_attempt {
                    if ta <= t_cur {
                        if let Control::Halt = self.fire_event(t_cur) {
                            return Control::Halt;
                        }
                    }
                }
            }
            if let Some(tn) = tt_time {
                if tn <= t_cur {
                    self.tt_index += 1;
                    if let Control::Halt = self.fire_event(t_cur) {
                        return Control::Halt;
                    }
                }
            }
        }
    }

    fn record_row(&mut self, t: S) {
        if self.policy.kind == PolicyKind::ContinuousFeedback {
            self.model.feedback_into(&self.x, &mut self.u);
        }
        self.log.times.push(t);
        self.log.states.extend_from_slice(&self.x);
        self.log.inputs.extend_from_slice(&self.u);
        self.log.lyapunov.push(self.cert.eval_v(&self.x));
        self.log.errors.push(self.error_norm());
        self.log.denied.push(
            self.policy.kind != PolicyKind::ContinuousFeedback
                && self.schedule.is_denied_unchecked(t),
        );
        self.log.event_rows.push(self.row_event);
        self.log.transmit_rows.push(self.row_transmit);
        self.row_event = false;
        self.row_transmit = false;
    }

    /// Settle detection: once the state norm stays inside [`EPSILON_SETTLE`]
    /// for one full `Δ̄` the run is declared settled at the window start and
    /// the state is clamped to the equilibrium from the confirmation point
    /// on. Event generation pauses while the window is open so the
    /// non-Lipschitz trigger cannot accumulate events at the origin.
    fn update_settle(&mut self, t: S) {
        if self.clamped {
            return;
        }
        let nrm = norm(&self.x);
        let gate_ok = if self.policy.is_event_triggered() {
            self.error_norm() < real(SETTLE_ERROR_GATE)
        } else {
            true
        };
        if nrm < real(EPSILON_SETTLE) && gate_ok {
            let since = *self.candidate_since.get_or_insert(t);
            if t - since >= self.policy.delta_bar * real(0.999_999) {
                self.log.settled_at = Some(since);
                self.clamped = true;
                self.x.iter_mut().for_each(|v| *v = S::zero());
                self.log.freeze_windows.push((since, None));
            }
        } else if let Some(since) = self.candidate_since.take() {
            self.log.freeze_windows.push((since, Some(t)));
        }
    }
}

/// Runs the closed loop under `policy` and `schedule` from `x0`.
///
/// Grid rows are recorded every `h` seconds inclusive of both endpoints.
/// Divergence (non-finite state or norm beyond [`DIVERGENCE_LIMIT`]) and
/// Zeno-like event accumulation (gap below [`ZENO_FLOOR`]) end the run early
/// with the corresponding status and a partial log.
pub fn simulate<S: Scalar>(
    model: &PlantModel<S>,
    cert: &LyapunovCertificate<S>,
    policy: &TriggerPolicy<S>,
    schedule: &DosSchedule<S>,
    x0: &[S],
    horizon: S,
    h: S,
) -> Result<SimLog<S>> {
    policy.validate()?;
    cert.validate()?;
    if x0.len() != model.state_dim {
        return Err(Error::InvalidRun(format!(
            "x0 has dimension {}, plant expects {}",
            x0.len(),
            model.state_dim
        )));
    }
    if !(horizon > S::zero()) || !horizon.is_finite() {
        return Err(Error::InvalidRun(format!(
            "horizon must be positive and finite, got {horizon}"
        )));
    }
    if !(h > S::zero()) || h > horizon {
        return Err(Error::InvalidRun(format!(
            "step must satisfy 0 < h <= horizon, got {h}"
        )));
    }
    if schedule.horizon() < horizon {
        return Err(Error::InvalidRun(format!(
            "schedule horizon {} shorter than run horizon {horizon}",
            schedule.horizon()
        )));
    }
    if policy.is_event_triggered()
        && h > policy.delta_lower / real::<S>(10.0) * real::<S>(1.0 + 1e-9)
    {
        return Err(Error::InvalidRun(format!(
            "step {h} too coarse for delta_lower {}; need h <= delta_lower/10",
            policy.delta_lower
        )));
    }
    let x0_norm = norm(x0);
    if x0_norm > cert.domain_radius * real::<S>(1.0 + 1e-9) {
        return Err(Error::InvalidRun(format!(
            "|x0| = {x0_norm} outside the certificate domain of radius {}",
            cert.domain_radius
        )));
    }
    let steps_f = (horizon / h).to_f64().expect("finite ratio");
    let n_steps = steps_f.round() as usize;
    if n_steps == 0 || (steps_f - n_steps as f64).abs() > 1e-6 {
        return Err(Error::InvalidRun(
            "horizon must be an integer multiple of the step".into(),
        ));
    }

    let mut runner = Runner {
        model,
        cert,
        policy,
        schedule,
        x: x0.to_vec(),
        u: vec![S::zero(); model.input_dim],
        last_sample: None,
        trigger_armed: false,
        pending_attempt: None,
        tt_index: 0,
        prev_event: None,
        min_gap: S::infinity(),
        candidate_since: None,
        clamped: false,
        row_event: false,
        row_transmit: false,
        ws: Workspace::new(model.state_dim, model.input_dim),
        log: SimLog {
            state_dim: model.state_dim,
            input_dim: model.input_dim,
            step: h,
            horizon,
            kind: policy.kind,
            strategy: policy.strategy,
            times: Vec::with_capacity(n_steps + 1),
            states: Vec::with_capacity((n_steps + 1) * model.state_dim),
            inputs: Vec::with_capacity((n_steps + 1) * model.input_dim),
            lyapunov: Vec::with_capacity(n_steps + 1),
            errors: Vec::with_capacity(n_steps + 1),
            denied: Vec::with_capacity(n_steps + 1),
            event_rows: Vec::with_capacity(n_steps + 1),
            transmit_rows: Vec::with_capacity(n_steps + 1),
            events: Vec::new(),
            settled_at: None,
            min_inter_event: S::infinity(),
            freeze_windows: Vec::new(),
            status: RunStatus::Completed,
        },
    };

    // The initial attempt is always scheduled at t = 0.
    match policy.kind {
        PolicyKind::ContinuousFeedback => {
            runner.log.events.push(Event {
                time: S::zero(),
                transmitted: true,
                during_dos: false,
                lyapunov: cert.eval_v(&runner.x),
            });
            runner.prev_event = Some(S::zero());
            runner.row_event = true;
            runner.row_transmit = true;
            model.feedback_into(&runner.x, &mut runner.u);
        }
        PolicyKind::TimeTriggered => {
            runner.tt_index = 1;
            let _ = runner.fire_event(S::zero());
        }
        _ => {
            let denied0 = schedule.is_denied_unchecked(S::zero());
            let _ = runner.fire_event(S::zero());
            if denied0 && policy.kind == PolicyKind::HybridEtm {
                // fire_event already scheduled the retry.
            } else if !denied0 {
                // trigger armed by fire_event
            }
        }
    }
    runner.record_row(S::zero());
    runner.update_settle(S::zero());

    let mut t_prev = S::zero();
    for i in 1..=n_steps {
        let t_target = if i == n_steps {
            horizon
        } else {
            h * real::<S>(i as f64)
        };
        if let Control::Halt = runner.advance(t_prev, t_target) {
            break;
        }
        if runner.clamped {
            runner.x.iter_mut().for_each(|v| *v = S::zero());
        }
        runner.record_row(t_target);
        runner.update_settle(t_target);
        t_prev = t_target;
    }

    runner.log.min_inter_event = runner.min_gap;
    Ok(runner.log)
}

/// Periodic baseline: samples and transmits every `period` seconds regardless
/// of the state, with a transmission at `t = 0` and none at `t = horizon`.
pub fn simulate_time_triggered<S: Scalar>(
    model: &PlantModel<S>,
    cert: &LyapunovCertificate<S>,
    x0: &[S],
    period: S,
    horizon: S,
    h: S,
) -> Result<SimLog<S>> {
    let policy = TriggerPolicy::time_triggered(period);
    let schedule = DosSchedule::empty(horizon);
    simulate(model, cert, &policy, &schedule, x0, horizon, h)
}
