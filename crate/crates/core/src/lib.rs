//! Simulation and verification toolkit for finite-time stable sampled-data
//! control loops whose plant–controller channel suffers denial-of-service.
//!
//! The crate provides:
//!
//! - [`certificate`]: Lyapunov certificates, class-K machinery and the
//!   closed-form stability margins (decay rates, settling bounds, state
//!   envelopes);
//! - [`plant`]: plant models, feedback laws and the input-hold strategies
//!   applied while transmissions are denied, plus a built-in scalar
//!   benchmark plant;
//! - [`dos`]: half-open denial schedules with frequency/duration
//!   characterization, constrained random generation and assumption checks;
//! - [`engine`]: a deterministic fixed-step simulator with bisection-based
//!   event localization for the event-triggered, hybrid, time-triggered and
//!   continuous-feedback sampling policies;
//! - [`analysis`]: grid checks of every closed-form bound against a recorded
//!   run, growth-region measurement and settling-time extraction.
//!
//! All numerics are generic over the scalar type via [`Scalar`]; the aliases
//! below pin the common `f64` instantiations.

pub mod analysis;
pub mod certificate;
pub mod classk;
pub mod dos;
pub mod engine;
pub mod error;
pub mod plant;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64` class-K function.
pub type ClassK = classk::ClassKFn<f64>;
/// `f64` Lyapunov certificate.
pub type Certificate = certificate::LyapunovCertificate<f64>;
/// `f64` stability margin.
pub type Margin = certificate::StabilityMargin<f64>;
/// `f64` plant model.
pub type Plant = plant::PlantModel<f64>;
/// `f64` denial schedule.
pub type Schedule = dos::DosSchedule<f64>;
/// `f64` denial characterization.
pub type Characterization = dos::DosCharacterization<f64>;
/// `f64` trigger policy.
pub type Policy = engine::TriggerPolicy<f64>;
/// `f64` simulation log.
pub type RunLog = engine::SimLog<f64>;
/// `f64` bound report.
pub type Report = analysis::BoundReport<f64>;
