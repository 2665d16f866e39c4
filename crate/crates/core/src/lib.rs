//! Simulation and analysis toolkit for induced coherence between two
//! photon-pair sources separated by a free-space link.
//!
//! The physics formulas are generic over [`scalar::Real`] (`f32` or `f64`);
//! the aliases at the crate root fix them to `f64`, with `F32` variants for
//! single precision.

// `!(x > 0.0)` is used on purpose throughout: unlike `x <= 0.0` it also
// rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod coherence;
pub mod coincidence;
pub mod error;
pub mod optics;
pub mod quantum;
pub mod rates;
pub mod scalar;
pub mod scenario;
pub mod tags;
pub mod tagsim;
pub mod trace;
pub mod turbulence;

pub use error::{Error, Result};
pub use scalar::Real;

pub use analysis::{Resampling, TraceAnalysis, VisibilityEstimate};
pub use coincidence::{CoincidenceResult, CoincidenceWindow, MatchMode};
pub use rates::DetectorParams;
pub use tags::{Channel, TagFormat, TimeTag, TimeTagStream};
pub use tagsim::{ScanGroundTruth, ScanPlan, SimulatedScan};
pub use trace::FringeTrace;
pub use turbulence::{GainSeries, TurbulenceModel};

pub type SpdcProcess = quantum::SpdcProcess<f64>;
pub type TwoModeState = quantum::TwoModeState<f64>;
pub type SourceSpectrum = coherence::SourceSpectrum<f64>;
pub type PathLayout = coherence::PathLayout<f64>;
pub type ConditionCheck = coherence::ConditionCheck<f64>;
pub type GaussianBeam = optics::GaussianBeam<f64>;
pub type FocusingElement = optics::FocusingElement<f64>;
pub type ApertureCheck = optics::ApertureCheck<f64>;
pub type RateParams = rates::RateParams<f64>;
pub type CosineFit = analysis::CosineFit<f64>;
pub type LinearExtrapolation = analysis::LinearExtrapolation<f64>;

pub type SpdcProcessF32 = quantum::SpdcProcess<f32>;
pub type SourceSpectrumF32 = coherence::SourceSpectrum<f32>;
pub type GaussianBeamF32 = optics::GaussianBeam<f32>;
pub type FocusingElementF32 = optics::FocusingElement<f32>;
pub type RateParamsF32 = rates::RateParams<f32>;
pub type CosineFitF32 = analysis::CosineFit<f32>;
