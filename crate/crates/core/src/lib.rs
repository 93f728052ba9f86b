//! Simulation and analysis toolkit for correlated optical self-heterodyne
//! (COSH) phase-noise measurements.
//!
//! The crate models the full measurement chain of a short-delay
//! self-heterodyne analyzer (oscillator, delay-line interferometer, balanced
//! detector pair, digitizer) and implements the post-processing that turns a
//! pair of digitized beat-note traces into a one-sided frequency-noise PSD:
//!
//! 1. [`demod::analytic_phase`] extracts the differential phase of each
//!    channel through a full-record analytic signal.
//! 2. [`spectral::cross_psd`] segments both phase series according to a
//!    [`BandPlan`] and averages the cross-spectrum of the two detectors.
//! 3. [`spectral::compensate_and_convert`] removes the delay-line transfer
//!    function and converts phase noise into frequency noise.
//!
//! [`diagnostics`] implements the noise-floor procedures (dark traces,
//! equal-delay floors, delay estimation from spurs, dual-delay spur removal,
//! RIN conversion and floor composition) and [`io`] the on-disk formats.

pub mod band;
pub mod config;
pub mod demod;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod model;
pub mod psd;
pub mod spectral;
pub mod synth;
pub mod trace;

pub use band::{Band, BandPlan};
pub use config::{DetectorConfig, DigitizerConfig, InterferometerConfig};
pub use error::{CoshError, Result};
pub use model::{Bump, OscillatorNoiseModel, ParametricPsd, PowerLaw, Spike};
pub use psd::{BinFlag, Estimator, Psd, PsdBin, PsdKind, PsdMeta, Window};
pub use trace::{Channel, TraceMeta, TraceRecord};
