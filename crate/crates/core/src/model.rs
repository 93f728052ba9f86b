//! Parametric noise spectra.
//!
//! A [`ParametricPsd`] is a sum of power laws, Lorentzian bumps and narrow
//! spikes. The same shape is used for the oscillator frequency noise
//! (Hz²/Hz), for auxiliary phase-noise sources (rad²/Hz) and for relative
//! intensity noise (1/Hz); the unit is carried by the context in which the
//! shape is used.

use std::f64::consts::PI;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::error::{CoshError, Result};

/// Half width at half maximum of the Lorentzian kernel used for spikes.
///
/// A fixed kernel keeps the integrated spike power independent of the
/// frequency grid the PSD is evaluated on.
pub const SPIKE_HWHM_HZ: f64 = 1.0;

/// `coefficient * f^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub exponent: i32,
    pub coefficient: f64,
}

/// Lorentzian feature, e.g. a servo bump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center_hz: f64,
    pub fwhm_hz: f64,
    pub peak: f64,
}

/// Narrow line carrying `power` integrated over frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    pub freq_hz: f64,
    pub power: f64,
}

impl PowerLaw {
    pub fn new(exponent: i32, coefficient: f64) -> Self {
        PowerLaw {
            exponent,
            coefficient,
        }
    }

    fn eval(&self, f: f64) -> f64 {
        self.coefficient * f.powi(self.exponent)
    }
}

impl Bump {
    pub fn new(center_hz: f64, fwhm_hz: f64, peak: f64) -> Self {
        Bump {
            center_hz,
            fwhm_hz,
            peak,
        }
    }

    fn eval(&self, f: f64) -> f64 {
        let x = (f - self.center_hz) / (0.5 * self.fwhm_hz);
        self.peak / (1.0 + x * x)
    }
}

impl Spike {
    pub fn new(freq_hz: f64, power: f64) -> Self {
        Spike { freq_hz, power }
    }

    fn eval(&self, f: f64) -> f64 {
        let x = (f - self.freq_hz) / SPIKE_HWHM_HZ;
        self.power / (PI * SPIKE_HWHM_HZ * (1.0 + x * x))
    }
}

/// Sum of power laws, Lorentzian bumps and spikes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParametricPsd {
    #[serde(default)]
    pub power_laws: Vec<PowerLaw>,
    #[serde(default)]
    pub bumps: Vec<Bump>,
    #[serde(default)]
    pub spikes: Vec<Spike>,
}

impl ParametricPsd {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_power_law(mut self, exponent: i32, coefficient: f64) -> Self {
        self.power_laws.push(PowerLaw::new(exponent, coefficient));
        self
    }

    pub fn with_bump(mut self, center_hz: f64, fwhm_hz: f64, peak: f64) -> Self {
        self.bumps.push(Bump::new(center_hz, fwhm_hz, peak));
        self
    }

    pub fn with_spike(mut self, freq_hz: f64, power: f64) -> Self {
        self.spikes.push(Spike::new(freq_hz, power));
        self
    }

    pub fn is_zero(&self) -> bool {
        self.power_laws.iter().all(|p| p.coefficient == 0.0)
            && self.bumps.iter().all(|b| b.peak == 0.0)
            && self.spikes.iter().all(|s| s.power == 0.0)
    }

    /// Checks coefficient signs, feature positions and the allowed exponent
    /// range.
    pub fn validate(&self, exponents: std::ops::RangeInclusive<i32>) -> Result<()> {
        for p in &self.power_laws {
            if !exponents.contains(&p.exponent) {
                return Err(CoshError::config(format!(
                    "power-law exponent {} outside [{}, {}]",
                    p.exponent,
                    exponents.start(),
                    exponents.end()
                )));
            }
            if !(p.coefficient >= 0.0 && p.coefficient.is_finite()) {
                return Err(CoshError::config(format!(
                    "power-law coefficient must be finite and >= 0, got {}",
                    p.coefficient
                )));
            }
        }
        for b in &self.bumps {
            if !(b.center_hz > 0.0 && b.center_hz.is_finite()) {
                return Err(CoshError::config("bump center must be > 0"));
            }
            if !(b.fwhm_hz > 0.0 && b.fwhm_hz.is_finite()) {
                return Err(CoshError::config("bump fwhm must be > 0"));
            }
            if !(b.peak >= 0.0 && b.peak.is_finite()) {
                return Err(CoshError::config("bump peak must be >= 0"));
            }
        }
        for s in &self.spikes {
            if !(s.freq_hz > 0.0 && s.freq_hz.is_finite()) {
                return Err(CoshError::config("spike frequency must be > 0"));
            }
            if !(s.power >= 0.0 && s.power.is_finite()) {
                return Err(CoshError::config("spike power must be >= 0"));
            }
        }
        Ok(())
    }

    /// Evaluates the PSD at `f > 0`.
    pub fn eval(&self, f: f64) -> Result<f64> {
        if !(f > 0.0 && f.is_finite()) {
            return Err(CoshError::domain(format!(
                "PSD evaluated at non-positive frequency {f}"
            )));
        }
        Ok(self.eval_positive(f))
    }

    /// Evaluation without the domain check; `f` must be positive.
    pub(crate) fn eval_positive(&self, f: f64) -> f64 {
        let laws: f64 = self.power_laws.iter().map(|p| p.eval(f)).sum();
        let bumps: f64 = self.bumps.iter().map(|b| b.eval(f)).sum();
        let spikes: f64 = self.spikes.iter().map(|s| s.eval(f)).sum();
        laws + bumps + spikes
    }
}

impl Add for ParametricPsd {
    type Output = ParametricPsd;

    fn add(mut self, rhs: ParametricPsd) -> ParametricPsd {
        self.power_laws.extend(rhs.power_laws);
        self.bumps.extend(rhs.bumps);
        self.spikes.extend(rhs.spikes);
        self
    }
}

/// One-sided frequency-noise PSD `S_ν(f)` (Hz²/Hz) of the oscillator under
/// test. Power-law exponents are restricted to `-2..=2`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OscillatorNoiseModel(pub ParametricPsd);

impl OscillatorNoiseModel {
    pub const EXPONENTS: std::ops::RangeInclusive<i32> = -2..=2;

    pub fn new(shape: ParametricPsd) -> Result<Self> {
        shape.validate(Self::EXPONENTS)?;
        Ok(OscillatorNoiseModel(shape))
    }

    /// White frequency noise of level `h0` Hz²/Hz.
    pub fn white(h0: f64) -> Result<Self> {
        Self::new(ParametricPsd::new().with_power_law(0, h0))
    }

    pub fn validate(&self) -> Result<()> {
        self.0.validate(Self::EXPONENTS)
    }

    pub fn shape(&self) -> &ParametricPsd {
        &self.0
    }

    /// `S_ν(f)` in Hz²/Hz.
    pub fn frequency_psd(&self, f: f64) -> Result<f64> {
        self.0.eval(f)
    }

    /// `S_φ(f) = S_ν(f) / f²` in rad²/Hz.
    pub fn phase_psd(&self, f: f64) -> Result<f64> {
        Ok(self.frequency_psd(f)? / (f * f))
    }
}

impl Add for OscillatorNoiseModel {
    type Output = OscillatorNoiseModel;

    fn add(self, rhs: OscillatorNoiseModel) -> OscillatorNoiseModel {
        OscillatorNoiseModel(self.0 + rhs.0)
    }
}
