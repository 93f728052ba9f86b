//! Measurement-chain configuration: interferometer, detectors, digitizer.

use serde::{Deserialize, Serialize};

use crate::error::{CoshError, Result};
use crate::model::ParametricPsd;

/// Exponent range accepted for auxiliary phase-noise and RIN shapes.
///
/// Wider than the oscillator range so an acoustic `f^-4` phase term fits.
pub const AUX_EXPONENTS: std::ops::RangeInclusive<i32> = -4..=2;

/// Heterodyne Mach-Zehnder interferometer with a delay line in one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterferometerConfig {
    /// Delay-line delay τ in seconds.
    pub delay_s: f64,
    /// Frequency offset between the arms (AOM drive), Hz.
    pub heterodyne_hz: f64,
    /// Fringe contrast in (0, 1].
    pub contrast: f64,
    /// Optical power ratio between the two arms. Unbalanced arms reduce the
    /// fringe visibility by `2√r / (1 + r)`.
    pub arm_power_ratio: f64,
    /// Phase noise of the RF chain driving the frequency shifter (rad²/Hz).
    pub carrier_phase_noise: Option<ParametricPsd>,
    /// Additive phase noise picked up by the delay arm (rad²/Hz).
    pub path_noise: Option<ParametricPsd>,
}

impl Default for InterferometerConfig {
    /// 1 km fibre delay with an 80 MHz frequency shifter.
    fn default() -> Self {
        InterferometerConfig::new(5.435e-6, 80e6)
    }
}

impl InterferometerConfig {
    pub fn new(delay_s: f64, heterodyne_hz: f64) -> Self {
        InterferometerConfig {
            delay_s,
            heterodyne_hz,
            contrast: 1.0,
            arm_power_ratio: 1.0,
            carrier_phase_noise: None,
            path_noise: None,
        }
    }

    pub fn fsr_hz(&self) -> f64 {
        1.0 / self.delay_s
    }

    /// Amplitude factor applied to the beat: contrast times the
    /// arm-imbalance visibility.
    pub fn visibility(&self) -> f64 {
        let r = self.arm_power_ratio;
        self.contrast * 2.0 * r.sqrt() / (1.0 + r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delay_s > 0.0 && self.delay_s.is_finite()) {
            return Err(CoshError::config("interferometer delay_s must be > 0"));
        }
        if !(self.heterodyne_hz > 0.0 && self.heterodyne_hz.is_finite()) {
            return Err(CoshError::config("heterodyne_hz must be > 0"));
        }
        if !(self.contrast > 0.0 && self.contrast <= 1.0) {
            return Err(CoshError::config("contrast must lie in (0, 1]"));
        }
        if !(self.arm_power_ratio > 0.0 && self.arm_power_ratio.is_finite()) {
            return Err(CoshError::config("arm_power_ratio must be > 0"));
        }
        if let Some(p) = &self.carrier_phase_noise {
            p.validate(AUX_EXPONENTS)?;
        }
        if let Some(p) = &self.path_noise {
            p.validate(AUX_EXPONENTS)?;
        }
        Ok(())
    }
}

/// One balanced photodetector pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub responsivity_v_per_w: f64,
    /// Noise-equivalent power, W/√Hz.
    pub nep_w_per_rthz: f64,
    /// -3 dB bandwidth of the detector noise, Hz.
    pub bandwidth_hz: f64,
    /// Suppression of common-mode intensity noise, dB.
    pub rin_cmrr_db: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            responsivity_v_per_w: 300.0,
            nep_w_per_rthz: 300e-12,
            bandwidth_hz: 80e6,
            rin_cmrr_db: 20.0,
        }
    }
}

impl DetectorConfig {
    /// Dark-noise voltage spectral density, V/√Hz.
    pub fn dark_density(&self) -> f64 {
        self.responsivity_v_per_w * self.nep_w_per_rthz
    }

    /// Amplitude factor applied to common intensity noise.
    pub fn rin_attenuation(&self) -> f64 {
        10f64.powf(-self.rin_cmrr_db / 20.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.responsivity_v_per_w > 0.0 && self.responsivity_v_per_w.is_finite()) {
            return Err(CoshError::config("responsivity must be > 0"));
        }
        if !(self.nep_w_per_rthz >= 0.0 && self.nep_w_per_rthz.is_finite()) {
            return Err(CoshError::config("NEP must be >= 0"));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(CoshError::config("detector bandwidth must be > 0"));
        }
        if !(self.rin_cmrr_db >= 0.0 && self.rin_cmrr_db.is_finite()) {
            return Err(CoshError::config("rin_cmrr_db must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DigitizerConfig {
    pub sample_rate_hz: f64,
    pub bits: u8,
    /// Peak-to-peak input range; codes span ±full_scale_v/2.
    pub full_scale_v: f64,
    pub jitter_rms_s: f64,
}

impl Default for DigitizerConfig {
    fn default() -> Self {
        DigitizerConfig {
            sample_rate_hz: 312.5e6,
            bits: 10,
            full_scale_v: 2.0,
            jitter_rms_s: 0.0,
        }
    }
}

impl DigitizerConfig {
    pub const MAX_BITS: u8 = 32;

    pub fn quantization_step(&self) -> f64 {
        self.full_scale_v / 2f64.powi(self.bits as i32)
    }

    pub fn nyquist_hz(&self) -> f64 {
        0.5 * self.sample_rate_hz
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(CoshError::config("sample_rate_hz must be > 0"));
        }
        if self.bits == 0 || self.bits > Self::MAX_BITS {
            return Err(CoshError::config(format!(
                "bits must lie in 1..={}",
                Self::MAX_BITS
            )));
        }
        if !(self.full_scale_v > 0.0 && self.full_scale_v.is_finite()) {
            return Err(CoshError::config("full_scale_v must be > 0"));
        }
        if !(self.jitter_rms_s >= 0.0 && self.jitter_rms_s.is_finite()) {
            return Err(CoshError::config("jitter_rms_s must be >= 0"));
        }
        Ok(())
    }
}
