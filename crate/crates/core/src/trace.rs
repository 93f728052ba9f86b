//! Two-channel digitized voltage records.

use std::fmt;

use crate::error::{CoshError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    A,
    B,
}

impl Channel {
    pub fn index(self) -> usize {
        match self {
            Channel::A => 0,
            Channel::B => 1,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::A => "A",
            Channel::B => "B",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub sample_rate_hz: f64,
    pub bits: u8,
    pub full_scale_v: f64,
    pub heterodyne_hz: f64,
    /// Effective delay realised by the simulation (or nominal delay of the
    /// recording), seconds.
    pub delay_s: f64,
    pub seed: u64,
    pub label: String,
    /// Fraction of samples clipped by the digitizer (not persisted).
    pub clip_fraction: f64,
    /// Non-fatal diagnostics (not persisted).
    pub warnings: Vec<String>,
}

impl TraceMeta {
    pub fn new(sample_rate_hz: f64, bits: u8, full_scale_v: f64, heterodyne_hz: f64, delay_s: f64) -> Self {
        TraceMeta {
            sample_rate_hz,
            bits,
            full_scale_v,
            heterodyne_hz,
            delay_s,
            seed: 0,
            label: String::new(),
            clip_fraction: 0.0,
            warnings: Vec::new(),
        }
    }
}

/// Simultaneously digitized outputs of balanced detector pairs A and B.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub meta: TraceMeta,
    pub channels: [Vec<f64>; 2],
}

impl TraceRecord {
    pub fn new(meta: TraceMeta, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let t = TraceRecord {
            meta,
            channels: [a, b],
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.meta;
        if self.channels[0].len() != self.channels[1].len() {
            return Err(CoshError::usage(format!(
                "channel lengths differ: {} vs {}",
                self.channels[0].len(),
                self.channels[1].len()
            )));
        }
        if !(m.sample_rate_hz > 0.0 && m.sample_rate_hz.is_finite()) {
            return Err(CoshError::usage("trace sample rate must be > 0"));
        }
        if !(m.delay_s > 0.0 && m.delay_s.is_finite()) {
            return Err(CoshError::usage("trace delay_s must be > 0"));
        }
        if !(m.heterodyne_hz > 0.0 && m.heterodyne_hz.is_finite()) {
            return Err(CoshError::usage("trace heterodyne_hz must be > 0"));
        }
        if !(m.full_scale_v > 0.0 && m.full_scale_v.is_finite()) {
            return Err(CoshError::usage("trace full_scale_v must be > 0"));
        }
        let half = 0.5 * m.full_scale_v;
        for (c, ch) in self.channels.iter().enumerate() {
            if let Some(i) = ch.iter().position(|v| !(v.abs() <= half)) {
                return Err(CoshError::usage(format!(
                    "channel {c} sample {i} = {} outside ±{half} V",
                    ch[i]
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels[0].is_empty()
    }

    pub fn channel(&self, c: Channel) -> &[f64] {
        &self.channels[c.index()]
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.meta.sample_rate_hz
    }
}
