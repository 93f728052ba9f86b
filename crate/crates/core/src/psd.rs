//! One-sided power spectral densities on piecewise frequency grids.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CoshError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PsdKind {
    /// rad²/Hz
    Phase,
    /// Hz²/Hz
    Frequency,
    /// 1/Hz
    Rin,
    /// V²/Hz
    Voltage,
}

impl PsdKind {
    pub fn unit(&self) -> &'static str {
        match self {
            PsdKind::Phase => "rad^2/Hz",
            PsdKind::Frequency => "Hz^2/Hz",
            PsdKind::Rin => "1/Hz",
            PsdKind::Voltage => "V^2/Hz",
        }
    }
}

impl fmt::Display for PsdKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PsdKind::Phase => "phase",
            PsdKind::Frequency => "frequency",
            PsdKind::Rin => "rin",
            PsdKind::Voltage => "voltage",
        })
    }
}

impl FromStr for PsdKind {
    type Err = CoshError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phase" => Ok(PsdKind::Phase),
            "frequency" => Ok(PsdKind::Frequency),
            "rin" => Ok(PsdKind::Rin),
            "voltage" => Ok(PsdKind::Voltage),
            other => Err(CoshError::usage(format!("unknown PSD kind '{other}'"))),
        }
    }
}

/// How the two detector channels are combined into one spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Magnitude of the segment-averaged cross-spectrum `⟨X·Y*⟩`.
    #[default]
    Cross,
    /// Periodogram of channel A only.
    SingleChannel,
    /// Mean of both channels' periodograms.
    DualAverage,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Cross => "cross",
            Estimator::SingleChannel => "single",
            Estimator::DualAverage => "dual",
        })
    }
}

impl FromStr for Estimator {
    type Err = CoshError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cross" => Ok(Estimator::Cross),
            "single" | "single_channel" => Ok(Estimator::SingleChannel),
            "dual" | "dual_average" => Ok(Estimator::DualAverage),
            other => Err(CoshError::usage(format!("unknown estimator '{other}'"))),
        }
    }
}

/// Taper applied to each segment before its transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    /// No taper. Keeps the plain partition of the record but leaks about
    /// 10% of the local power into neighbouring bins.
    #[default]
    Rectangular,
    /// Periodic Hann taper; sidelobes fall as `1/Δf⁶` in power.
    Hann,
}

impl Window {
    /// Coefficients for a segment of `l` samples.
    pub fn coefficients(self, l: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; l],
            Window::Hann => (0..l)
                .map(|i| {
                    let s = (std::f64::consts::PI * i as f64 / l as f64).sin();
                    s * s
                })
                .collect(),
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Window::Rectangular => "rectangular",
            Window::Hann => "hann",
        })
    }
}

impl FromStr for Window {
    type Err = CoshError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rect" | "rectangular" => Ok(Window::Rectangular),
            "hann" => Ok(Window::Hann),
            other => Err(CoshError::usage(format!("unknown window '{other}'"))),
        }
    }
}

/// Per-bin provenance flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BinFlag {
    #[default]
    Clean,
    /// Bin sits on a transfer-function null; its value used a capped gain.
    Spur,
    /// Value replaced from a second spectrum.
    Substituted,
    /// Inside a spur zone that no other spectrum could fill.
    Unresolvable,
}

impl BinFlag {
    pub fn code(self) -> u8 {
        match self {
            BinFlag::Clean => 0,
            BinFlag::Spur => 1,
            BinFlag::Substituted => 2,
            BinFlag::Unresolvable => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => BinFlag::Clean,
            1 => BinFlag::Spur,
            2 => BinFlag::Substituted,
            3 => BinFlag::Unresolvable,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdBin {
    pub freq_hz: f64,
    pub value: f64,
    pub band_index: usize,
    pub n_avg: usize,
    pub flag: BinFlag,
}

impl PsdBin {
    pub fn new(freq_hz: f64, value: f64, band_index: usize, n_avg: usize) -> Self {
        PsdBin {
            freq_hz,
            value,
            band_index,
            n_avg,
            flag: BinFlag::Clean,
        }
    }
}

/// Provenance carried alongside a spectrum.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PsdMeta {
    pub estimator: Option<Estimator>,
    pub window: Option<Window>,
    pub delay_s: Option<f64>,
    pub trim_fraction: Option<f64>,
    /// Free-form diagnostics (skipped bands, warnings).
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub kind: PsdKind,
    pub bins: Vec<PsdBin>,
    pub meta: PsdMeta,
}

impl Psd {
    /// Builds a spectrum, checking that frequencies are positive and strictly
    /// increasing, values finite and non-negative and `n_avg >= 1`.
    pub fn new(kind: PsdKind, bins: Vec<PsdBin>) -> Result<Self> {
        let psd = Psd {
            kind,
            bins,
            meta: PsdMeta::default(),
        };
        psd.validate()?;
        Ok(psd)
    }

    /// Single-band spectrum from parallel frequency/value slices.
    pub fn from_pairs(kind: PsdKind, freqs: &[f64], values: &[f64]) -> Result<Self> {
        if freqs.len() != values.len() {
            return Err(CoshError::usage("frequency and value lengths differ"));
        }
        let bins = freqs
            .iter()
            .zip(values)
            .map(|(&f, &v)| PsdBin::new(f, v, 0, 1))
            .collect();
        Psd::new(kind, bins)
    }

    pub fn with_meta(mut self, meta: PsdMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (i, b) in self.bins.iter().enumerate() {
            if !(b.freq_hz > 0.0 && b.freq_hz.is_finite()) {
                return Err(CoshError::usage(format!(
                    "bin {i}: frequency {} must be > 0",
                    b.freq_hz
                )));
            }
            if !(b.value >= 0.0 && b.value.is_finite()) {
                return Err(CoshError::usage(format!(
                    "bin {i}: value {} must be finite and >= 0",
                    b.value
                )));
            }
            if b.n_avg == 0 {
                return Err(CoshError::usage(format!("bin {i}: n_avg must be >= 1")));
            }
        }
        for (i, w) in self.bins.windows(2).enumerate() {
            if w[1].freq_hz <= w[0].freq_hz {
                return Err(CoshError::usage(format!(
                    "bins {i}/{}: frequencies not strictly increasing",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn freqs(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.freq_hz).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.value).collect()
    }

    /// `(first, last)` frequency, if any bins exist.
    pub fn support(&self) -> Option<(f64, f64)> {
        Some((self.bins.first()?.freq_hz, self.bins.last()?.freq_hz))
    }

    /// Grid spacing around bin `i`, taken from the neighbour in the same band.
    pub fn bin_spacing(&self, i: usize) -> f64 {
        let b = &self.bins[i];
        let next = self
            .bins
            .get(i + 1)
            .filter(|n| n.band_index == b.band_index)
            .map(|n| n.freq_hz - b.freq_hz);
        let prev = i
            .checked_sub(1)
            .map(|j| &self.bins[j])
            .filter(|p| p.band_index == b.band_index)
            .map(|p| b.freq_hz - p.freq_hz);
        match (prev, next) {
            (Some(p), Some(n)) => p.min(n),
            (Some(p), None) => p,
            (None, Some(n)) => n,
            (None, None) => self
                .bins
                .get(i + 1)
                .map(|n| n.freq_hz - b.freq_hz)
                .or_else(|| i.checked_sub(1).map(|j| b.freq_hz - self.bins[j].freq_hz))
                .unwrap_or(0.0),
        }
    }

    /// Log-log interpolation at `f`; `None` outside the support.
    ///
    /// Falls back to linear interpolation where a neighbouring value is zero.
    pub fn interpolate(&self, f: f64) -> Option<f64> {
        let (lo, hi) = self.support()?;
        if f < lo || f > hi {
            return None;
        }
        let j = self.bins.partition_point(|b| b.freq_hz < f);
        let right = &self.bins[j];
        if right.freq_hz == f {
            return Some(right.value);
        }
        let left = &self.bins[j - 1];
        Some(interp_loglog(
            (left.freq_hz, left.value),
            (right.freq_hz, right.value),
            f,
        ))
    }
}

pub(crate) fn interp_loglog(a: (f64, f64), b: (f64, f64), f: f64) -> f64 {
    if a.1 > 0.0 && b.1 > 0.0 {
        let t = (f.ln() - a.0.ln()) / (b.0.ln() - a.0.ln());
        (a.1.ln() + t * (b.1.ln() - a.1.ln())).exp()
    } else {
        let t = (f - a.0) / (b.0 - a.0);
        a.1 + t * (b.1 - a.1)
    }
}
