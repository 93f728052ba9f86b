//! Resolution-bandwidth band plans.

use serde::{Deserialize, Serialize};

use crate::error::{CoshError, Result};

pub const DEFAULT_TRIM_FRACTION: f64 = 0.02;

/// Frequency window `[f_lo_hz, f_hi_hz)` analysed with resolution `rbw_hz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    pub f_lo_hz: f64,
    pub f_hi_hz: f64,
    pub rbw_hz: f64,
}

impl Band {
    pub fn new(f_lo_hz: f64, f_hi_hz: f64, rbw_hz: f64) -> Self {
        Band {
            f_lo_hz,
            f_hi_hz,
            rbw_hz,
        }
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.f_lo_hz && f < self.f_hi_hz
    }
}

/// Ordered, non-overlapping bands plus the per-end record trim applied
/// after demodulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandPlan {
    pub bands: Vec<Band>,
    #[serde(default = "default_trim")]
    pub trim_fraction: f64,
}

fn default_trim() -> f64 {
    DEFAULT_TRIM_FRACTION
}

impl BandPlan {
    pub fn new(bands: Vec<Band>, trim_fraction: f64) -> Result<Self> {
        let plan = BandPlan {
            bands,
            trim_fraction,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// The four-decade plan used for 312.5 MS/s, 40 MS records:
    /// 1-10 kHz at 10 Hz, 10-100 kHz at 100 Hz, 0.1-1 MHz at 1 kHz and
    /// 1-10 MHz at 10 kHz.
    pub fn reference() -> Self {
        BandPlan {
            bands: vec![
                Band::new(1e3, 10e3, 10.0),
                Band::new(10e3, 100e3, 100.0),
                Band::new(100e3, 1e6, 1e3),
                Band::new(1e6, 10e6, 10e3),
            ],
            trim_fraction: DEFAULT_TRIM_FRACTION,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bands.is_empty() {
            return Err(CoshError::config("band plan has no bands"));
        }
        if !(0.0..0.25).contains(&self.trim_fraction) {
            return Err(CoshError::config(format!(
                "trim_fraction {} outside [0, 0.25)",
                self.trim_fraction
            )));
        }
        for (i, b) in self.bands.iter().enumerate() {
            if !(b.rbw_hz > 0.0 && b.rbw_hz.is_finite() && b.f_hi_hz.is_finite()) {
                return Err(CoshError::config(format!("band {i}: rbw must be > 0")));
            }
            if b.f_lo_hz < b.rbw_hz {
                return Err(CoshError::config(format!(
                    "band {i}: f_lo {} below rbw {}",
                    b.f_lo_hz, b.rbw_hz
                )));
            }
            if b.f_hi_hz - b.f_lo_hz < 10.0 * b.rbw_hz {
                return Err(CoshError::config(format!(
                    "band {i}: width {} narrower than 10 rbw",
                    b.f_hi_hz - b.f_lo_hz
                )));
            }
        }
        for (i, w) in self.bands.windows(2).enumerate() {
            if w[1].f_lo_hz < w[0].f_hi_hz {
                return Err(CoshError::config(format!(
                    "bands {i} and {} overlap or are out of order",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    pub fn f_min(&self) -> f64 {
        self.bands.first().map_or(0.0, |b| b.f_lo_hz)
    }

    pub fn f_max(&self) -> f64 {
        self.bands.last().map_or(0.0, |b| b.f_hi_hz)
    }
}

/// Record length left after trimming both ends, `floor(n·(1 − 2·trim))`.
pub fn trimmed_len(n: usize, trim_fraction: f64) -> usize {
    // the guard keeps exact products such as 40e6 × 0.96 from flooring down
    let keep = (n as f64 * (1.0 - 2.0 * trim_fraction) * (1.0 + 1e-12)).floor() as usize;
    keep.min(n)
}

/// Samples removed from the start of the record; the end loses the same
/// number or one more.
pub fn trim_count(n: usize, trim_fraction: f64) -> usize {
    (n - trimmed_len(n, trim_fraction)) / 2
}

/// Segment length in samples for a requested resolution bandwidth.
pub fn segment_len(sample_rate_hz: f64, rbw_hz: f64) -> usize {
    (sample_rate_hz / rbw_hz).round() as usize
}

/// Number of non-overlapping segments (averages) available for a band.
pub fn segment_count(trimmed_len: usize, sample_rate_hz: f64, rbw_hz: f64) -> usize {
    let l = segment_len(sample_rate_hz, rbw_hz);
    if l == 0 {
        0
    } else {
        trimmed_len / l
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_plan_validates() {
        BandPlan::reference().validate().unwrap();
    }

    #[test]
    fn reference_plan_segment_counts() {
        let n = trimmed_len(40_000_000, 0.02);
        assert_eq!(n, 38_400_000);
        let counts: Vec<usize> = BandPlan::reference()
            .bands
            .iter()
            .map(|b| segment_count(n, 312.5e6, b.rbw_hz))
            .collect();
        assert_eq!(counts, vec![1, 12, 122, 1228]);
    }

    #[test]
    fn overlapping_plan_rejected() {
        let p = BandPlan::new(
            vec![Band::new(1e3, 20e3, 10.0), Band::new(10e3, 100e3, 100.0)],
            0.02,
        );
        assert!(p.is_err());
    }

    #[test]
    fn narrow_or_low_band_rejected() {
        assert!(BandPlan::new(vec![Band::new(1e3, 5e3, 1e3)], 0.02).is_err());
        assert!(BandPlan::new(vec![Band::new(50.0, 1e4, 100.0)], 0.02).is_err());
        assert!(BandPlan::new(vec![Band::new(1e3, 1e4, 10.0)], 0.3).is_err());
        assert!(BandPlan::new(vec![], 0.02).is_err());
    }

    proptest! {
        #[test]
        fn overlap_always_rejected(lo in 100.0f64..1e5, w in 1e3f64..1e6, back in 0.01f64..0.99) {
            let first = Band::new(lo, lo + w, 10.0);
            let second_lo = lo + w - back * w;
            let second = Band::new(second_lo, second_lo + 2.0 * w, 10.0);
            prop_assert!(BandPlan::new(vec![first, second], 0.02).is_err());
        }
    }
}
