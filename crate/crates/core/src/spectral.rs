//! Band-planned cross-spectral estimation and delay-line compensation.
//!
//! Each band of the [`BandPlan`] partitions the trimmed phase series into
//! `M = floor(len / L)` consecutive rectangular segments of `L = round(fs /
//! rbw)` samples. Per segment both channels are transformed and the products
//! `X·Y*` are averaged; the magnitude of the average is the one-sided
//! estimate `2/(fs·L)·|⟨X·Y*⟩|`. Noise that is uncorrelated between the two
//! detectors averages towards zero as `M^(-1/2)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::band::{segment_len, Band, BandPlan};
use crate::demod::{analytic_phase, PhaseSeries};
use crate::error::{CoshError, Result};
use crate::psd::{BinFlag, Estimator, Psd, PsdBin, PsdKind, PsdMeta, Window};
use crate::trace::{Channel, TraceRecord};

/// Gain used at an exact transfer-function null when no cap is configured.
pub const NULL_GAIN: f64 = 1e12;

/// `f·τ` closer than this to an integer counts as an exact null.
const NULL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisParams {
    pub band_plan: BandPlan,
    /// Delay used for compensation, normally the record's effective delay.
    pub delay_s: f64,
    /// Upper limit on the processing gain; `None` leaves it uncapped.
    pub gain_cap: Option<f64>,
    pub estimator: Estimator,
    pub window: Window,
}

impl AnalysisParams {
    pub fn new(band_plan: BandPlan, delay_s: f64) -> Self {
        AnalysisParams {
            band_plan,
            delay_s,
            gain_cap: None,
            estimator: Estimator::Cross,
            window: Window::Rectangular,
        }
    }

    /// Parameters taking the delay from the record metadata.
    pub fn for_trace(trace: &TraceRecord, band_plan: BandPlan) -> Self {
        Self::new(band_plan, trace.meta.delay_s)
    }

    pub fn with_estimator(mut self, estimator: Estimator) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn with_window(mut self, window: Window) -> Self {
        self.window = window;
        self
    }

    pub fn with_gain_cap(mut self, cap: Option<f64>) -> Self {
        self.gain_cap = cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.band_plan.validate()?;
        if !(self.delay_s > 0.0 && self.delay_s.is_finite()) {
            return Err(CoshError::config("analysis delay_s must be > 0"));
        }
        if let Some(cap) = self.gain_cap {
            if !(cap > 0.0) {
                return Err(CoshError::config("gain cap must be > 0"));
            }
        }
        Ok(())
    }
}

/// Splits a phase series into the `M` non-overlapping segments used for a
/// resolution bandwidth. Trailing samples that do not fill a segment are
/// discarded; an empty vector means the record is shorter than one segment.
pub fn band_segments(phase: &PhaseSeries, rbw_hz: f64) -> Vec<&[f64]> {
    let l = segment_len(phase.sample_rate_hz, rbw_hz);
    if l == 0 {
        return Vec::new();
    }
    phase.samples.chunks_exact(l).collect()
}

/// Estimates the one-sided PSD of the differential phase from two channels.
///
/// The result is not yet compensated for the interferometer transfer
/// function. Bands whose segment does not fit in the record are skipped and
/// noted in the metadata.
pub fn cross_psd(phase_a: &PhaseSeries, phase_b: &PhaseSeries, params: &AnalysisParams) -> Result<Psd> {
    if phase_a.len() != phase_b.len() || phase_a.sample_rate_hz != phase_b.sample_rate_hz {
        return Err(CoshError::usage(format!(
            "phase series mismatch: {} samples @ {} Hz vs {} samples @ {} Hz",
            phase_a.len(),
            phase_a.sample_rate_hz,
            phase_b.len(),
            phase_b.sample_rate_hz
        )));
    }
    params.band_plan.validate()?;
    let mut psd = band_psd(
        &phase_a.samples,
        &phase_b.samples,
        phase_a.sample_rate_hz,
        &params.band_plan.bands,
        params.estimator,
        params.window,
    )?;
    psd.meta.trim_fraction = Some(phase_a.trimmed_fraction);
    Ok(psd)
}

fn band_psd(a: &[f64], b: &[f64], fs: f64, bands: &[Band], estimator: Estimator, window: Window) -> Result<Psd> {
    if bands.is_empty() {
        return Err(CoshError::usage("empty band set"));
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut bins: Vec<PsdBin> = Vec::new();
    let mut notes = Vec::new();
    for (index, band) in bands.iter().enumerate() {
        let l = segment_len(fs, band.rbw_hz);
        let m = if l == 0 { 0 } else { a.len() / l };
        if m == 0 {
            notes.push(format!(
                "band {index} ({}-{} Hz, rbw {} Hz) skipped: record of {} samples shorter than one {l}-sample segment",
                band.f_lo_hz,
                band.f_hi_hz,
                band.rbw_hz,
                a.len()
            ));
            continue;
        }
        let df = fs / l as f64;
        let k_first = ((band.f_lo_hz / df).floor() as usize).max(1);
        let ks: Vec<usize> = (k_first..)
            .take_while(|&k| 2 * k < l && (k as f64 * df) < band.f_hi_hz)
            .filter(|&k| band.contains(k as f64 * df))
            .collect();
        if ks.is_empty() {
            notes.push(format!("band {index}: no bins inside the band"));
            continue;
        }
        let fft = planner.plan_fft_forward(l);
        let w = window.coefficients(l);
        let w_power: f64 = w.iter().map(|c| c * c).sum();
        let mut buf = vec![Complex64::new(0.0, 0.0); l];
        let mut cross = vec![Complex64::new(0.0, 0.0); ks.len()];
        let mut power = vec![0.0; ks.len()];
        for seg in 0..m {
            let (sa, sb) = (&a[seg * l..(seg + 1) * l], &b[seg * l..(seg + 1) * l]);
            // both real transforms from one complex transform of a + i·b
            for (((z, &x), &y), &c) in buf.iter_mut().zip(sa).zip(sb).zip(&w) {
                *z = Complex64::new(c * x, c * y);
            }
            fft.process(&mut buf);
            for (j, &k) in ks.iter().enumerate() {
                let zk = buf[k];
                let zn = buf[l - k].conj();
                let x = 0.5 * (zk + zn);
                let y = Complex64::new(0.0, -0.5) * (zk - zn);
                match estimator {
                    Estimator::Cross => cross[j] += x * y.conj(),
                    Estimator::SingleChannel => power[j] += x.norm_sqr(),
                    Estimator::DualAverage => power[j] += 0.5 * (x.norm_sqr() + y.norm_sqr()),
                }
            }
        }
        let norm = 2.0 / (fs * w_power) / m as f64;
        let last = bins.last().map_or(0.0, |b| b.freq_hz);
        for (j, &k) in ks.iter().enumerate() {
            let f = k as f64 * df;
            if f <= last {
                continue;
            }
            let v = match estimator {
                Estimator::Cross => cross[j].norm(),
                _ => power[j],
            } * norm;
            bins.push(PsdBin::new(f, v, index, m));
        }
    }
    let mut psd = Psd::new(PsdKind::Phase, bins)?;
    psd.meta = PsdMeta {
        estimator: Some(estimator),
        window: Some(window),
        notes,
        ..PsdMeta::default()
    };
    Ok(psd)
}

/// Inverse of the delay-line transfer function, `1 / (4 sin²(π f τ))`.
///
/// Returns `f64::INFINITY` at the nulls `f = k/τ`.
pub fn processing_gain(f: f64, delay_s: f64) -> f64 {
    let x = f * delay_s;
    if (x - x.round()).abs() < NULL_TOLERANCE {
        return f64::INFINITY;
    }
    let s = (PI * x).sin();
    1.0 / (4.0 * s * s)
}

/// Applies the processing gain to a differential-phase PSD and converts to
/// frequency noise, `S_ν(f) = f²·G(f)·S_Δφ(f)`.
///
/// Bins on an exact null use the cap (or [`NULL_GAIN`]) and are flagged as
/// spurs.
pub fn compensate_and_convert(psd: &Psd, delay_s: f64, gain_cap: Option<f64>) -> Result<Psd> {
    if psd.kind != PsdKind::Phase {
        return Err(CoshError::usage(format!(
            "compensation expects a phase PSD, got {}",
            psd.kind
        )));
    }
    if !(delay_s > 0.0 && delay_s.is_finite()) {
        return Err(CoshError::domain("compensation delay must be > 0"));
    }
    let bins = psd
        .bins
        .iter()
        .map(|b| {
            let f = b.freq_hz;
            let mut g = processing_gain(f, delay_s);
            let mut flag = b.flag;
            if g.is_infinite() {
                g = gain_cap.unwrap_or(NULL_GAIN);
                flag = BinFlag::Spur;
            } else if let Some(cap) = gain_cap {
                g = g.min(cap);
            }
            PsdBin {
                value: f * f * g * b.value,
                flag,
                ..*b
            }
        })
        .collect();
    let mut out = Psd::new(PsdKind::Frequency, bins)?;
    out.meta = psd.meta.clone();
    out.meta.delay_s = Some(delay_s);
    Ok(out)
}

/// Full pipeline for a recorded trace: demodulate both channels, estimate
/// the cross-spectrum and compensate.
pub fn analyze(trace: &TraceRecord, params: &AnalysisParams) -> Result<Psd> {
    trace.validate()?;
    let mut psd = analyze_channels(
        &trace.channels[0],
        &trace.channels[1],
        trace.meta.sample_rate_hz,
        trace.meta.heterodyne_hz,
        params,
    )?;
    psd.meta.notes.extend(trace.meta.warnings.iter().cloned());
    Ok(psd)
}

pub(crate) fn analyze_channels(a: &[f64], b: &[f64], fs: f64, heterodyne_hz: f64, params: &AnalysisParams) -> Result<Psd> {
    params.validate()?;
    if a.len() != b.len() {
        return Err(CoshError::usage("channel lengths differ"));
    }
    let trim = params.band_plan.trim_fraction;
    let pa = analytic_phase(a, fs, heterodyne_hz, trim, Channel::A)?;
    let pb = if params.estimator == Estimator::SingleChannel {
        pa.clone()
    } else {
        analytic_phase(b, fs, heterodyne_hz, trim, Channel::B)?
    };
    let dphi = cross_psd(&pa, &pb, params)?;
    compensate_and_convert(&dphi, params.delay_s, params.gain_cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::band::{segment_count, trimmed_len};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn series(samples: Vec<f64>, fs: f64) -> PhaseSeries {
        PhaseSeries {
            samples,
            sample_rate_hz: fs,
            trimmed_fraction: 0.0,
            source_channel: Channel::A,
            heterodyne_hz_removed: 1.0,
            start_index: 0,
        }
    }

    fn plan(bands: Vec<Band>) -> BandPlan {
        BandPlan::new(bands, 0.0).unwrap()
    }

    #[test]
    fn segment_counts_for_reference_record() {
        let fs = 312.5e6;
        let n = trimmed_len(40_000_000, 0.02);
        assert_relative_eq!(n as f64 / fs, 0.12288, max_relative = 1e-12);
        assert_eq!(segment_count(n, fs, 100.0), 12);
        assert_eq!(segment_count(n, fs, 10e3), 1228);
        assert_eq!(segment_count(n, fs, 10.0), 1);
    }

    #[test]
    fn band_segments_partition() {
        let p = series((0..10_050).map(|i| i as f64).collect(), 1e6);
        let segs = band_segments(&p, 1e3);
        assert_eq!(segs.len(), 10);
        assert!(segs.iter().all(|s| s.len() == 1000));
        assert_eq!(segs[3][0], 3000.0);
        assert!(band_segments(&p, 10.0).is_empty());
    }

    #[test]
    fn pure_tone_parseval() {
        let fs = 31.25e6;
        let x: Vec<f64> = (0..625_000)
            .map(|i| (2.0 * PI * 10e3 * i as f64 / fs).sin())
            .collect();
        let p = series(x, fs);
        let params = AnalysisParams::new(plan(vec![Band::new(1e3, 50e3, 100.0)]), 1e-6);
        let psd = cross_psd(&p, &p, &params).unwrap();
        let peak = psd
            .bins
            .iter()
            .max_by(|a, b| a.value.total_cmp(&b.value))
            .unwrap();
        assert_relative_eq!(peak.freq_hz, 10e3);
        assert_relative_eq!(peak.value, 5e-3, max_relative = 1e-9);
        assert_eq!(peak.n_avg, 2);
        let others: f64 = psd.bins.iter().filter(|b| b.freq_hz != 10e3).map(|b| b.value).sum();
        assert!(others < 1e-12);
    }

    #[test]
    fn tone_band_power_independent_of_rbw() {
        // off-grid tone: rectangular leakage spreads power, the band integral keeps it
        let fs = 1e6;
        let amp = 0.3;
        let f0 = 12_345.6;
        let x: Vec<f64> = (0..1_000_000)
            .map(|i| amp * (2.0 * PI * f0 * i as f64 / fs + 0.3).sin())
            .collect();
        let p = series(x, fs);
        for rbw in [10.0, 100.0, 1000.0] {
            let params = AnalysisParams::new(plan(vec![Band::new(1e3, 100e3, rbw)]), 1e-6)
                .with_estimator(Estimator::SingleChannel);
            let psd = cross_psd(&p, &p, &params).unwrap();
            let df = fs / segment_len(fs, rbw) as f64;
            let total: f64 = psd.bins.iter().map(|b| b.value * df).sum();
            assert_relative_eq!(total, amp * amp / 2.0, max_relative = 0.01);
        }
    }

    #[test]
    fn estimators_agree_on_identical_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
        let p = series(x, 1e6);
        let bands = plan(vec![Band::new(1e3, 100e3, 1e3)]);
        let vals: Vec<Vec<f64>> = [Estimator::Cross, Estimator::SingleChannel, Estimator::DualAverage]
            .iter()
            .map(|&e| {
                cross_psd(&p, &p, &AnalysisParams::new(bands.clone(), 1e-6).with_estimator(e))
                    .unwrap()
                    .values()
            })
            .collect();
        for i in 0..vals[0].len() {
            assert_relative_eq!(vals[0][i], vals[1][i], max_relative = 1e-9);
            assert_relative_eq!(vals[0][i], vals[2][i], max_relative = 1e-9);
        }
    }

    #[test]
    fn white_noise_density() {
        // one-sided density of white noise with per-sample variance σ² is 2σ²/fs
        let fs = 1e6;
        let sigma = 0.01;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..1_000_000).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect();
        let p = series(x, fs);
        for window in [Window::Rectangular, Window::Hann] {
            let params = AnalysisParams::new(plan(vec![Band::new(1e3, 400e3, 1e3)]), 1e-6)
                .with_estimator(Estimator::SingleChannel)
                .with_window(window);
            let psd = cross_psd(&p, &p, &params).unwrap();
            let mean = psd.values().iter().sum::<f64>() / psd.len() as f64;
            assert_relative_eq!(mean, 2.0 * sigma * sigma / fs, max_relative = 0.01);
        }
    }

    #[test]
    fn hann_confines_leakage() {
        // strong line at 100.5 kHz, far bins must stay near zero with the taper
        let fs = 1e6;
        let x: Vec<f64> = (0..100_000).map(|i| (2.0 * PI * 100.5e3 * i as f64 / fs).sin()).collect();
        let p = series(x, fs);
        let far = |w: Window| {
            let params = AnalysisParams::new(plan(vec![Band::new(1e3, 400e3, 1e3)]), 1e-6).with_window(w);
            let psd = cross_psd(&p, &p, &params).unwrap();
            let peak = psd.values().iter().cloned().fold(0.0, f64::max);
            psd.bins.iter().filter(|b| (b.freq_hz - 100.5e3).abs() > 20e3).map(|b| b.value).fold(0.0, f64::max) / peak
        };
        assert!(far(Window::Rectangular) > 1e-4);
        assert!(far(Window::Hann) < 1e-8);
    }

    #[test]
    fn band_edges_and_skips() {
        let fs = 1e6;
        let p = series(vec![0.0; 50_000], fs);
        let params = AnalysisParams::new(
            plan(vec![
                Band::new(1e3, 10e3, 10.0),
                Band::new(10e3, 100e3, 1e3),
                Band::new(100e3, 400e3, 10e3),
            ]),
            1e-6,
        );
        let psd = cross_psd(&p, &p, &params).unwrap();
        // rbw 10 Hz needs 100k samples
        assert_eq!(psd.meta.notes.len(), 1);
        assert!(psd.meta.notes[0].contains("band 0"));
        let first = &psd.bins[0];
        assert_eq!((first.freq_hz, first.band_index, first.n_avg), (10e3, 1, 50));
        let b2: Vec<_> = psd.bins.iter().filter(|b| b.band_index == 2).collect();
        assert_eq!(b2.first().unwrap().freq_hz, 100e3);
        assert!(b2.last().unwrap().freq_hz < 400e3);
        assert!(psd.bins.iter().all(|b| b.freq_hz < 0.5 * fs));
    }

    #[test]
    fn mismatched_series_rejected() {
        let a = series(vec![0.0; 1000], 1e6);
        let b = series(vec![0.0; 999], 1e6);
        let params = AnalysisParams::new(plan(vec![Band::new(1e3, 100e3, 1e3)]), 1e-6);
        assert!(matches!(cross_psd(&a, &b, &params), Err(CoshError::Usage(_))));
    }

    #[test]
    fn gain_values() {
        let tau = 5.435e-6;
        assert_relative_eq!(processing_gain(0.5 / tau, tau), 0.25, max_relative = 1e-12);
        let g = processing_gain(1e3, tau);
        assert_relative_eq!(g, 1.0 / (4.0 * PI * PI * (1e3 * tau).powi(2)), max_relative = 1e-3);
        assert_relative_eq!(g, 857.5, max_relative = 1e-3);
        assert!(processing_gain(1.0 / tau, tau).is_infinite());
        assert!(processing_gain(3.0 / tau, tau).is_infinite());
    }

    #[test]
    fn flat_input_produces_spurs_at_fsr_multiples() {
        let tau = 5e-6;
        let freqs: Vec<f64> = (1..=1000).map(|k| k as f64 * 1e3).collect();
        let s0 = 1e-12;
        let psd = Psd::from_pairs(PsdKind::Phase, &freqs, &vec![s0; freqs.len()]).unwrap();
        let out = compensate_and_convert(&psd, tau, None).unwrap();
        assert_eq!(out.kind, PsdKind::Frequency);
        for b in &out.bins {
            let x = b.freq_hz * tau;
            if (x - x.round()).abs() < 1e-9 {
                assert_eq!(b.flag, BinFlag::Spur);
                assert_relative_eq!(b.value, b.freq_hz.powi(2) * NULL_GAIN * s0, max_relative = 1e-12);
            } else {
                let expected = b.freq_hz.powi(2) * s0 / (4.0 * (PI * x).sin().powi(2));
                assert_relative_eq!(b.value, expected, max_relative = 1e-12);
            }
        }
        let capped = compensate_and_convert(&psd, tau, Some(10.0)).unwrap();
        assert!(capped.bins.iter().all(|b| b.value <= b.freq_hz.powi(2) * 10.0 * s0 * (1.0 + 1e-12)));
    }

    #[test]
    fn compensation_inverts_transfer_function() {
        let tau = 5.435e-6;
        let freqs: Vec<f64> = (1..500).map(|k| k as f64 * 997.0).collect();
        let s_true: Vec<f64> = freqs.iter().map(|f| 1.0 / (f * f) + 1e-14).collect();
        let measured: Vec<f64> = freqs
            .iter()
            .zip(&s_true)
            .map(|(f, s)| 4.0 * (PI * f * tau).sin().powi(2) * s)
            .collect();
        let psd = Psd::from_pairs(PsdKind::Phase, &freqs, &measured).unwrap();
        let out = compensate_and_convert(&psd, tau, None).unwrap();
        for ((b, f), s) in out.bins.iter().zip(&freqs).zip(&s_true) {
            assert_relative_eq!(b.value, f * f * s, max_relative = 1e-9);
        }
    }

    #[test]
    fn compensation_requires_phase_kind() {
        let psd = Psd::from_pairs(PsdKind::Frequency, &[1.0], &[1.0]).unwrap();
        assert!(matches!(compensate_and_convert(&psd, 1e-6, None), Err(CoshError::Usage(_))));
    }
}
