//! Analytic-signal phase demodulation of one digitized channel.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::band::{trim_count, trimmed_len};
use crate::error::{CoshError, Result};
use crate::synth::carrier_phase;
use crate::trace::Channel;

/// Minimum record length accepted for demodulation.
pub const MIN_RECORD: usize = 1 << 12;

/// Largest admissible sample-to-sample change of the baseband phase.
/// Larger increments are ambiguous modulo 2π and abort the unwrap.
pub const MAX_PHASE_STEP: f64 = 0.5 * PI;

/// Envelope samples below this fraction of the RMS envelope have no usable
/// phase.
pub const MIN_RELATIVE_ENVELOPE: f64 = 1e-6;

/// Demodulated differential phase `Δφ(t_i)` after trimming.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSeries {
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
    pub trimmed_fraction: f64,
    pub source_channel: Channel,
    pub heterodyne_hz_removed: f64,
    /// Index in the original record of the first retained sample.
    pub start_index: usize,
}

impl PhaseSeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }
}

/// Analytic signal of a real record through one full-length transform:
/// negative-frequency bins zeroed, positive bins doubled, DC and Nyquist
/// kept.
pub fn analytic_signal(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let positive_end = if n % 2 == 0 { half } else { half + 1 };
    for c in &mut buf[1..positive_end] {
        *c *= 2.0;
    }
    for c in &mut buf[half + 1..] {
        *c = Complex64::new(0.0, 0.0);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let norm = 1.0 / n as f64;
    for c in &mut buf {
        *c *= norm;
    }
    buf
}

/// Extracts the differential phase of one channel.
///
/// The analytic signal is mixed down by the nominal carrier, its argument is
/// unwrapped, `trim_fraction` of the record is dropped at each end and a
/// least-squares line fitted to the retained samples is subtracted. The
/// line absorbs a constant offset and any small detuning of the carrier.
pub fn analytic_phase(
    channel: &[f64],
    sample_rate_hz: f64,
    nominal_heterodyne_hz: f64,
    trim_fraction: f64,
    source_channel: Channel,
) -> Result<PhaseSeries> {
    let n = channel.len();
    if n < MIN_RECORD {
        return Err(CoshError::domain(format!(
            "record of {n} samples shorter than {MIN_RECORD}"
        )));
    }
    if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
        return Err(CoshError::domain("sample rate must be > 0"));
    }
    if !(nominal_heterodyne_hz > 0.0 && nominal_heterodyne_hz < 0.5 * sample_rate_hz) {
        return Err(CoshError::domain(format!(
            "heterodyne {nominal_heterodyne_hz} Hz outside (0, {}) Hz",
            0.5 * sample_rate_hz
        )));
    }
    if !(0.0..0.25).contains(&trim_fraction) {
        return Err(CoshError::domain(format!(
            "trim fraction {trim_fraction} outside [0, 0.25)"
        )));
    }

    let z = analytic_signal(channel);
    let mean_power = z.iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;
    if !(mean_power > 0.0 && mean_power.is_finite()) {
        return Err(CoshError::Demodulation(format!(
            "{source_channel}: channel carries no signal"
        )));
    }
    let floor = MIN_RELATIVE_ENVELOPE * mean_power.sqrt();

    let mut phase = Vec::with_capacity(n);
    let mut prev_wrapped = 0.0;
    let mut acc = 0.0;
    for (i, c) in z.iter().enumerate() {
        if c.norm() < floor {
            return Err(CoshError::Demodulation(format!(
                "{source_channel}: envelope collapses at sample {i}"
            )));
        }
        let carrier = carrier_phase(i, nominal_heterodyne_hz, sample_rate_hz);
        let w = c * Complex64::from_polar(1.0, -carrier);
        let wrapped = w.im.atan2(w.re);
        if i > 0 {
            let mut step = wrapped - prev_wrapped;
            step -= 2.0 * PI * (step / (2.0 * PI)).round();
            if step.abs() > MAX_PHASE_STEP {
                return Err(CoshError::Demodulation(format!(
                    "{source_channel}: phase step {step:.3} rad at sample {i} \
                     (SNR too low or heterodyne frequency mis-specified)"
                )));
            }
            acc += step;
        } else {
            acc = wrapped;
        }
        prev_wrapped = wrapped;
        phase.push(acc);
    }
    drop(z);

    let k = trim_count(n, trim_fraction);
    let mut samples = phase[k..k + trimmed_len(n, trim_fraction)].to_vec();
    drop(phase);
    remove_linear_trend(&mut samples);

    Ok(PhaseSeries {
        samples,
        sample_rate_hz,
        trimmed_fraction: trim_fraction,
        source_channel,
        heterodyne_hz_removed: nominal_heterodyne_hz,
        start_index: k,
    })
}

/// Subtracts the least-squares line over the sample index.
pub fn remove_linear_trend(x: &mut [f64]) {
    let n = x.len();
    if n < 2 {
        return;
    }
    let nf = n as f64;
    let t_mean = 0.5 * (nf - 1.0);
    let x_mean = x.iter().sum::<f64>() / nf;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, v) in x.iter().enumerate() {
        let dt = i as f64 - t_mean;
        sxy += dt * (v - x_mean);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    for (i, v) in x.iter_mut().enumerate() {
        *v -= x_mean + slope * (i as f64 - t_mean);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    /// Amplitude of the `f` component by least-squares projection.
    fn tone_amplitude(x: &[f64], f: f64, fs: f64, t0: usize) -> f64 {
        let (mut c, mut s) = (0.0, 0.0);
        for (i, v) in x.iter().enumerate() {
            let ph = 2.0 * PI * f * (i + t0) as f64 / fs;
            c += v * ph.cos();
            s += v * ph.sin();
        }
        2.0 * (c * c + s * s).sqrt() / x.len() as f64
    }

    #[test]
    fn analytic_signal_of_cosine_is_complex_exponential() {
        let n = 1024;
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * 37.0 * i as f64 / n as f64).cos()).collect();
        let z = analytic_signal(&x);
        for (i, c) in z.iter().enumerate() {
            let ph = 2.0 * PI * 37.0 * i as f64 / n as f64;
            assert!((c - Complex64::from_polar(1.0, ph)).norm() < 1e-12);
        }
    }

    #[test]
    fn unmodulated_carrier_gives_zero_phase() {
        let fs = 31.25e6;
        let fh = fs / 8.0;
        let x: Vec<f64> = (0..1 << 16).map(|i| 0.4 * carrier_phase(i, fh, fs).cos()).collect();
        let p = analytic_phase(&x, fs, fh, 0.02, Channel::A).unwrap();
        assert!(rms(&p.samples) < 1e-9, "rms {}", rms(&p.samples));
    }

    #[test]
    fn detuned_carrier_absorbed_by_detrend() {
        let fs = 31.25e6;
        let fh = 8e6;
        let n = 4_000_000;
        let x: Vec<f64> = (0..n).map(|i| carrier_phase(i, fh + 100.0, fs).cos()).collect();
        let p = analytic_phase(&x, fs, fh, 0.02, Channel::A).unwrap();
        assert!(rms(&p.samples) < 1e-6, "rms {}", rms(&p.samples));
    }

    #[test]
    fn trim_accounting() {
        let fs = 1e6;
        for n in [4096usize, 5001, 10_000] {
            let x: Vec<f64> = (0..n).map(|i| carrier_phase(i, 1.1e5, fs).cos()).collect();
            let p = analytic_phase(&x, fs, 1.1e5, 0.02, Channel::B).unwrap();
            let expected = (n as f64 * (1.0 - 0.04)).floor();
            assert!((p.len() as f64 - expected).abs() <= 1.0);
            assert_eq!(p.source_channel, Channel::B);
        }
    }

    #[test]
    fn scale_invariance() {
        let fs = 1e6;
        let x: Vec<f64> = (0..8192)
            .map(|i| {
                let t = i as f64 / fs;
                (2.0 * PI * 1.3e5 * t + 0.05 * (2.0 * PI * 3e3 * t).sin()).cos()
            })
            .collect();
        let a = analytic_phase(&x, fs, 1.3e5, 0.02, Channel::A).unwrap();
        for scale in [1e-3, 0.37, 42.0] {
            let y: Vec<f64> = x.iter().map(|v| v * scale).collect();
            let b = analytic_phase(&y, fs, 1.3e5, 0.02, Channel::A).unwrap();
            let worst = a
                .samples
                .iter()
                .zip(&b.samples)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            assert!(worst < 1e-12, "scale {scale}: {worst}");
        }
    }

    #[test]
    fn small_modulation_is_linear() {
        let fs = 31.25e6;
        let fh = 8e6;
        let fm = 10e3;
        let n = 1 << 18;
        let recovered: Vec<f64> = [0.01, 0.03, 0.1]
            .iter()
            .map(|&beta| {
                let x: Vec<f64> = (0..n)
                    .map(|i| {
                        let m = beta * (2.0 * PI * fm * i as f64 / fs).sin();
                        (carrier_phase(i, fh, fs) + m).cos()
                    })
                    .collect();
                let p = analytic_phase(&x, fs, fh, 0.02, Channel::A).unwrap();
                tone_amplitude(&p.samples, fm, fs, p.start_index) / beta
            })
            .collect();
        for r in &recovered {
            assert_relative_eq!(*r, recovered[0], max_relative = 0.01);
            assert_relative_eq!(*r, 1.0, max_relative = 0.01);
        }
    }

    #[test]
    fn noise_only_channel_fails_to_unwrap() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..8192).map(|_| rng.random::<f64>() - 0.5).collect();
        assert!(matches!(
            analytic_phase(&x, 1e6, 1e5, 0.02, Channel::A),
            Err(CoshError::Demodulation(_))
        ));
        let zeros = vec![0.0; 8192];
        assert!(matches!(
            analytic_phase(&zeros, 1e6, 1e5, 0.02, Channel::A),
            Err(CoshError::Demodulation(_))
        ));
    }

    #[test]
    fn rejects_bad_arguments() {
        let x = vec![1.0; 8192];
        assert!(analytic_phase(&x[..100], 1e6, 1e5, 0.02, Channel::A).is_err());
        assert!(analytic_phase(&x, 1e6, 6e5, 0.02, Channel::A).is_err());
        assert!(analytic_phase(&x, 1e6, 1e5, 0.3, Channel::A).is_err());
    }
}
