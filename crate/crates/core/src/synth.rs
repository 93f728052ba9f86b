//! Synthetic two-channel beat-note traces.
//!
//! The chain is: oscillator phase → delay-line interferometer → balanced
//! detector pair (dark noise, intensity noise, RF pickup) → digitizer
//! (timing jitter, quantization, clipping). Every random stream is derived
//! from the scenario seed, so a scenario always produces the same record.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::config::{DetectorConfig, DigitizerConfig, InterferometerConfig, AUX_EXPONENTS};
use crate::error::{CoshError, Result};
use crate::model::{OscillatorNoiseModel, ParametricPsd};
use crate::trace::{TraceMeta, TraceRecord};

/// Minimum length accepted by [`sample_oscillator_phase`].
pub const MIN_PHASE_SAMPLES: usize = 1 << 12;

/// Clipped-sample fraction above which a warning is recorded.
pub const CLIP_WARN_FRACTION: f64 = 1e-3;
/// Clipped-sample fraction above which the record is rejected.
pub const CLIP_ERROR_FRACTION: f64 = 0.05;

/// Largest accepted relative difference between requested and realised delay.
pub const MAX_DELAY_ERROR: f64 = 0.1;

// Independent random streams derived from one seed.
const STREAM_LASER: u64 = 0;
const STREAM_CARRIER: u64 = 1;
const STREAM_PATH: u64 = 2;
const STREAM_RIN: u64 = 3;
const STREAM_DARK: [u64; 2] = [4, 5];
const STREAM_JITTER: [u64; 2] = [6, 7];

/// Additive RF pickup. The tone sits at `heterodyne + offset_hz`, so after
/// demodulation it shows up as a line at `|offset_hz|` in both channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferenceTone {
    pub offset_hz: f64,
    pub amplitude_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationScenario {
    pub oscillator: OscillatorNoiseModel,
    pub interferometer: InterferometerConfig,
    pub detector_a: DetectorConfig,
    pub detector_b: DetectorConfig,
    pub digitizer: DigitizerConfig,
    /// Common relative intensity noise (1/Hz).
    #[serde(default)]
    pub rin: Option<ParametricPsd>,
    #[serde(default)]
    pub interference_tones: Vec<InterferenceTone>,
    /// Beat amplitude at each balanced output before noise, V.
    pub optical_amplitude_v: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Draw independent timing jitter for the two digitizer channels.
    #[serde(default)]
    pub independent_jitter: bool,
    #[serde(default)]
    pub label: String,
}

impl Default for SimulationScenario {
    /// Operating point of the reference setup: 312.5 MS/s, 40·10⁶ samples,
    /// 10 bit, 80 MHz heterodyne, 5.435 µs delay, 0.5 V beat amplitude.
    fn default() -> Self {
        SimulationScenario {
            oscillator: OscillatorNoiseModel(ParametricPsd::new().with_power_law(0, 1.0)),
            interferometer: InterferometerConfig::default(),
            detector_a: DetectorConfig::default(),
            detector_b: DetectorConfig::default(),
            digitizer: DigitizerConfig::default(),
            rin: None,
            interference_tones: Vec::new(),
            optical_amplitude_v: 0.5,
            n_samples: 40_000_000,
            seed: 0,
            independent_jitter: false,
            label: String::new(),
        }
    }
}

impl SimulationScenario {
    pub fn detectors(&self) -> [&DetectorConfig; 2] {
        [&self.detector_a, &self.detector_b]
    }

    /// Delay in whole samples, `round(τ·fs)`.
    pub fn delay_samples(&self) -> usize {
        (self.interferometer.delay_s * self.digitizer.sample_rate_hz).round() as usize
    }

    /// Delay actually realised by the integer sample shift.
    pub fn effective_delay_s(&self) -> f64 {
        self.delay_samples() as f64 / self.digitizer.sample_rate_hz
    }

    pub fn validate(&self) -> Result<()> {
        self.oscillator.validate()?;
        self.interferometer.validate()?;
        self.detector_a.validate()?;
        self.detector_b.validate()?;
        self.digitizer.validate()?;
        if let Some(r) = &self.rin {
            r.validate(AUX_EXPONENTS)?;
        }
        let fs = self.digitizer.sample_rate_hz;
        let fh = self.interferometer.heterodyne_hz;
        if fh >= 0.5 * fs {
            return Err(CoshError::config(format!(
                "heterodyne {fh} Hz not below Nyquist {} Hz",
                0.5 * fs
            )));
        }
        check_delay(self.interferometer.delay_s, fs)?;
        if !(self.optical_amplitude_v > 0.0 && self.optical_amplitude_v.is_finite()) {
            return Err(CoshError::config("optical_amplitude_v must be > 0"));
        }
        if self.n_samples < MIN_PHASE_SAMPLES {
            return Err(CoshError::config(format!(
                "n_samples must be at least {MIN_PHASE_SAMPLES}"
            )));
        }
        if self.n_samples as f64 <= 10.0 * fs / fh {
            return Err(CoshError::config(
                "record shorter than ten heterodyne periods",
            ));
        }
        for t in &self.interference_tones {
            let f = fh + t.offset_hz;
            if !(f > 0.0 && f < 0.5 * fs) {
                return Err(CoshError::config(format!(
                    "interference tone at {f} Hz outside (0, Nyquist)"
                )));
            }
            if !(t.amplitude_v >= 0.0 && t.amplitude_v.is_finite()) {
                return Err(CoshError::config("tone amplitude must be >= 0"));
            }
        }
        Ok(())
    }
}

fn check_delay(delay_s: f64, sample_rate_hz: f64) -> Result<usize> {
    let d = (delay_s * sample_rate_hz).round();
    if d < 1.0 {
        return Err(CoshError::config(format!(
            "delay {delay_s} s is shorter than one sample at {sample_rate_hz} Hz"
        )));
    }
    let eff = d / sample_rate_hz;
    if ((eff - delay_s) / delay_s).abs() > MAX_DELAY_ERROR {
        return Err(CoshError::config(format!(
            "sample rate too low: delay {delay_s} s realised as {eff} s"
        )));
    }
    Ok(d as usize)
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Carrier phase `2π·f·i/fs`, reduced modulo 2π.
pub(crate) fn carrier_phase(i: usize, freq_hz: f64, sample_rate_hz: f64) -> f64 {
    2.0 * PI * (i as f64 * (freq_hz / sample_rate_hz)).fract()
}

/// Real Gaussian series whose one-sided periodogram has expectation
/// `psd(f_k)` at every bin `f_k = k·fs/n`, `0 < f_k < fs/2`.
///
/// Coefficients are drawn per positive bin, mirrored to Hermitian symmetry and
/// inverse transformed; DC and Nyquist are left at zero.
fn colored_noise<F>(psd: F, sample_rate_hz: f64, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>>
where
    F: Fn(f64) -> f64,
{
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    // E|X_k|² = S·fs·n/2 gives E[2|X_k|²/(fs·n)] = S
    let scale = sample_rate_hz * n as f64 / 4.0;
    let df = sample_rate_hz / n as f64;
    for k in 1..n.div_ceil(2) {
        let s = psd(k as f64 * df);
        if !(s >= 0.0 && s.is_finite()) {
            return Err(CoshError::domain(format!(
                "noise PSD evaluates to {s} at {} Hz",
                k as f64 * df
            )));
        }
        let sigma = (s * scale).sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let x = Complex64::new(sigma * re, sigma * im);
        spec[k] = x;
        spec[n - k] = x.conj();
    }
    FftPlanner::<f64>::new().plan_fft_inverse(n).process(&mut spec);
    let norm = 1.0 / n as f64;
    Ok(spec.into_iter().map(|c| c.re * norm).collect())
}

/// Laser phase `φ(t)` (rad) with one-sided PSD `S_ν(f)/f²`.
///
/// `n` must be even and at least [`MIN_PHASE_SAMPLES`].
pub fn sample_oscillator_phase(
    model: &OscillatorNoiseModel,
    sample_rate_hz: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n < MIN_PHASE_SAMPLES || n % 2 != 0 {
        return Err(CoshError::domain(format!(
            "phase series length {n} must be even and >= {MIN_PHASE_SAMPLES}"
        )));
    }
    if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
        return Err(CoshError::domain("sample rate must be > 0"));
    }
    model.validate()?;
    let shape = model.shape();
    let mut rng = rng_for(seed, STREAM_LASER);
    colored_noise(
        |f| shape.eval_positive(f) / (f * f),
        sample_rate_hz,
        n,
        &mut rng,
    )
}

/// Phase (or relative amplitude) noise drawn directly from a shape in
/// rad²/Hz (or 1/Hz). Any length `n >= 2` is accepted.
pub fn sample_shaped_noise(
    shape: &ParametricPsd,
    sample_rate_hz: f64,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(CoshError::domain("noise series needs at least two samples"));
    }
    let mut rng = rng_for(seed, stream);
    colored_noise(|f| shape.eval_positive(f), sample_rate_hz, n, &mut rng)
}

/// Noise-free beat at the balanced outputs.
///
/// Both detector pairs see the same interferometer phase, so a single
/// argument series describes both channels.
#[derive(Debug, Clone, PartialEq)]
pub struct IdealBeat {
    /// Total beat phase `2π f_h t + Δφ + ψ_rf + ψ_path`, rad.
    pub argument: Vec<f64>,
    pub amplitude_v: f64,
    pub delay_samples: usize,
    pub delay_eff_s: f64,
    pub sample_rate_hz: f64,
    pub heterodyne_hz: f64,
}

impl IdealBeat {
    pub fn len(&self) -> usize {
        self.argument.len()
    }

    pub fn is_empty(&self) -> bool {
        self.argument.is_empty()
    }

    /// Voltage of one balanced output.
    pub fn voltage(&self) -> Vec<f64> {
        self.argument
            .iter()
            .map(|a| self.amplitude_v * a.cos())
            .collect()
    }

    /// Both balanced outputs (identical for an ideal beat).
    pub fn channels(&self) -> [Vec<f64>; 2] {
        let v = self.voltage();
        [v.clone(), v]
    }
}

/// Delay-line interferometer acting on a laser phase series.
///
/// With `d = round(τ·fs)` the output has `phi.len() − d` samples,
/// `v(t_i) = A·V·cos(2π f_h t_i + φ_{i+d} − φ_i + ψ_rf,i + ψ_path,i)`
/// where `V` is the interferometer visibility. `seed` drives the RF-chain and
/// path noise streams.
pub fn interferometer_beat(
    phi: &[f64],
    cfg: &InterferometerConfig,
    sample_rate_hz: f64,
    amplitude_v: f64,
    seed: u64,
) -> Result<IdealBeat> {
    cfg.validate()?;
    let d = check_delay(cfg.delay_s, sample_rate_hz)?;
    beat_with_delay(phi, cfg, sample_rate_hz, amplitude_v, seed, d, true)
}

fn beat_with_delay(
    phi: &[f64],
    cfg: &InterferometerConfig,
    sample_rate_hz: f64,
    amplitude_v: f64,
    seed: u64,
    d: usize,
    with_path_noise: bool,
) -> Result<IdealBeat> {
    if phi.len() <= d + 1 {
        return Err(CoshError::domain(format!(
            "phase series of {} samples too short for a {d}-sample delay",
            phi.len()
        )));
    }
    let n = phi.len() - d;
    let fh = cfg.heterodyne_hz;
    let mut argument: Vec<f64> = (0..n)
        .map(|i| carrier_phase(i, fh, sample_rate_hz) + (phi[i + d] - phi[i]))
        .collect();
    let extra = [
        (cfg.carrier_phase_noise.as_ref(), STREAM_CARRIER, true),
        (cfg.path_noise.as_ref(), STREAM_PATH, with_path_noise),
    ];
    for (shape, stream, enabled) in extra {
        if let Some(shape) = shape.filter(|s| enabled && !s.is_zero()) {
            let psi = sample_shaped_noise(shape, sample_rate_hz, n, seed, stream)?;
            for (a, p) in argument.iter_mut().zip(psi) {
                *a += p;
            }
        }
    }
    Ok(IdealBeat {
        argument,
        amplitude_v: amplitude_v * cfg.visibility(),
        delay_samples: d,
        delay_eff_s: d as f64 / sample_rate_hz,
        sample_rate_hz,
        heterodyne_hz: fh,
    })
}

/// White Gaussian noise of one-sided density `density` (unit/√Hz), passed
/// through a first-order low-pass with -3 dB point `bandwidth_hz`.
pub(crate) fn lowpassed_white(
    density: f64,
    bandwidth_hz: f64,
    sample_rate_hz: f64,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    if density == 0.0 {
        return vec![0.0; n];
    }
    let sigma = density * (0.5 * sample_rate_hz).sqrt();
    let alpha = 1.0 - (-2.0 * PI * bandwidth_hz / sample_rate_hz).exp();
    // start in the stationary state
    let mut y = sigma * (alpha / (2.0 - alpha)).sqrt() * rng.sample::<f64, _>(StandardNormal);
    (0..n)
        .map(|_| {
            let x = sigma * rng.sample::<f64, _>(StandardNormal);
            y += alpha * (x - y);
            y
        })
        .collect()
}

struct Quantized {
    samples: Vec<f64>,
    clipped: usize,
}

fn quantize(v: Vec<f64>, digitizer: &DigitizerConfig) -> Quantized {
    let q = digitizer.quantization_step();
    let top = 2f64.powi(digitizer.bits as i32 - 1);
    let (lo, hi) = (-top, top - 1.0);
    let mut clipped = 0;
    let samples = v
        .into_iter()
        .map(|x| {
            let k = (x / q).round();
            let kc = k.clamp(lo, hi);
            if kc != k {
                clipped += 1;
            }
            // `+ 0.0` folds a negative zero onto the zero code
            kc * q + 0.0
        })
        .collect();
    Quantized { samples, clipped }
}

/// Adds detector, intensity-noise, pickup and digitizer effects to an ideal
/// beat and quantizes both channels.
///
/// Per channel: jittered carrier `cos(arg + 2π f_h j)`, common intensity
/// envelope `1 + ε·10^(-CMRR/20)`, pickup tones, low-passed dark noise of
/// density `responsivity × NEP`, then quantization with clipping.
pub fn apply_detector_and_digitizer(beat: &IdealBeat, scenario: &SimulationScenario) -> Result<TraceRecord> {
    apply_chain(Some(beat), beat.len(), beat.delay_eff_s, scenario)
}

fn apply_chain(
    beat: Option<&IdealBeat>,
    n: usize,
    delay_eff_s: f64,
    scenario: &SimulationScenario,
) -> Result<TraceRecord> {
    let dig = &scenario.digitizer;
    let fs = dig.sample_rate_hz;
    let fh = scenario.interferometer.heterodyne_hz;
    let seed = scenario.seed;

    let epsilon = match (&scenario.rin, beat) {
        (Some(rin), Some(_)) if !rin.is_zero() => {
            Some(sample_shaped_noise(rin, fs, n, seed, STREAM_RIN)?)
        }
        _ => None,
    };
    let jitter_scale = 2.0 * PI * fh * dig.jitter_rms_s;
    let jitter_streams = if scenario.independent_jitter {
        STREAM_JITTER
    } else {
        [STREAM_JITTER[0]; 2]
    };

    let mut channels: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut clipped = 0;
    for (c, det) in scenario.detectors().into_iter().enumerate() {
        let mut v = vec![0.0; n];
        if let Some(beat) = beat {
            if beat.len() != n {
                return Err(CoshError::usage("beat length mismatch"));
            }
            let mut jrng = rng_for(seed, jitter_streams[c]);
            for (x, a) in v.iter_mut().zip(&beat.argument) {
                let j = if jitter_scale > 0.0 {
                    jitter_scale * jrng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                *x = beat.amplitude_v * (a + j).cos();
            }
            if let Some(eps) = &epsilon {
                let att = det.rin_attenuation();
                for (x, e) in v.iter_mut().zip(eps) {
                    *x *= 1.0 + att * e;
                }
            }
        }
        for tone in &scenario.interference_tones {
            let f = fh + tone.offset_hz;
            for (i, x) in v.iter_mut().enumerate() {
                *x += tone.amplitude_v * carrier_phase(i, f, fs).cos();
            }
        }
        let mut drng = rng_for(seed, STREAM_DARK[c]);
        let dark = lowpassed_white(det.dark_density(), det.bandwidth_hz, fs, n, &mut drng);
        for (x, d) in v.iter_mut().zip(dark) {
            *x += d;
        }
        let q = quantize(v, dig);
        clipped += q.clipped;
        channels[c] = q.samples;
    }

    let clip_fraction = clipped as f64 / (2 * n).max(1) as f64;
    if clip_fraction > CLIP_ERROR_FRACTION {
        return Err(CoshError::config(format!(
            "{:.2}% of samples clipped; increase full_scale_v",
            100.0 * clip_fraction
        )));
    }
    let mut meta = TraceMeta::new(fs, dig.bits, dig.full_scale_v, fh, delay_eff_s);
    meta.seed = seed;
    meta.label = scenario.label.clone();
    meta.clip_fraction = clip_fraction;
    if clip_fraction > CLIP_WARN_FRACTION {
        meta.warnings.push(format!(
            "{:.3}% of samples clipped",
            100.0 * clip_fraction
        ));
    }
    let [a, b] = channels;
    TraceRecord::new(meta, a, b)
}

/// Runs the full chain for a scenario.
pub fn simulate(scenario: &SimulationScenario) -> Result<TraceRecord> {
    scenario.validate()?;
    let d = scenario.delay_samples();
    let beat = laser_beat(scenario, d, true)?;
    apply_detector_and_digitizer(&beat, scenario)
}

/// Beat for an interferometer with both arms of equal length: the laser
/// phase cancels exactly and no delay-line pickup is present. The record's
/// metadata carries the nominal effective delay for later compensation.
pub fn simulate_equal_delay(scenario: &SimulationScenario) -> Result<TraceRecord> {
    scenario.validate()?;
    let n = scenario.n_samples;
    let phi = vec![0.0; n];
    let mut beat = beat_with_delay(
        &phi,
        &scenario.interferometer,
        scenario.digitizer.sample_rate_hz,
        scenario.optical_amplitude_v,
        scenario.seed,
        0,
        false,
    )?;
    beat.delay_eff_s = scenario.effective_delay_s();
    apply_chain(Some(&beat), n, beat.delay_eff_s, scenario)
}

/// Detector outputs with no incident light: dark noise and RF pickup only.
pub fn simulate_dark(scenario: &SimulationScenario) -> Result<TraceRecord> {
    scenario.validate()?;
    apply_chain(None, scenario.n_samples, scenario.effective_delay_s(), scenario)
}

fn laser_beat(scenario: &SimulationScenario, d: usize, with_path_noise: bool) -> Result<IdealBeat> {
    let fs = scenario.digitizer.sample_rate_hz;
    let n = scenario.n_samples;
    let m = (n + d).next_multiple_of(2);
    let mut phi = sample_oscillator_phase(&scenario.oscillator, fs, m, scenario.seed)?;
    phi.truncate(n + d);
    beat_with_delay(
        &phi,
        &scenario.interferometer,
        fs,
        scenario.optical_amplitude_v,
        scenario.seed,
        d,
        with_path_noise,
    )
}
