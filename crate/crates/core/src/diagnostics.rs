//! Noise-floor procedures and spectrum post-processing diagnostics.

use std::fmt::Write as _;

use crate::error::{CoshError, Result};
use crate::psd::{BinFlag, Psd, PsdBin, PsdKind, PsdMeta};
use crate::spectral::{analyze, analyze_channels, AnalysisParams};
use crate::synth::{carrier_phase, simulate_equal_delay, SimulationScenario};
use crate::trace::TraceRecord;

/// Local maxima must exceed the median of their 5-bin neighbourhood by this
/// factor (6 dB) to count as spurs.
pub const SPUR_PROMINENCE: f64 = 3.981_071_705_534_972;

pub const DEFAULT_EXCLUSION_HALFWIDTH: usize = 3;

/// A dark floor whose carrier is less than this multiple of the dark RMS
/// is flagged as unreliable.
pub const MIN_CARRIER_TO_DARK: f64 = 10.0;

/// Minimum relative difference between the two delays of a dual-delay merge.
pub const MIN_DELAY_CONTRAST: f64 = 0.1;

/// Chain floor from a dark record: an ideal carrier `A·sin(2π f_h t)` is
/// added to each channel and the sum goes through the regular pipeline,
/// processing gain included.
pub fn dark_floor(dark_trace: &TraceRecord, amplitude_v: f64, params: &AnalysisParams) -> Result<Psd> {
    dark_trace.validate()?;
    if !(amplitude_v > 0.0 && amplitude_v.is_finite()) {
        return Err(CoshError::domain("carrier amplitude must be > 0"));
    }
    let m = &dark_trace.meta;
    let (fs, fh) = (m.sample_rate_hz, m.heterodyne_hz);
    let carrier: Vec<f64> = (0..dark_trace.len())
        .map(|i| amplitude_v * carrier_phase(i, fh, fs).sin())
        .collect();
    let mut notes = Vec::new();
    let mut channels = Vec::with_capacity(2);
    for (c, ch) in dark_trace.channels.iter().enumerate() {
        let rms = (ch.iter().map(|v| v * v).sum::<f64>() / ch.len().max(1) as f64).sqrt();
        if amplitude_v <= MIN_CARRIER_TO_DARK * rms {
            notes.push(format!(
                "warning: carrier {amplitude_v} V is within {MIN_CARRIER_TO_DARK}x of channel {c} dark RMS {rms:.3e} V; floor estimate unreliable"
            ));
        }
        channels.push(ch.iter().zip(&carrier).map(|(d, s)| d + s).collect::<Vec<f64>>());
    }
    let mut psd = analyze_channels(&channels[0], &channels[1], fs, fh, params)?;
    psd.meta.notes.extend(notes);
    Ok(psd)
}

/// Chain floor from an equal-arm interferometer: the laser phase cancels and
/// the record is analysed with the delay in `params` (normally the nominal
/// delay of the scenario).
pub fn equal_delay_floor(scenario: &SimulationScenario, params: &AnalysisParams) -> Result<Psd> {
    let trace = simulate_equal_delay(scenario)?;
    analyze(&trace, params)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpurPeak {
    pub freq_hz: f64,
    /// Ratio of the bin value to its 5-bin median.
    pub prominence: f64,
    /// Local grid spacing.
    pub spacing_hz: f64,
}

/// Flagged spur bins plus local maxima at least 6 dB above their 5-bin
/// median.
pub fn find_spur_peaks(psd: &Psd) -> Vec<SpurPeak> {
    let v = psd.values();
    let n = v.len();
    let mut peaks = Vec::new();
    for i in 0..n {
        let lo = i.saturating_sub(2);
        let hi = (i + 2).min(n - 1);
        let mut window: Vec<f64> = v[lo..=hi].to_vec();
        window.sort_by(f64::total_cmp);
        let median = window[window.len() / 2];
        let prominence = if median > 0.0 { v[i] / median } else { f64::INFINITY };
        let flagged = psd.bins[i].flag == BinFlag::Spur;
        let local_max = i > 0 && i + 1 < n && v[i] > v[i - 1] && v[i] >= v[i + 1];
        if flagged || (local_max && prominence >= SPUR_PROMINENCE) {
            peaks.push(SpurPeak {
                freq_hz: psd.bins[i].freq_hz,
                prominence,
                spacing_hz: psd.bin_spacing(i),
            });
        }
    }
    peaks
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsrEstimate {
    pub fsr_hz: f64,
    pub delay_s: f64,
    /// Peaks assigned to the comb.
    pub n_peaks: usize,
}

struct CombFit {
    fsr: f64,
    hits: Vec<(f64, f64)>,
    score: f64,
}

fn comb_hits(peaks: &[SpurPeak], fsr: f64) -> Vec<(f64, f64)> {
    // closest peak per harmonic
    let mut best: Vec<(i64, f64, f64)> = Vec::new();
    for p in peaks {
        let k = (p.freq_hz / fsr).round();
        if k < 1.0 {
            continue;
        }
        let err = (p.freq_hz - k * fsr).abs();
        if err > 1.5 * p.spacing_hz {
            continue;
        }
        let k = k as i64;
        match best.iter_mut().find(|(kk, _, _)| *kk == k) {
            Some(slot) if slot.2 > err => *slot = (k, p.freq_hz, err),
            Some(_) => {}
            None => best.push((k, p.freq_hz, err)),
        }
    }
    best.into_iter().map(|(k, f, _)| (k as f64, f)).collect()
}

fn fit_comb(peaks: &[SpurPeak], start: f64) -> Option<CombFit> {
    let mut fsr = start;
    let mut hits = comb_hits(peaks, fsr);
    for _ in 0..4 {
        if hits.is_empty() {
            return None;
        }
        let num: f64 = hits.iter().map(|(k, f)| k * f).sum();
        let den: f64 = hits.iter().map(|(k, _)| k * k).sum();
        fsr = num / den;
        hits = comb_hits(peaks, fsr);
    }
    let kmin = hits.iter().map(|h| h.0).fold(f64::INFINITY, f64::min);
    let kmax = hits.iter().map(|h| h.0).fold(0.0, f64::max);
    let predicted = kmax - kmin + 1.0;
    let score = (hits.len() as f64).powi(2) / predicted;
    Some(CombFit { fsr, hits, score })
}

const MAX_HARMONIC: usize = 64;

/// Estimates the interferometer FSR (and delay) from the spur comb.
///
/// Candidate spacings come from the most prominent peaks; each is refined
/// by least squares over the harmonics it explains and scored by
/// `hits² / harmonics spanned`, which favours complete combs over
/// sub-harmonics of the true spacing.
pub fn estimate_fsr(psd: &Psd) -> Result<FsrEstimate> {
    if psd.kind != PsdKind::Frequency {
        return Err(CoshError::usage("FSR estimation expects a frequency PSD"));
    }
    let peaks = find_spur_peaks(psd);
    if peaks.len() < 3 {
        return Err(CoshError::Estimation(format!(
            "found {} spur peak(s), need at least 3",
            peaks.len()
        )));
    }
    let mut top = peaks.clone();
    top.sort_by(|a, b| b.prominence.total_cmp(&a.prominence));
    top.truncate(12);
    let mut candidates = Vec::new();
    // the strongest spurs may sit at high harmonics, so try sub-multiples of
    // peak positions and of their pairwise spacings
    for (i, p) in top.iter().enumerate() {
        for k in 1..=MAX_HARMONIC {
            candidates.push(p.freq_hz / k as f64);
        }
        for q in &top[i + 1..] {
            for k in 1..=8 {
                candidates.push((p.freq_hz - q.freq_hz).abs() / k as f64);
            }
        }
    }
    let min_spacing = peaks.iter().map(|p| p.spacing_hz).fold(f64::INFINITY, f64::min);
    let mut best: Option<CombFit> = None;
    for c in candidates {
        if c < 4.0 * min_spacing {
            continue;
        }
        if let Some(fit) = fit_comb(&peaks, c) {
            let better = match &best {
                None => true,
                Some(b) => fit.score > b.score + 1e-9 || (fit.score >= b.score - 1e-9 && fit.fsr > b.fsr * 1.01),
            };
            if better {
                best = Some(fit);
            }
        }
    }
    match best {
        Some(fit) if fit.hits.len() >= 3 => Ok(FsrEstimate {
            fsr_hz: fit.fsr,
            delay_s: 1.0 / fit.fsr,
            n_peaks: fit.hits.len(),
        }),
        Some(fit) => Err(CoshError::Estimation(format!(
            "only {} peaks fit a common spacing, need at least 3",
            fit.hits.len()
        ))),
        None => Err(CoshError::Estimation("no consistent spur comb".into())),
    }
}

fn in_null_zone(f: f64, delay_s: f64, spacing: f64, halfwidth: usize) -> bool {
    let k = (f * delay_s).round();
    if k < 1.0 {
        return false;
    }
    (f - k / delay_s).abs() <= (halfwidth as f64 + 0.5) * spacing
}

/// Replaces the spur zones of `psd_a` with values interpolated from a
/// spectrum taken with a different delay.
///
/// Bins within `exclusion_halfwidth_bins` of a null `k/delay_a` (or flagged
/// as spurs) are substituted from `psd_b` by log-log interpolation. Where
/// `psd_b` has no coverage or is itself inside one of its own spur zones the
/// bin keeps its value and is flagged [`BinFlag::Unresolvable`]. All other
/// bins pass through unchanged.
pub fn merge_dual_delay(
    psd_a: &Psd,
    delay_a: f64,
    psd_b: &Psd,
    delay_b: f64,
    exclusion_halfwidth_bins: usize,
) -> Result<Psd> {
    if !(delay_a > 0.0 && delay_b > 0.0) {
        return Err(CoshError::domain("delays must be > 0"));
    }
    if (delay_a - delay_b).abs() < MIN_DELAY_CONTRAST * delay_a.max(delay_b) {
        return Err(CoshError::usage(format!(
            "delays {delay_a} s and {delay_b} s differ by less than {}%: spur combs coincide",
            100.0 * MIN_DELAY_CONTRAST
        )));
    }
    if psd_a.kind != psd_b.kind {
        return Err(CoshError::usage("cannot merge spectra of different kinds"));
    }
    let (a_lo, a_hi) = psd_a.support().ok_or_else(|| CoshError::usage("empty spectrum"))?;
    let (b_lo, b_hi) = psd_b.support().ok_or_else(|| CoshError::usage("empty spectrum"))?;
    if a_hi < b_lo || b_hi < a_lo {
        return Err(CoshError::usage("spectra do not overlap in frequency"));
    }

    let b_spacing = |f: f64| -> f64 {
        let j = psd_b.bins.partition_point(|b| b.freq_hz < f).min(psd_b.len() - 1);
        psd_b.bin_spacing(j)
    };
    let mut substituted = 0;
    let mut unresolvable = 0;
    let bins = psd_a
        .bins
        .iter()
        .enumerate()
        .map(|(i, bin)| {
            let f = bin.freq_hz;
            let zone = bin.flag == BinFlag::Spur
                || in_null_zone(f, delay_a, psd_a.bin_spacing(i), exclusion_halfwidth_bins);
            if !zone {
                return *bin;
            }
            let replacement = psd_b
                .interpolate(f)
                .filter(|_| !in_null_zone(f, delay_b, b_spacing(f), exclusion_halfwidth_bins));
            match replacement {
                Some(v) => {
                    substituted += 1;
                    PsdBin {
                        value: v,
                        flag: BinFlag::Substituted,
                        ..*bin
                    }
                }
                None => {
                    unresolvable += 1;
                    PsdBin {
                        flag: BinFlag::Unresolvable,
                        ..*bin
                    }
                }
            }
        })
        .collect();
    let mut out = Psd::new(psd_a.kind, bins)?;
    out.meta = psd_a.meta.clone();
    out.meta.notes.push(format!(
        "dual-delay merge with {delay_b} s: {substituted} bins substituted, {unresolvable} unresolvable"
    ));
    Ok(out)
}

/// Frequency noise equivalent of intensity noise, `S_ν(f) = f²·α·RIN(f)`.
pub fn rin_to_frequency_noise(rin: &Psd, alpha_rad2: f64) -> Result<Psd> {
    if rin.kind != PsdKind::Rin {
        return Err(CoshError::usage(format!("expected a RIN PSD, got {}", rin.kind)));
    }
    if !(alpha_rad2 >= 0.0 && alpha_rad2.is_finite()) {
        return Err(CoshError::domain("alpha must be >= 0"));
    }
    let bins = rin
        .bins
        .iter()
        .map(|b| PsdBin {
            value: b.freq_hz * b.freq_hz * alpha_rad2 * b.value,
            ..*b
        })
        .collect();
    let mut out = Psd::new(PsdKind::Frequency, bins)?;
    out.meta = rin.meta.clone();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseFloorReport {
    /// Components resampled onto the union grid.
    pub components: Vec<(String, Psd)>,
    pub total: Psd,
    /// Label of the largest component per bin of `total`.
    pub dominant: Vec<String>,
}

impl NoiseFloorReport {
    /// Plain-text table of frequency ranges and their dominant component.
    pub fn dominance_table(&self) -> String {
        let mut out = String::from("# f_lo_hz\tf_hi_hz\tdominant\n");
        let f = self.total.freqs();
        let mut start = 0;
        for i in 1..=f.len() {
            if i == f.len() || self.dominant[i] != self.dominant[start] {
                let _ = writeln!(out, "{:.9e}\t{:.9e}\t{}", f[start], f[i - 1], self.dominant[start]);
                start = i;
            }
        }
        out
    }

    /// Frequencies at which the dominant component changes, with the labels
    /// before and after.
    pub fn crossovers(&self) -> Vec<(f64, String, String)> {
        let f = self.total.freqs();
        self.dominant
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] != w[1])
            .map(|(i, w)| ((f[i] * f[i + 1]).sqrt(), w[0].clone(), w[1].clone()))
            .collect()
    }
}

/// Sums frequency-noise contributions on the union of their grids.
///
/// Each component is log-log interpolated within its own support and taken
/// as zero outside it. The per-bin sum runs in ascending order of value so
/// the total does not depend on component order.
pub fn compose_floor(components: &[(String, Psd)]) -> Result<NoiseFloorReport> {
    if components.is_empty() {
        return Err(CoshError::usage("no noise-floor components"));
    }
    for (label, p) in components {
        if p.kind != PsdKind::Frequency {
            return Err(CoshError::usage(format!(
                "component '{label}' is a {} PSD, expected frequency",
                p.kind
            )));
        }
    }
    let mut grid: Vec<f64> = components.iter().flat_map(|(_, p)| p.freqs()).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let resampled: Vec<(String, Vec<f64>)> = components
        .iter()
        .map(|(label, p)| {
            let v = grid.iter().map(|&f| p.interpolate(f).unwrap_or(0.0)).collect();
            (label.clone(), v)
        })
        .collect();

    let mut total = Vec::with_capacity(grid.len());
    let mut dominant = Vec::with_capacity(grid.len());
    for j in 0..grid.len() {
        let mut vals: Vec<f64> = resampled.iter().map(|(_, v)| v[j]).collect();
        vals.sort_by(f64::total_cmp);
        total.push(vals.iter().sum::<f64>());
        let (label, _) = resampled
            .iter()
            .max_by(|(la, va), (lb, vb)| va[j].total_cmp(&vb[j]).then_with(|| lb.cmp(la)))
            .expect("non-empty");
        dominant.push(label.clone());
    }

    let to_psd = |values: &[f64]| -> Result<Psd> {
        let mut p = Psd::from_pairs(PsdKind::Frequency, &grid, values)?;
        p.meta = PsdMeta::default();
        Ok(p)
    };
    let components = resampled
        .iter()
        .map(|(l, v)| Ok((l.clone(), to_psd(v)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(NoiseFloorReport {
        components,
        total: to_psd(&total)?,
        dominant,
    })
}
