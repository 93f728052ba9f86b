//! `cosh`: simulate, analyse and inspect self-heterodyne phase-noise data.
//!
//! Exit status is 0 on success, 1 for invalid invocations and 2 when an
//! input file or computation fails. Diagnostics go to stderr.

mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use cosh_core::diagnostics::{self, DEFAULT_EXCLUSION_HALFWIDTH};
use cosh_core::io::{self, ConfigFile};
use cosh_core::spectral::{self, AnalysisParams};
use cosh_core::{synth, Estimator, Psd, Window};

#[derive(Parser)]
#[command(name = "cosh", version, about = "Self-heterodyne phase-noise toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a two-channel trace from a TOML configuration.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Record detector outputs without light (for `floor`).
        #[arg(long, conflicts_with = "equal_delay")]
        dark: bool,
        /// Use an interferometer with equal arms (laser noise cancels).
        #[arg(long)]
        equal_delay: bool,
    },
    /// Demodulate a trace and estimate its frequency-noise PSD.
    Analyze {
        #[arg(long)]
        trace: PathBuf,
        /// Band-plan TOML file or `builtin:paper`.
        #[arg(long, default_value = "builtin:paper")]
        band_plan: String,
        #[arg(long)]
        out: PathBuf,
        /// cross, single or dual.
        #[arg(long, default_value = "cross")]
        estimator: String,
        #[arg(long)]
        gain_cap: Option<f64>,
        /// Segment taper: rect or hann.
        #[arg(long, default_value = "rect")]
        window: String,
        /// Also write an SVG figure.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Chain noise floor from a dark trace plus an ideal carrier.
    Floor {
        #[arg(long)]
        dark_trace: PathBuf,
        /// Carrier amplitude, V.
        #[arg(long)]
        amplitude: f64,
        #[arg(long, default_value = "builtin:paper")]
        band_plan: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Estimate the interferometer FSR and delay from a spectrum's spurs.
    Fsr {
        #[arg(long)]
        psd: PathBuf,
    },
    /// Fill the spur zones of spectrum A from spectrum B.
    Merge {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        delay_a: f64,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        delay_b: f64,
        #[arg(long, default_value_t = DEFAULT_EXCLUSION_HALFWIDTH)]
        halfwidth: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a RIN spectrum into equivalent frequency noise.
    Rin2freq {
        #[arg(long)]
        rin: PathBuf,
        /// Phase-amplitude coupling, rad².
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sum noise-floor components and report which one dominates.
    Compose {
        /// `label=path`, repeatable.
        #[arg(long = "component", required = true)]
        components: Vec<String>,
        #[arg(long)]
        out_prefix: PathBuf,
    },
    /// Plot one or more spectra on log-log axes (SVG).
    Plot {
        #[arg(long = "psd", required = true)]
        psds: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<cosh_core::CoshError> for Failure {
    fn from(e: cosh_core::CoshError) -> Self {
        Failure::Data(e.into())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn report_notes(psd: &Psd) {
    for n in &psd.meta.notes {
        eprintln!("note: {n}");
    }
}

fn write_outputs(psd: &Psd, out: &Path, plot: Option<&Path>) -> Result<()> {
    io::write_psd(out, psd)?;
    if let Some(p) = plot {
        plot::plot_psds(p, &[(stem(out), psd.clone())])?;
    }
    Ok(())
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn positive(name: &str, v: f64) -> std::result::Result<f64, Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(usage(format!("--{name} must be a positive number, got {v}")))
    }
}

fn run(cmd: Command) -> std::result::Result<(), Failure> {
    match cmd {
        Command::Simulate {
            config,
            out,
            seed,
            dark,
            equal_delay,
        } => {
            let mut cfg = ConfigFile::load(&config)?;
            if let Some(s) = seed {
                cfg.scenario.seed = s;
            }
            let trace = if dark {
                synth::simulate_dark(&cfg.scenario)
            } else if equal_delay {
                synth::simulate_equal_delay(&cfg.scenario)
            } else {
                synth::simulate(&cfg.scenario)
            }
            .context("simulation failed")?;
            for w in &trace.meta.warnings {
                eprintln!("warning: {w}");
            }
            io::write_trace(&out, &trace)?;
        }
        Command::Analyze {
            trace,
            band_plan,
            out,
            estimator,
            gain_cap,
            window,
            plot,
        } => {
            let estimator: Estimator = estimator.parse().map_err(|e: cosh_core::CoshError| usage(e.to_string()))?;
            let window: Window = window.parse().map_err(|e: cosh_core::CoshError| usage(e.to_string()))?;
            if let Some(c) = gain_cap {
                positive("gain-cap", c)?;
            }
            let plan = io::load_band_plan(&band_plan)?;
            let trace = io::read_trace(&trace)?;
            let params = AnalysisParams::for_trace(&trace, plan)
                .with_estimator(estimator)
                .with_window(window)
                .with_gain_cap(gain_cap);
            let psd = spectral::analyze(&trace, &params)?;
            report_notes(&psd);
            write_outputs(&psd, &out, plot.as_deref())?;
        }
        Command::Floor {
            dark_trace,
            amplitude,
            band_plan,
            out,
            plot,
        } => {
            positive("amplitude", amplitude)?;
            let plan = io::load_band_plan(&band_plan)?;
            let trace = io::read_trace(&dark_trace)?;
            let params = AnalysisParams::for_trace(&trace, plan);
            let psd = diagnostics::dark_floor(&trace, amplitude, &params)?;
            report_notes(&psd);
            write_outputs(&psd, &out, plot.as_deref())?;
        }
        Command::Fsr { psd } => {
            let psd = io::read_psd(&psd)?;
            let est = diagnostics::estimate_fsr(&psd)?;
            println!("fsr_hz={:.6e}", est.fsr_hz);
            println!("delay_s={:.6e}", est.delay_s);
            println!("n_peaks={}", est.n_peaks);
        }
        Command::Merge {
            a,
            delay_a,
            b,
            delay_b,
            halfwidth,
            out,
        } => {
            positive("delay-a", delay_a)?;
            positive("delay-b", delay_b)?;
            let pa = io::read_psd(&a)?;
            let pb = io::read_psd(&b)?;
            let merged = diagnostics::merge_dual_delay(&pa, delay_a, &pb, delay_b, halfwidth)?;
            report_notes(&merged);
            io::write_psd(&out, &merged)?;
        }
        Command::Rin2freq { rin, alpha, out } => {
            if !(alpha >= 0.0 && alpha.is_finite()) {
                return Err(usage(format!("--alpha must be >= 0, got {alpha}")));
            }
            let rin = io::read_psd(&rin)?;
            io::write_psd(&out, &diagnostics::rin_to_frequency_noise(&rin, alpha)?)?;
        }
        Command::Compose { components, out_prefix } => {
            let mut parsed = Vec::new();
            for c in &components {
                let (label, path) = c
                    .split_once('=')
                    .filter(|(l, p)| !l.is_empty() && !p.is_empty())
                    .ok_or_else(|| usage(format!("--component expects label=path, got '{c}'")))?;
                if !label.chars().all(|ch| ch.is_ascii_alphanumeric() || "-_.".contains(ch)) {
                    return Err(usage(format!("component label '{label}' must be alphanumeric")));
                }
                parsed.push((label.to_string(), io::read_psd(Path::new(path))?));
            }
            let report = diagnostics::compose_floor(&parsed)?;
            let prefixed = |suffix: &str| {
                let mut s = out_prefix.clone().into_os_string();
                s.push(format!("_{suffix}"));
                PathBuf::from(s)
            };
            for (label, psd) in &report.components {
                io::write_psd(&prefixed(&format!("{label}.csv")), psd)?;
            }
            io::write_psd(&prefixed("total.csv"), &report.total)?;
            let table = prefixed("dominance.txt");
            std::fs::write(&table, report.dominance_table()).with_context(|| table.display().to_string())?;
        }
        Command::Plot { psds, out } => {
            let series = psds
                .iter()
                .map(|p| Ok((stem(p), io::read_psd(p)?)))
                .collect::<Result<Vec<_>>>()?;
            plot::plot_psds(&out, &series)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
