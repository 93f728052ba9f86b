//! Static log-log spectrum figures.

use std::path::Path;

use anyhow::{anyhow, bail, Result};
use cosh_core::Psd;
use plotters::prelude::*;

pub const X_LABEL: &str = "Fourier frequency / Hz";
pub const Y_LABEL: &str = "S_ν / Hz²·Hz⁻¹";

fn decade_bounds(lo: f64, hi: f64) -> (f64, f64) {
    let lo = 10f64.powf(lo.log10().floor());
    let mut hi = 10f64.powf(hi.log10().ceil());
    if hi <= lo {
        hi = lo * 10.0;
    }
    (lo, hi)
}

/// Writes an SVG figure with one line per spectrum. Bins with zero value
/// are skipped since they have no place on a log axis.
pub fn plot_psds(out: &Path, series: &[(String, Psd)]) -> Result<()> {
    let points: Vec<(&str, Vec<(f64, f64)>)> = series
        .iter()
        .map(|(name, p)| {
            let pts = p.bins.iter().filter(|b| b.value > 0.0).map(|b| (b.freq_hz, b.value)).collect();
            (name.as_str(), pts)
        })
        .collect();
    let all = points.iter().flat_map(|(_, p)| p.iter());
    let (mut fmin, mut fmax, mut vmin, mut vmax) = (f64::INFINITY, 0f64, f64::INFINITY, 0f64);
    for &(f, v) in all {
        fmin = fmin.min(f);
        fmax = fmax.max(f);
        vmin = vmin.min(v);
        vmax = vmax.max(v);
    }
    if !(fmax > 0.0 && vmax > 0.0) {
        bail!("nothing to plot: all spectra are empty or zero");
    }
    let (x0, x1) = decade_bounds(fmin, fmax);
    let (y0, y1) = decade_bounds(vmin, vmax);

    let root = SVGBackend::new(out, (900, 600)).into_drawing_area();
    let draw_err = |e: DrawingAreaErrorKind<_>| anyhow!("{}: {e:?}", out.display());
    root.fill(&WHITE).map_err(draw_err)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(15)
        .x_label_area_size(45)
        .y_label_area_size(70)
        .build_cartesian_2d((x0..x1).log_scale(), (y0..y1).log_scale())
        .map_err(draw_err)?;
    chart
        .configure_mesh()
        .x_desc(X_LABEL)
        .y_desc(Y_LABEL)
        .x_label_formatter(&|x| format!("{x:.0e}"))
        .y_label_formatter(&|y| format!("{y:.0e}"))
        .draw()
        .map_err(draw_err)?;
    for (i, (name, pts)) in points.into_iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(pts, color.stroke_width(1)))
            .map_err(draw_err)?
            .label(name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE.mix(0.8))
        .draw()
        .map_err(draw_err)?;
    root.present().map_err(draw_err)?;
    Ok(())
}
