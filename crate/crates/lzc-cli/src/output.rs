//! CSV and SVG emission. CSV values are printed with 12 significant digits
//! in a fixed scientific format, so identical configs produce byte-identical
//! files.

use crate::runner::{Outcome, RunError};
use std::io::Write;
use std::path::Path;

fn fmt_value(v: f64) -> String {
    format!("{v:.11e}")
}

pub fn csv_text(outcome: &Outcome) -> String {
    let mut out = String::new();
    out.push_str(&outcome.columns.join(","));
    out.push('\n');
    for row in &outcome.rows {
        let cells: Vec<String> = outcome
            .columns
            .iter()
            .map(|c| row.get(c).map(fmt_value).unwrap_or_default())
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, outcome: &Outcome) -> Result<(), RunError> {
    let io_err = |source| RunError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io_err)?;
    f.write_all(csv_text(outcome).as_bytes()).map_err(io_err)?;
    Ok(())
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

const WIDTH: f64 = 880.0;
const HEIGHT: f64 = 560.0;
const MARGIN_L: f64 = 72.0;
const MARGIN_R: f64 = 190.0;
const MARGIN_T: f64 = 46.0;
const MARGIN_B: f64 = 58.0;

/// Static SVG 1.1 line plot of every probability column against the sweep
/// value: axes, ticks, legend, one polyline per series.
pub fn svg_text(outcome: &Outcome, title: &str, x_label: &str) -> String {
    let series: Vec<(&str, Vec<(f64, f64)>)> = outcome
        .columns
        .iter()
        .filter(|c| **c != "sweep_value" && **c != "err_estimate")
        .map(|c| {
            let pts: Vec<(f64, f64)> = outcome
                .rows
                .iter()
                .filter_map(|r| r.get(c).map(|y| (r.sweep_value, y)))
                .collect();
            (*c, pts)
        })
        .filter(|(_, pts)| !pts.is_empty())
        .collect();

    let all_points = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in all_points {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    if !x_lo.is_finite() {
        (x_lo, x_hi, y_lo, y_hi) = (0.0, 1.0, 0.0, 1.0);
    }
    if x_hi - x_lo < 1e-300 {
        x_hi = x_lo + 1.0;
    }
    y_lo = y_lo.min(0.0);
    y_hi = y_hi.max(y_lo + 1e-12);
    let pad = 0.05 * (y_hi - y_lo);
    y_hi += pad;

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = move |x: f64| MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = move |y: f64| MARGIN_T + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h;

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_L + plot_w / 2.0,
        xml_escape(title)
    ));

    // axes
    s.push_str(&format!(
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{plot_w}\" height=\"{plot_h}\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n"
    ));
    for (t, label) in ticks(x_lo, x_hi, 6) {
        let x = sx(t);
        s.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
            MARGIN_T + plot_h,
            MARGIN_T + plot_h + 5.0
        ));
        s.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{label}</text>\n",
            MARGIN_T + plot_h + 20.0
        ));
    }
    for (t, label) in ticks(y_lo, y_hi, 6) {
        let y = sy(t);
        s.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{MARGIN_L}\" y2=\"{y:.2}\" stroke=\"black\"/>\n",
            MARGIN_L - 5.0
        ));
        s.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">{label}</text>\n",
            MARGIN_L - 9.0,
            y + 4.0
        ));
    }
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 14.0,
        xml_escape(x_label)
    ));
    s.push_str(&format!(
        "<text x=\"18\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.1})\">probability</text>\n",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0
    ));

    // series
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        s.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"/>\n",
            coords.join(" ")
        ));
        let ly = MARGIN_T + 16.0 + 20.0 * i as f64;
        let lx = WIDTH - MARGIN_R + 16.0;
        s.push_str(&format!(
            "<line x1=\"{lx:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"1.6\"/>\n",
            lx + 26.0
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            lx + 32.0,
            ly + 4.0,
            xml_escape(name)
        ));
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(
    path: &Path,
    outcome: &Outcome,
    title: &str,
    x_label: &str,
) -> Result<(), RunError> {
    let io_err = |source| RunError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io_err)?;
    f.write_all(svg_text(outcome, title, x_label).as_bytes())
        .map_err(io_err)?;
    Ok(())
}

/// Tick positions at 1/2/5 × 10^n steps covering [lo, hi].
fn ticks(lo: f64, hi: f64, target: usize) -> Vec<(f64, String)> {
    let span = hi - lo;
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= target as f64)
        .unwrap_or(mag * 10.0);
    let first = (lo / step).ceil();
    let mut out = Vec::new();
    let mut i = first;
    while i * step <= hi + 1e-9 * span {
        let v = i * step;
        // snap tiny residuals so labels print cleanly
        let v = if v.abs() < 1e-12 * span { 0.0 } else { v };
        out.push((v, format!("{}", (v * 1e10).round() / 1e10)));
        i += 1.0;
    }
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::PointResult;

    fn outcome() -> Outcome {
        Outcome {
            columns: vec!["sweep_value", "p00_analytic"],
            rows: vec![
                PointResult {
                    sweep_value: 0.0,
                    p00_analytic: Some(1.0),
                    ..Default::default()
                },
                PointResult {
                    sweep_value: 0.5,
                    p00_analytic: Some(0.123456789012345),
                    ..Default::default()
                },
            ],
            validation: None,
        }
    }

    #[test]
    fn csv_is_deterministic_and_12_digits() {
        let o = outcome();
        let a = csv_text(&o);
        let b = csv_text(&o);
        assert_eq!(a, b);
        assert!(a.starts_with("sweep_value,p00_analytic\n"));
        assert!(a.contains("1.23456789012e-1"), "{a}");
    }

    #[test]
    fn svg_contains_axes_and_series() {
        let o = outcome();
        let svg = svg_text(&o, "test", "g[0]");
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("p00_analytic"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn tick_steps_are_nice() {
        let t = ticks(0.0, 4.0, 6);
        assert!(t.iter().any(|(v, _)| *v == 0.0));
        assert!(t.iter().any(|(v, _)| *v == 4.0));
        assert!(t.len() <= 7);
    }
}
