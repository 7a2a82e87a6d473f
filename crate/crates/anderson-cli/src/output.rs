//! Output sinks and the SVG line plot.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Env var naming the default directory for relative `--out` paths.
pub const OUT_DIR_ENV: &str = "ANDERSON_OUT_DIR";

/// Writes `content` to `--out` (resolved against `ANDERSON_OUT_DIR` when
/// relative) or to stdout when no path was given.
pub fn emit(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        None => {
            std::io::stdout().write_all(content.as_bytes())?;
            Ok(())
        }
        Some(path) => {
            let resolved: PathBuf = if path.is_relative() {
                match std::env::var_os(OUT_DIR_ENV) {
                    Some(dir) => PathBuf::from(dir).join(path),
                    None => path.to_path_buf(),
                }
            } else {
                path.to_path_buf()
            };
            if let Some(parent) = resolved.parent() {
                if !parent.as_os_str().is_empty() {
                    fs::create_dir_all(parent)?;
                }
            }
            fs::write(&resolved, content)?;
            eprintln!("wrote {}", resolved.display());
            Ok(())
        }
    }
}

/// One named curve of (x, y) points.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Minimal static line plot. Axes are linear in the supplied coordinates;
/// callers pass pre-transformed (e.g. log) values and matching labels.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h) = (680.0, 440.0);
    let (ml, mr, mt, mb) = (70.0, 160.0, 40.0, 50.0);
    let (pw, ph) = (w - ml - mr, h - mt - mb);

    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in series {
        for &(x, y) in &s.points {
            xs.push(x);
            ys.push(y);
        }
    }
    let (x0, x1) = bounds(&xs);
    let (y0, y1) = bounds(&ys);
    let sx = |x: f64| ml + (x - x0) / (x1 - x0).max(f64::MIN_POSITIVE) * pw;
    let sy = |y: f64| mt + ph - (y - y0) / (y1 - y0).max(f64::MIN_POSITIVE) * ph;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
        ml + pw / 2.0,
        escape(title)
    ));
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        mt + ph,
        ml + pw,
        mt + ph
    ));
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        mt + ph
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
        ml + pw / 2.0,
        h - 12.0,
        escape(x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        mt + ph / 2.0,
        mt + ph / 2.0,
        escape(y_label)
    ));
    // End-of-range tick labels.
    for (v, x) in [(x0, ml), (x1, ml + pw)] {
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{v:.3}</text>\n",
            mt + ph + 16.0
        ));
    }
    for (v, y) in [(y0, mt + ph), (y1, mt)] {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{v:.3}</text>\n",
            ml - 6.0,
            y + 4.0
        ));
    }

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
        let ly = mt + 18.0 * i as f64 + 10.0;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"1.8\"/>\n",
            ml + pw + 12.0,
            ml + pw + 34.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            ml + pw + 40.0,
            ly + 4.0,
            escape(&s.label)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() && hi.is_finite() && lo < hi {
        (lo, hi)
    } else if lo.is_finite() {
        (lo - 0.5, lo + 0.5)
    } else {
        (0.0, 1.0)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
