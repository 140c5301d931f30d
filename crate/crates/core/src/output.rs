//! CSV and SVG writers.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("cannot plot: {0}")]
    Plot(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Formats with 17 significant digits, independent of locale.
pub fn fmt_full(v: f64) -> String {
    format!("{v:.16e}")
}

/// `t,q1..qn,qd1..qdn,uhat,J,V,Vdot,u_applied`, optionally followed by the
/// same columns (without `t`) prefixed with `avg_`.
pub fn csv_header(n: usize, averaged: bool) -> Vec<String> {
    let mut cols: Vec<String> = vec!["t".into()];
    let block = |prefix: &str| {
        let mut b: Vec<String> = (1..=n).map(|i| format!("{prefix}q{i}")).collect();
        b.extend((1..=n).map(|i| format!("{prefix}qd{i}")));
        b.extend(["uhat", "J", "V", "Vdot", "u_applied"].map(|c| format!("{prefix}{c}")));
        b
    };
    cols.extend(block(""));
    if averaged {
        cols.extend(block("avg_"));
    }
    cols
}

/// Writes a header and rows. Every value is written with [`fmt_full`]; rows
/// end in `\n`.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<(), OutputError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut line = header.join(",");
    line.push('\n');
    w.write_all(line.as_bytes()).map_err(io_err(path))?;
    for row in rows {
        line.clear();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&fmt_full(*v));
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub dashed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 900.0;
const PANEL_HEIGHT: f64 = 190.0;
const MARGIN_LEFT: f64 = 90.0;
const MARGIN_RIGHT: f64 = 130.0;
const MARGIN_TOP: f64 = 28.0;
const MARGIN_BOTTOM: f64 = 30.0;
/// Polylines are reduced to at most this many min/max buckets.
pub const MAX_BUCKETS: usize = 1500;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Keeps the first, minimum, maximum and last sample of each bucket, in time
/// order, so oscillation envelopes survive decimation.
pub fn decimate(times: &[f64], values: &[f64], buckets: usize) -> Vec<(f64, f64)> {
    let len = times.len().min(values.len());
    if len <= 2 * buckets.max(1) {
        return times
            .iter()
            .copied()
            .zip(values.iter().copied())
            .take(len)
            .collect();
    }
    let mut out = Vec::with_capacity(4 * buckets);
    for b in 0..buckets {
        let lo = b * len / buckets;
        let hi = ((b + 1) * len / buckets).max(lo + 1);
        let slice = &values[lo..hi];
        let (mut imin, mut imax) = (0, 0);
        for (i, v) in slice.iter().enumerate() {
            if *v < slice[imin] {
                imin = i;
            }
            if *v > slice[imax] {
                imax = i;
            }
        }
        let mut picks = vec![0, imin, imax, slice.len() - 1];
        picks.sort_unstable();
        picks.dedup();
        out.extend(picks.into_iter().map(|i| (times[lo + i], slice[i])));
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn tick(v: f64) -> String {
    if v == 0.0 || (1e-3..1e5).contains(&v.abs()) {
        format!("{v:.4}")
    } else {
        format!("{v:.3e}")
    }
}

/// Self-contained SVG with one panel per signal, shared time axis.
pub fn render_svg(panels: &[Panel]) -> Result<String, OutputError> {
    if panels.is_empty() {
        return Err(OutputError::Plot("no panels".into()));
    }
    for p in panels {
        if p.series.is_empty() {
            return Err(OutputError::Plot(format!(
                "panel `{}` has no series",
                p.title
            )));
        }
        if let Some(s) = p
            .series
            .iter()
            .find(|s| s.times.len().min(s.values.len()) < 2)
        {
            return Err(OutputError::Plot(format!(
                "series `{}` needs at least two points",
                s.label
            )));
        }
    }
    let all = || panels.iter().flat_map(|p| p.series.iter());
    let t_min = all().map(|s| s.times[0]).fold(f64::INFINITY, f64::min);
    let t_max = all()
        .map(|s| *s.times.last().unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    let t_span = if t_max > t_min { t_max - t_min } else { 1.0 };
    let height = panels.len() as f64 * (PANEL_HEIGHT + MARGIN_TOP + MARGIN_BOTTOM);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (k, panel) in panels.iter().enumerate() {
        let top = k as f64 * (PANEL_HEIGHT + MARGIN_TOP + MARGIN_BOTTOM) + MARGIN_TOP;
        let finite = panel
            .series
            .iter()
            .flat_map(|s| s.values.iter().copied())
            .filter(|v| v.is_finite());
        let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
        if !lo.is_finite() {
            (lo, hi) = (-1.0, 1.0);
        }
        if hi - lo < 1e-12 * (1.0 + hi.abs()) {
            lo -= 0.5;
            hi += 0.5;
        }
        let x = |t: f64| MARGIN_LEFT + (t - t_min) / t_span * plot_w;
        let y = |v: f64| top + (hi - v) / (hi - lo) * PANEL_HEIGHT;
        let _ = writeln!(
            svg,
            r##"<rect x="{MARGIN_LEFT}" y="{top}" width="{plot_w}" height="{PANEL_HEIGHT}" fill="none" stroke="#444"/>"##
        );
        let _ = writeln!(
            svg,
            r#"<text x="{MARGIN_LEFT}" y="{}" font-weight="bold">{}</text>"#,
            top - 8.0,
            escape(&panel.title)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 4.0,
            top + 10.0,
            tick(hi)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 4.0,
            top + PANEL_HEIGHT,
            tick(lo)
        );
        let _ = writeln!(
            svg,
            r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{}</text>"#,
            top + PANEL_HEIGHT / 2.0,
            top + PANEL_HEIGHT / 2.0,
            escape(&panel.title)
        );
        if lo < 0.0 && hi > 0.0 {
            let _ = writeln!(
                svg,
                r##"<line x1="{MARGIN_LEFT}" y1="{0:.2}" x2="{1}" y2="{0:.2}" stroke="#bbb" stroke-dasharray="2,3"/>"##,
                y(0.0),
                MARGIN_LEFT + plot_w
            );
        }
        let base = top + PANEL_HEIGHT + 14.0;
        let _ = writeln!(
            svg,
            r#"<text x="{MARGIN_LEFT}" y="{base}">{}</text>"#,
            tick(t_min)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{base}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT + plot_w,
            tick(t_max)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{base}" text-anchor="middle">t [s]</text>"#,
            MARGIN_LEFT + plot_w / 2.0
        );
        for (i, s) in panel.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let dash = if s.dashed {
                r#" stroke-dasharray="6,4""#
            } else {
                ""
            };
            let mut pts = String::new();
            for (t, v) in decimate(&s.times, &s.values, MAX_BUCKETS) {
                if v.is_finite() {
                    let _ = write!(pts, "{:.2},{:.2} ", x(t), y(v));
                }
            }
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.2"{dash} points="{}"/>"#,
                pts.trim_end()
            );
            let ly = top + 14.0 + 16.0 * i as f64;
            let lx = MARGIN_LEFT + plot_w + 10.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="1.5"{dash}/><text x="{}" y="{}">{}</text>"#,
                lx + 22.0,
                lx + 26.0,
                ly + 4.0,
                escape(&s.label)
            );
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_svg(panels: &[Panel], path: &Path) -> Result<(), OutputError> {
    let svg = render_svg(panels)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, svg).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_schema() {
        let h = csv_header(1, false);
        assert_eq!(h.join(","), "t,q1,qd1,uhat,J,V,Vdot,u_applied");
        assert_eq!(csv_header(2, false).len(), 1 + 5 + 4);
        assert_eq!(csv_header(2, true).len(), 1 + 2 * (5 + 4));
        assert_eq!(csv_header(1, true)[8], "avg_q1");
    }

    #[test]
    fn full_precision_round_trips() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0] {
            assert_eq!(fmt_full(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn decimation_keeps_extremes() {
        let t: Vec<f64> = (0..100_000).map(|i| i as f64).collect();
        let v: Vec<f64> = t.iter().map(|x| (x * 0.37).sin()).collect();
        let d = decimate(&t, &v, 100);
        assert!(d.len() <= 400);
        let max = d.iter().map(|p| p.1).fold(f64::MIN, f64::max);
        assert!(max > 0.9999);
        assert!(d.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn two_point_series_renders_one_polyline() {
        let p = Panel {
            title: "q".into(),
            series: vec![Series {
                label: "true".into(),
                times: vec![0.0, 1.0],
                values: vec![1.0, 2.0],
                dashed: false,
            }],
        };
        let svg = render_svg(&[p]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn empty_series_rejected() {
        let p = Panel {
            title: "q".into(),
            series: vec![Series {
                label: "x".into(),
                times: vec![],
                values: vec![],
                dashed: false,
            }],
        };
        assert!(matches!(render_svg(&[p]), Err(OutputError::Plot(_))));
        assert!(render_svg(&[]).is_err());
    }
}
