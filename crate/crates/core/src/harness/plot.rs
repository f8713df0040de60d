//! Static SVG chart and whitespace-delimited data file for a sweep.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::SweepResult;
use crate::error::{Error, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlotFiles {
    pub svg: PathBuf,
    pub data: PathBuf,
}

/// Writes `<stem>.svg` and `<stem>.dat` into `dir`.
pub fn emit_plot_data(result: &SweepResult, dir: &Path, stem: &str) -> Result<PlotFiles> {
    if result.manifest.curves.is_empty() {
        return Err(Error::InvalidArgument("no curves to plot".into()));
    }
    if result.points.is_empty() {
        return Err(Error::InvalidArgument("no grid points to plot".into()));
    }
    let files = PlotFiles {
        svg: dir.join(format!("{stem}.svg")),
        data: dir.join(format!("{stem}.dat")),
    };
    std::fs::write(&files.data, data_table(result)).map_err(Error::io(&files.data))?;
    std::fs::write(&files.svg, svg_chart(result)).map_err(Error::io(&files.svg))?;
    Ok(files)
}

fn series(result: &SweepResult, index: usize) -> Vec<(f64, f64)> {
    let curve = result.manifest.curves[index];
    result
        .points
        .iter()
        .filter_map(|p| p.curve(curve).map(|c| (p.grid_value, c.mse_mean)))
        .collect()
}

/// Grid value followed by one MSE column per curve.
pub fn data_table(result: &SweepResult) -> String {
    let mut out = format!("# {}", result.manifest.mode);
    for c in &result.manifest.curves {
        write!(out, " {c}").unwrap();
    }
    out.push('\n');
    for p in &result.points {
        write!(out, "{}", p.grid_value).unwrap();
        for &c in &result.manifest.curves {
            match p.curve(c) {
                Some(r) => write!(out, " {}", r.mse_mean).unwrap(),
                None => out.push_str(" nan"),
            }
        }
        out.push('\n');
    }
    out
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line chart with a log10 MSE axis; nonpositive values are left out.
pub fn svg_chart(result: &SweepResult) -> String {
    let all: Vec<Vec<(f64, f64)>> = (0..result.manifest.curves.len()).map(|i| series(result, i)).collect();
    let xs: Vec<f64> = result.points.iter().map(|p| p.grid_value).collect();
    let (x_min, x_max) = (xs[0], xs[xs.len() - 1]);
    let positive: Vec<f64> = all.iter().flatten().map(|p| p.1).filter(|v| *v > 0.0 && v.is_finite()).collect();
    let lo = positive.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = positive.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (dec_lo, dec_hi) = if positive.is_empty() {
        (-1.0, 0.0)
    } else {
        let a = lo.log10().floor();
        let b = hi.log10().ceil();
        (a, if b > a { b } else { a + 1.0 })
    };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| {
        if x_max > x_min {
            LEFT + (x - x_min) / (x_max - x_min) * plot_w
        } else {
            LEFT + plot_w / 2.0
        }
    };
    let py = |v: f64| TOP + (dec_hi - v.log10()) / (dec_hi - dec_lo) * plot_h;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<rect class="frame" x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    )
    .unwrap();

    let mut decade = dec_lo;
    while decade <= dec_hi + 1e-9 {
        let y = py(10f64.powf(decade));
        writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            y + 4.0,
            decade as i64
        )
        .unwrap();
        decade += 1.0;
    }
    for &x in &xs {
        writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x}</text>"#,
            px(x),
            TOP + plot_h + 18.0
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0,
        escape(result.manifest.mode.axis_label())
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text class="y-label" x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">MSE</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    )
    .unwrap();

    for (i, points) in all.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let visible: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.1 > 0.0 && p.1.is_finite()).collect();
        let path: Vec<String> = visible.iter().map(|&(x, v)| format!("{:.2},{:.2}", px(x), py(v))).collect();
        writeln!(
            svg,
            r#"<polyline class="series series-{i}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        )
        .unwrap();
        for &(x, v) in &visible {
            writeln!(
                svg,
                r#"<circle class="marker series-{i}" cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#,
                px(x),
                py(v)
            )
            .unwrap();
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + plot_w + 15.0;
        writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            result.manifest.curves[i]
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SystemConfig;
    use crate::harness::{run_sweep, Curve, SweepSpec};

    fn two_point(spec: SweepSpec) -> SweepResult {
        run_sweep(&spec).unwrap()
    }

    fn base() -> SystemConfig {
        SystemConfig {
            num_trials: 4,
            ..Default::default()
        }
    }

    #[test]
    fn two_markers_per_series() {
        let r = two_point(SweepSpec::bits(vec![4, 8], 2.0, base()));
        let dir = tempfile::tempdir().unwrap();
        let files = emit_plot_data(&r, dir.path(), "fig").unwrap();
        let svg = std::fs::read_to_string(&files.svg).unwrap();
        for i in 0..r.manifest.curves.len() {
            assert_eq!(svg.matches(&format!("class=\"marker series-{i}\"")).count(), 2);
        }
        assert!(svg.contains("number of total bits"));
        let data = std::fs::read_to_string(&files.data).unwrap();
        assert_eq!(data.lines().count(), 3);
        assert!(data.lines().nth(1).unwrap().starts_with("4 "));
    }

    #[test]
    fn snr_axis_label() {
        let r = two_point(SweepSpec::snr(vec![2.0, 10.0], 4, base()).with_curves(vec![Curve::TaskBased]));
        assert!(svg_chart(&r).contains("SNR [dB]"));
    }

    #[test]
    fn empty_curve_set_is_an_error() {
        let mut r = two_point(SweepSpec::bits(vec![4], 2.0, base()));
        r.manifest.curves.clear();
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_plot_data(&r, dir.path(), "empty").is_err());
        assert!(!dir.path().join("empty.svg").exists());
    }
}
