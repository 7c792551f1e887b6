//! Standalone SVG line charts and heatmaps.
//!
//! Output depends only on the input values: coordinates are printed with a
//! fixed number of decimals and nothing time- or environment-dependent is
//! embedded.

use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::{DifferenceMatrix, ModularityCurve};
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

// viridis anchors at 0, .25, .5, .75, 1
const VIRIDIS: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

/// One named line of a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub values: Vec<f64>,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn write_file(path: &Path, svg: &str) -> Result<()> {
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

/// Line chart with layer index on x and modularity on y; one polyline per series.
pub fn curves_svg(series: &[Series], title: &str) -> Result<String> {
    if series.is_empty() || series.iter().any(|s| s.values.is_empty()) {
        return Err(Error::Parameter("cannot plot an empty curve".into()));
    }
    let n_points = series.iter().map(|s| s.values.len()).max().unwrap();
    let all = series.iter().flat_map(|s| s.values.iter().copied());
    let (lo, hi) = all.fold((0.0f64, 0.1f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (y_lo, y_hi) = ((lo * 10.0).floor() / 10.0, (hi * 10.0).ceil() / 10.0);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x_of = |i: usize| {
        if n_points == 1 {
            MARGIN_LEFT + plot_w / 2.0
        } else {
            MARGIN_LEFT + plot_w * i as f64 / (n_points - 1) as f64
        }
    };
    let y_of = |v: f64| MARGIN_TOP + plot_h * (y_hi - v) / (y_hi - y_lo);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        escape(title)
    );
    // axes
    let (x0, x1, y0, y1) = (MARGIN_LEFT, MARGIN_LEFT + plot_w, MARGIN_TOP, MARGIN_TOP + plot_h);
    let _ = writeln!(
        svg,
        r#"<line x1="{x0:.2}" y1="{y1:.2}" x2="{x1:.2}" y2="{y1:.2}" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}" stroke="black"/>"#
    );

    let y_steps = ((y_hi - y_lo) / 0.1).round() as usize;
    let y_stride = y_steps.div_ceil(10).max(1);
    for t in (0..=y_steps).step_by(y_stride) {
        let v = y_lo + 0.1 * t as f64;
        let y = y_of(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="#dddddd"/>"##
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#,
            x0 - 6.0,
            y + 4.0
        );
    }
    let x_stride = n_points.div_ceil(20).max(1);
    for i in (0..n_points).step_by(x_stride) {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{i}</text>"#,
            x_of(i),
            y1 + 16.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">layer</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">modularity</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );

    for (idx, s) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let points = s
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.2},{:.2}", x_of(i), y_of(v)))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            svg,
            r#"<polyline points="{points}" fill="none" stroke="{color}" stroke-width="2"/>"#
        );
        let ly = MARGIN_TOP + 14.0 * idx as f64 + 6.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            x1 + 12.0,
            x1 + 30.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            x1 + 34.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn render_curve(curve: &ModularityCurve, path: impl AsRef<Path>) -> Result<()> {
    let svg = curves_svg(
        &[Series {
            label: "modularity".into(),
            values: curve.values.clone(),
        }],
        "Modularity per layer",
    )?;
    write_file(path.as_ref(), &svg)
}

pub fn render_curves(series: &[Series], title: &str, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &curves_svg(series, title)?)
}

fn viridis(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (VIRIDIS.len() - 1) as f64;
    let i = (t.floor() as usize).min(VIRIDIS.len() - 2);
    let f = t - i as f64;
    let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Colour-mapped `L x L` grid, one `rect` per cell, layers on both axes.
pub fn heatmap_svg(matrix: &DifferenceMatrix) -> Result<String> {
    let n = matrix.n();
    if n == 0 {
        return Err(Error::Parameter("cannot plot an empty matrix".into()));
    }
    let side = 400.0;
    let cell = side / n as f64;
    let (ox, oy) = (50.0, 30.0);
    let max = matrix.max();

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="10">"#,
        w = ox + side + 20.0,
        h = oy + side + 40.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="18" text-anchor="middle" font-size="13">Layer difference |M_i - M_j| (max {max:.4})</text>"#,
        ox + side / 2.0
    );
    for i in 0..n {
        for j in 0..n {
            let t = if max > 0.0 { matrix.get(i, j) / max } else { 0.0 };
            let _ = writeln!(
                svg,
                r#"<rect x="{:.3}" y="{:.3}" width="{cell:.3}" height="{cell:.3}" fill="{}"><title>{i},{j}: {:.6}</title></rect>"#,
                ox + cell * j as f64,
                oy + cell * i as f64,
                viridis(t),
                matrix.get(i, j)
            );
        }
    }
    let stride = n.div_ceil(20).max(1);
    for i in (0..n).step_by(stride) {
        let c = cell * (i as f64 + 0.5);
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{:.3}" text-anchor="middle">{i}</text>"#,
            ox + c,
            oy + side + 14.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{:.3}" text-anchor="end">{i}</text>"#,
            ox - 4.0,
            oy + c + 3.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">layer</text>"#,
        ox + side / 2.0,
        oy + side + 32.0
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn render_heatmap(matrix: &DifferenceMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &heatmap_svg(matrix)?)
}
