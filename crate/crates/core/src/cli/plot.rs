//! Regret-curve SVG charts.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::harness::SummaryRow;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 24.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("nothing to plot")]
    Empty,
    #[error("series `{0}` has no rows")]
    EmptySeries(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One curve: mean cumulative regret with a one-standard-deviation band.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub rows: Vec<SummaryRow>,
}

pub fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Round step of roughly `span / target` in 1, 2, 5 times a power of ten.
fn tick_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e6 || v.abs() < 1e-3) {
        format!("{v:.0e}")
    } else if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').to_string()
    }
}

pub fn render_svg(series: &[Series], title: &str) -> Result<String, PlotError> {
    if series.is_empty() {
        return Err(PlotError::Empty);
    }
    if let Some(s) = series.iter().find(|s| s.rows.is_empty()) {
        return Err(PlotError::EmptySeries(s.label.clone()));
    }
    let rows = || series.iter().flat_map(|s| s.rows.iter());
    let t_max = rows().map(|r| r.t).max().unwrap_or(1).max(1) as f64;
    let y_max = rows()
        .map(|r| r.mean + r.std)
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let x_step = tick_step(t_max, 5.0);
    let y_step = tick_step(y_max, 5.0);
    let y_top = (y_max / y_step).ceil() * y_step;
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |t: f64| LEFT + t / t_max * plot_w;
    let py = |y: f64| TOP + plot_h - y.clamp(0.0, y_top) / y_top * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, "<title>{}</title>", escape_xml(title));
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );

    // grid and tick labels
    let _ = writeln!(svg, r##"<g stroke="#dddddd" stroke-width="1">"##);
    let mut ticks = String::new();
    let mut k = 0.0;
    while k * x_step <= t_max + 1e-9 * t_max {
        let x = px(k * x_step);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{:.2}"/>"#,
            TOP + plot_h
        );
        let _ = writeln!(
            ticks,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + plot_h + 18.0,
            tick_label(k * x_step)
        );
        k += 1.0;
    }
    let mut k = 0.0;
    while k * y_step <= y_top + 1e-9 * y_top {
        let y = py(k * y_step);
        let _ = writeln!(
            svg,
            r#"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}"/>"#,
            LEFT + plot_w
        );
        let _ = writeln!(
            ticks,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + 4.0,
            tick_label(k * y_step)
        );
        k += 1.0;
    }
    svg.push_str("</g>\n<g>\n");
    svg.push_str(&ticks);
    svg.push_str("</g>\n");
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">round t</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">mean cumulative regret</text>"#,
        TOP + plot_h / 2.0
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let upper = s.rows.iter().map(|r| (px(r.t as f64), py(r.mean + r.std)));
        let lower = s
            .rows
            .iter()
            .rev()
            .map(|r| (px(r.t as f64), py(r.mean - r.std)));
        let band: Vec<String> = upper
            .chain(lower)
            .map(|(x, y)| format!("{x:.2},{y:.2}"))
            .collect();
        let line: Vec<String> = s
            .rows
            .iter()
            .map(|r| format!("{:.2},{:.2}", px(r.t as f64), py(r.mean)))
            .collect();
        let label = escape_xml(&s.label);
        let _ = writeln!(
            svg,
            r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"><title>{label} ±1 std</title></polygon>"#,
            band.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<polyline class="mean" points="{}" fill="none" stroke="{color}" stroke-width="2"><title>{label}</title></polyline>"#,
            line.join(" ")
        );
    }

    let _ = writeln!(svg, r#"<g class="legend">"#);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = TOP + 16.0 + 18.0 * i as f64;
        let x = LEFT + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="3"/>"#,
            x + 20.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            x + 26.0,
            y + 4.0,
            escape_xml(&s.label)
        );
    }
    svg.push_str("</g>\n</svg>\n");
    Ok(svg)
}

pub fn write_svg(series: &[Series], title: &str, path: &Path) -> Result<(), PlotError> {
    let svg = render_svg(series, title)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| PlotError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, svg).map_err(|source| PlotError::Io {
        path: path.to_path_buf(),
        source,
    })
}
