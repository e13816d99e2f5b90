//! CSV and SVG writers. Everything is formatted into a string first so a
//! failed run leaves no partial file behind.

use std::fmt::Write as _;
use std::path::Path;

use crate::dressed::StickSpectrum;
use crate::error::{Error, Result};
use crate::spectrum::{Peak, SpectrumResult};

pub const SPECTRUM_HEADER: &str = "# delta,intensity,integrated_counts";
const CONFIG_MARK: &str = "# [config]";
const RUN_MARK: &str = "# [run]";

/// Twelve significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.11e}")
}

/// Comment block holding the config echo and run facts, each line a
/// `key = value` pair after the `# ` prefix.
pub fn footer(config_echo: &str, run: &[(String, String)]) -> String {
    let mut s = String::new();
    s.push_str(CONFIG_MARK);
    s.push('\n');
    for line in config_echo.lines() {
        let _ = writeln!(s, "# {line}");
    }
    s.push_str(RUN_MARK);
    s.push('\n');
    for (k, v) in run {
        let _ = writeln!(s, "# {k} = {v}");
    }
    s
}

/// Recovers the config echo embedded in an output file.
pub fn config_from_footer(text: &str) -> Option<String> {
    let mut lines = text.lines().skip_while(|l| *l != CONFIG_MARK);
    lines.next()?;
    let body: Vec<&str> = lines
        .take_while(|l| *l != RUN_MARK)
        .map(|l| l.strip_prefix("# ").unwrap_or(l))
        .collect();
    Some(body.join("\n") + "\n")
}

pub fn peaks_value(peaks: &[Peak]) -> String {
    let items: Vec<String> = peaks
        .iter()
        .map(|p| format!("[{:?}, {:?}, {:?}]", p.position, p.height, p.width))
        .collect();
    format!("[{}]", items.join(", "))
}

pub fn spectrum_csv(result: &SpectrumResult, footer_text: &str) -> String {
    let mut s = String::with_capacity(64 * result.points.len() + footer_text.len());
    s.push_str(SPECTRUM_HEADER);
    s.push('\n');
    for p in &result.points {
        let _ = writeln!(s, "{},{},{}", num(p.delta), num(p.intensity), num(p.integrated_counts));
    }
    s.push_str(footer_text);
    s
}

pub fn lines_csv(lines: &StickSpectrum, footer_text: &str) -> String {
    let mut s = String::from("# branch,m,position,weight\n");
    for l in &lines.lines {
        let _ = writeln!(s, "{},{},{},{}", l.branch.symbol(), l.m, num(l.position), num(l.weight));
    }
    s.push_str(footer_text);
    s
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// One curve of a plot.
pub struct Series<'a> {
    pub label: String,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 20.0;
const MARGIN_B: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const DASHES: [&str; 4] = ["none", "6,3", "2,2", "8,3,2,3"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Static line plot with linear axes and a legend.
pub fn render_svg(series: &[Series]) -> Result<String> {
    if series.is_empty() {
        return Err(Error::config("plot needs at least one series"));
    }
    for s in series {
        if s.x.len() < 2 || s.x.len() != s.y.len() {
            return Err(Error::config(format!("plot series {:?} needs at least 2 points", s.label)));
        }
    }
    let all_x = series.iter().flat_map(|s| s.x.iter().copied());
    let (x0, x1) = all_x.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let y1 = series.iter().flat_map(|s| s.y.iter().copied()).fold(0.0, f64::max);
    let y1 = if y1 > 0.0 { y1 * 1.05 } else { 1.0 };
    let (pw, ph) = (WIDTH - MARGIN_L - MARGIN_R, HEIGHT - MARGIN_T - MARGIN_B);
    let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| MARGIN_T + ph - y / y1 * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="13">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let x = x0 + (x1 - x0) * i as f64 / 4.0;
        let y = y1 * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            px(x),
            MARGIN_T + ph + 18.0,
            format_tick(x)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN_L - 6.0,
            py(y) + 4.0,
            format_tick(y)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Δ/ω_M</text>"#,
        MARGIN_L + pw / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">intensity</text>"#,
        MARGIN_T + ph / 2.0,
        MARGIN_T + ph / 2.0
    );
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let dash = DASHES[(i / COLORS.len() + i) % DASHES.len()];
        let pts: Vec<String> = ser.x.iter().zip(ser.y).map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" stroke-dasharray="{dash}" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = MARGIN_T + 18.0 + 18.0 * i as f64;
        let lx = WIDTH - MARGIN_R - 150.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="1.5" stroke-dasharray="{dash}"/>"#,
            lx + 30.0
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 36.0, ly + 4.0, escape(&ser.label));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 0.01 && v.abs() < 1e4 {
        format!("{v:.2}")
    } else {
        format!("{v:.2e}")
    }
}

/// Renders and writes; nothing is created when rendering fails.
pub fn emit_plot(series: &[Series], path: &Path) -> Result<()> {
    let svg = render_svg(series)?;
    write_file(path, &svg)
}
