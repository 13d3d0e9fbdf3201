//! Minimal SVG line charts.
//!
//! Output depends only on the input data, so regenerated plots diff cleanly.

use std::fmt::Write;

use crate::evaluate::ErrorRow;
use crate::series::MotionSeries;
use crate::wavegen::Channel;

const WIDTH: f64 = 900.0;
const PANEL_HEIGHT: f64 = 220.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 30.0;
const COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

pub struct Line<'a> {
    pub label: &'a str,
    pub y: &'a [f64],
}

pub struct Panel<'a> {
    pub title: String,
    pub x: &'a [f64],
    pub lines: Vec<Line<'a>>,
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

/// Stacked panels sharing one width.
pub fn render(panels: &[Panel<'_>]) -> String {
    let height = PANEL_HEIGHT * panels.len().max(1) as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (p, panel) in panels.iter().enumerate() {
        render_panel(&mut svg, panel, p as f64 * PANEL_HEIGHT);
    }
    svg.push_str("</svg>\n");
    svg
}

fn render_panel(svg: &mut String, panel: &Panel<'_>, top: f64) {
    let (x0, x1) = extent(panel.x.iter().copied());
    let (y0, y1) = extent(panel.lines.iter().flat_map(|l| l.y.iter().copied()));
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = PANEL_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| top + MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * plot_h;

    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="13">{}</text>"#,
        MARGIN_LEFT,
        top + MARGIN_TOP - 10.0,
        escape(&panel.title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_LEFT:.1}" y="{:.1}" width="{plot_w:.1}" height="{plot_h:.1}" fill="none" stroke="gray"/>"#,
        top + MARGIN_TOP
    );
    for (v, y) in [(y1, py(y1)), (y0, py(y0))] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.4}</text>"#,
            MARGIN_LEFT - 4.0,
            y + 4.0
        );
    }
    let base = top + PANEL_HEIGHT - MARGIN_BOTTOM + 14.0;
    let _ = writeln!(svg, r#"<text x="{MARGIN_LEFT:.1}" y="{base:.1}">{x0:.1} s</text>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{base:.1}" text-anchor="end">{x1:.1} s</text>"#,
        WIDTH - MARGIN_RIGHT
    );

    for (k, line) in panel.lines.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut pts = String::new();
        for (&x, &y) in panel.x.iter().zip(line.y) {
            if y.is_finite() {
                let _ = write!(pts, "{:.2},{:.2} ", px(x), py(y));
            }
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1" points="{}"/>"#,
            pts.trim_end()
        );
        let lx = WIDTH - MARGIN_RIGHT - 150.0 + 75.0 * (k % 2) as f64;
        let ly = top + MARGIN_TOP - 10.0 - 12.0 * (k / 2) as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{lx:.1}" y="{ly:.1}" fill="{color}">{}</text>"#,
            escape(line.label)
        );
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Heave, pitch and roll of a series, one panel each.
pub fn series_svg(series: &MotionSeries) -> String {
    let x: Vec<f64> = (0..series.len()).map(|i| series.time(i)).collect();
    let ys: Vec<Vec<f64>> = (0..3).map(|c| series.channel(c)).collect();
    let panels: Vec<Panel<'_>> = Channel::ALL
        .iter()
        .map(|ch| Panel {
            title: ch.name().to_string(),
            x: &x,
            lines: vec![Line {
                label: ch.name(),
                y: &ys[ch.index()],
            }],
        })
        .collect();
    render(&panels)
}

/// Per-channel columns pulled out of the long error table.
struct ChannelRows {
    t: Vec<f64>,
    truth: Vec<f64>,
    prediction: Vec<f64>,
    abs_error: Vec<f64>,
}

fn split_rows(rows: &[ErrorRow]) -> Vec<(Channel, ChannelRows)> {
    Channel::ALL
        .iter()
        .map(|&ch| {
            let mine: Vec<&ErrorRow> = rows.iter().filter(|r| r.channel == ch.name()).collect();
            (
                ch,
                ChannelRows {
                    t: mine.iter().map(|r| r.t).collect(),
                    truth: mine.iter().map(|r| r.truth).collect(),
                    prediction: mine.iter().map(|r| r.prediction).collect(),
                    abs_error: mine.iter().map(|r| r.abs_error).collect(),
                },
            )
        })
        .filter(|(_, c)| !c.t.is_empty())
        .collect()
}

/// Truth against prediction, one panel per channel.
pub fn forecast_svg(rows: &[ErrorRow]) -> String {
    let data = split_rows(rows);
    let panels: Vec<Panel<'_>> = data
        .iter()
        .map(|(ch, c)| Panel {
            title: format!("{ch}: truth vs prediction"),
            x: &c.t,
            lines: vec![
                Line {
                    label: "truth",
                    y: &c.truth,
                },
                Line {
                    label: "prediction",
                    y: &c.prediction,
                },
            ],
        })
        .collect();
    render(&panels)
}

/// Absolute error curve, one panel per channel.
pub fn error_svg(rows: &[ErrorRow]) -> String {
    let data = split_rows(rows);
    let panels: Vec<Panel<'_>> = data
        .iter()
        .map(|(ch, c)| Panel {
            title: format!("{ch}: absolute error"),
            x: &c.t,
            lines: vec![Line {
                label: "|error|",
                y: &c.abs_error,
            }],
        })
        .collect();
    render(&panels)
}
