//! Hand-written SVG line plots. Output depends only on the input bundle.

use std::fmt::Write;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error("nothing to plot")]
    Empty,
    #[error("series `{0}` contains a non-finite point")]
    NonFinite(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesBundle {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotStyle {
    /// Lines against time.
    TimeSeries,
    /// Trajectories in the (ρ⁺, ρ⁻) plane: equal axis scales, start points marked.
    PhasePlane,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Step of roughly `span/5` of the form 1, 2 or 5 times a power of ten.
fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let k = if r < 1.5 {
        1.0
    } else if r < 3.5 {
        2.0
    } else if r < 7.5 {
        5.0
    } else {
        10.0
    };
    k * mag
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 0.5 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

fn fmt_tick(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize };
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

pub fn emit_plot(bundle: &SeriesBundle, style: PlotStyle) -> Result<String, PlotError> {
    if bundle.series.iter().all(|s| s.points.is_empty()) {
        return Err(PlotError::Empty);
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for s in &bundle.series {
        for &(x, y) in &s.points {
            if !(x.is_finite() && y.is_finite()) {
                return Err(PlotError::NonFinite(s.label.clone()));
            }
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    let (mut x0, mut x1) = padded(x0, x1);
    let (mut y0, mut y1) = padded(y0, y1);
    if style == PlotStyle::PhasePlane {
        x0 = x0.min(y0);
        y0 = x0;
        x1 = x1.max(y1);
        y1 = x1;
    }
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut out = String::new();
    let w = &mut out;
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        w,
        r#"<text x="{:.1}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(&bundle.title)
    )
    .unwrap();
    writeln!(
        w,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black" stroke-width="1"/>"#
    )
    .unwrap();

    let ticks = |lo: f64, hi: f64| {
        let step = tick_step(hi - lo);
        let mut v = (lo / step).ceil() * step;
        let mut out = vec![];
        while v <= hi + 1e-9 * step {
            out.push((v, step));
            v += step;
        }
        out
    };
    for (v, step) in ticks(x0, x1) {
        let x = sx(v);
        writeln!(
            w,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
            TOP + ph,
            TOP + ph + 5.0
        )
        .unwrap();
        writeln!(
            w,
            r#"<text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            TOP + ph + 18.0,
            fmt_tick(v, step)
        )
        .unwrap();
    }
    for (v, step) in ticks(y0, y1) {
        let y = sy(v);
        writeln!(w, r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 5.0).unwrap();
        writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            LEFT - 8.0,
            y + 4.0,
            fmt_tick(v, step)
        )
        .unwrap();
    }
    writeln!(
        w,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(&bundle.x_label)
    )
    .unwrap();
    writeln!(
        w,
        r#"<text x="18" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&bundle.y_label)
    )
    .unwrap();

    for (k, s) in bundle.series.iter().enumerate() {
        if s.points.is_empty() {
            continue;
        }
        let colour = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        writeln!(
            w,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
            pts.join(" "),
            escape(&s.label)
        )
        .unwrap();
        if style == PlotStyle::PhasePlane {
            let (x, y) = s.points[0];
            writeln!(w, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{colour}"/>"#, sx(x), sy(y)).unwrap();
        }
    }
    if style == PlotStyle::TimeSeries && bundle.series.len() <= PALETTE.len() {
        for (k, s) in bundle.series.iter().enumerate() {
            let y = TOP + 14.0 + 16.0 * k as f64;
            let x = LEFT + pw - 120.0;
            let colour = PALETTE[k % PALETTE.len()];
            writeln!(
                w,
                r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{colour}" stroke-width="2"/>"#,
                x + 20.0
            )
            .unwrap();
            writeln!(
                w,
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11">{}</text>"#,
                x + 26.0,
                y + 4.0,
                escape(&s.label)
            )
            .unwrap();
        }
    }
    writeln!(w, "</svg>").unwrap();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle(series: Vec<Series>) -> SeriesBundle {
        SeriesBundle { title: "t".into(), x_label: "time".into(), y_label: "density".into(), series }
    }

    #[test]
    fn constant_series_is_horizontal() {
        let b = bundle(vec![Series { label: "c".into(), points: (0..10).map(|i| (i as f64, 2.0)).collect() }]);
        let svg = emit_plot(&b, PlotStyle::TimeSeries).unwrap();
        let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        let pts = line.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        let ys: Vec<&str> = pts.split(' ').map(|p| p.split(',').nth(1).unwrap()).collect();
        assert!(ys.iter().all(|y| *y == ys[0]));
        assert!(svg.contains(">time<") && svg.contains(">density<"));
    }

    #[test]
    fn deterministic() {
        let b = bundle(vec![Series { label: "s".into(), points: vec![(0.0, 1.0), (1.0, 0.5), (2.0, 0.7)] }]);
        assert_eq!(emit_plot(&b, PlotStyle::PhasePlane).unwrap(), emit_plot(&b, PlotStyle::PhasePlane).unwrap());
    }

    #[test]
    fn empty_and_nan_rejected() {
        assert_eq!(emit_plot(&bundle(vec![]), PlotStyle::TimeSeries), Err(PlotError::Empty));
        let e = bundle(vec![Series { label: "e".into(), points: vec![] }]);
        assert_eq!(emit_plot(&e, PlotStyle::TimeSeries), Err(PlotError::Empty));
        let n = bundle(vec![Series { label: "n".into(), points: vec![(0.0, f64::NAN)] }]);
        assert!(matches!(emit_plot(&n, PlotStyle::TimeSeries), Err(PlotError::NonFinite(_))));
    }

    #[test]
    fn ticks() {
        assert_eq!(tick_step(10.0), 2.0);
        assert_eq!(tick_step(1.0), 0.2);
        assert_eq!(fmt_tick(-0.0, 0.5), "0.0");
    }
}
