//! Minimal deterministic SVG charts: scatter and line plots with axes.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const RAMP: [(u8, u8, u8); 5] = [(68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98), (253, 231, 37)];
const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

/// Colour for `t` in [0, 1] on a perceptual ramp.
pub fn ramp(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let pos = t * (RAMP.len() - 1) as f64;
    let i = (pos.floor() as usize).min(RAMP.len() - 2);
    let f = pos - i as f64;
    let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * f).round() as u8;
    let (a, b) = (RAMP[i], RAMP[i + 1]);
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

pub fn category(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let m = if r <= 1.0 {
        1.0
    } else if r <= 2.0 {
        2.0
    } else if r <= 5.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

#[derive(Debug, Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Range {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Range { lo: 0.0, hi: 1.0 };
        }
        if hi - lo < 1e-12 {
            let pad = if lo.abs() > 0.0 { lo.abs() * 0.1 } else { 0.5 };
            return Range { lo: lo - pad, hi: hi + pad };
        }
        let pad = (hi - lo) * 0.05;
        Range { lo: lo - pad, hi: hi + pad }
    }

    fn ticks(&self) -> Vec<f64> {
        let step = nice_step(self.hi - self.lo);
        let first = (self.lo / step - 1e-9).ceil() as i64;
        let last = (self.hi / step + 1e-9).floor() as i64;
        (first..=last).map(|i| i as f64 * step).collect()
    }
}

pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
}

struct Frame {
    x: Range,
    y: Range,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.lo) / (self.x.hi - self.x.lo) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.lo) / (self.y.hi - self.y.lo) * (HEIGHT - TOP - BOTTOM)
    }
}

fn open(chart: &Chart, frame: &Frame) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#,
        W = WIDTH,
        H = HEIGHT
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, num(WIDTH / 2.0), escape(&chart.title));
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(s, r#"<path d="M{} {}H{}M{} {}V{}" stroke="black" fill="none"/>"#, num(x0), num(y1), num(x1), num(x0), num(y1), num(y0));
    for t in frame.x.ticks() {
        let x = frame.px(t);
        let _ = writeln!(s, r#"<path d="M{} {}v5" stroke="black"/>"#, num(x), num(y1));
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, num(x), num(y1 + 18.0), tick_label(t));
    }
    for t in frame.y.ticks() {
        let y = frame.py(t);
        let _ = writeln!(s, r#"<path d="M{} {}h-5" stroke="black"/>"#, num(x0), num(y));
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, num(x0 - 8.0), num(y + 4.0), tick_label(t));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, num((x0 + x1) / 2.0), num(HEIGHT - 18.0), escape(&chart.x_label));
    let _ = writeln!(
        s,
        r#"<text x="18" y="{y}" text-anchor="middle" transform="rotate(-90 18 {y})">{}</text>"#,
        escape(&chart.y_label),
        y = num((y0 + y1) / 2.0)
    );
    s
}

fn tick_label(t: f64) -> String {
    let s = format!("{:.4}", t);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn legend(s: &mut String, entries: &[(String, String)]) {
    for (i, (label, color)) in entries.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        let x = WIDTH - RIGHT + 15.0;
        let _ = writeln!(s, r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/>"#, num(x), num(y - 9.0));
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, num(x + 15.0), num(y), escape(label));
    }
}

/// One dot per `(x, y)` with its own fill colour.
pub fn scatter(chart: &Chart, points: &[(f64, f64)], colors: &[String], legend_entries: &[(String, String)]) -> String {
    let frame = Frame { x: Range::of(points.iter().map(|p| p.0)), y: Range::of(points.iter().map(|p| p.1)) };
    let mut s = open(chart, &frame);
    for ((x, y), c) in points.iter().zip(colors) {
        if x.is_finite() && y.is_finite() {
            let _ = writeln!(s, r#"<circle cx="{}" cy="{}" r="2.5" fill="{c}" fill-opacity="0.8"/>"#, num(frame.px(*x)), num(frame.py(*y)));
        }
    }
    legend(&mut s, legend_entries);
    s.push_str("</svg>\n");
    s
}

/// A named polyline with optional vertical interval bars.
pub struct LineSeries {
    pub label: String,
    /// `(x, y, lo, hi)`.
    pub points: Vec<(f64, f64, f64, f64)>,
}

pub fn lines(chart: &Chart, series: &[LineSeries]) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let frame = Frame {
        x: Range::of(all().map(|p| p.0)),
        y: Range::of(all().flat_map(|p| [p.1, p.2, p.3])),
    };
    let mut s = open(chart, &frame);
    let mut entries = Vec::new();
    for (i, ser) in series.iter().enumerate() {
        let color = category(i);
        entries.push((ser.label.clone(), color.to_string()));
        let path: Vec<String> = ser
            .points
            .iter()
            .enumerate()
            .map(|(j, p)| format!("{}{} {}", if j == 0 { "M" } else { "L" }, num(frame.px(p.0)), num(frame.py(p.1))))
            .collect();
        if !path.is_empty() {
            let _ = writeln!(s, r#"<path d="{}" stroke="{color}" stroke-width="2" fill="none"/>"#, path.join(""));
        }
        for p in &ser.points {
            let x = num(frame.px(p.0));
            let _ = writeln!(s, r#"<path d="M{x} {}V{}" stroke="{color}"/>"#, num(frame.py(p.2)), num(frame.py(p.3)));
            let _ = writeln!(s, r#"<circle cx="{x}" cy="{}" r="3.5" fill="{color}"/>"#, num(frame.py(p.1)));
        }
    }
    legend(&mut s, &entries);
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart() -> Chart {
        Chart { title: "t".into(), x_label: "x".into(), y_label: "y".into() }
    }

    #[test]
    fn ramp_ends() {
        assert_eq!(ramp(0.0), "#440154");
        assert_eq!(ramp(1.0), "#fde725");
        assert_eq!(ramp(f64::NAN), "#440154");
    }

    #[test]
    fn empty_scatter_is_valid() {
        let s = scatter(&chart(), &[], &[], &[]);
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(!s.contains("<circle"));
    }

    #[test]
    fn ticks_cover_range() {
        let r = Range { lo: 0.03, hi: 0.97 };
        let labels: Vec<String> = r.ticks().into_iter().map(tick_label).collect();
        assert_eq!(labels, ["0.2", "0.4", "0.6", "0.8"]);
        let t = Range { lo: -3.2, hi: 41.0 }.ticks();
        assert!(t.contains(&0.0) && t.contains(&40.0));
    }

    #[test]
    fn deterministic_lines() {
        let ser = [LineSeries { label: "a<b".into(), points: vec![(0.1, 0.9, 0.85, 0.95), (0.8, 0.95, 0.9, 0.97)] }];
        let a = lines(&chart(), &ser);
        assert_eq!(a, lines(&chart(), &ser));
        assert!(a.contains("a&lt;b"));
    }
}
