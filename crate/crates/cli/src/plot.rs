//! Self-contained SVG charts of wealth percentile bands on a log scale.

use std::fmt::Write;

use betport_core::simulation::BandRow;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
/// Smallest wealth drawn; ruined paths are clipped to it.
const FLOOR: f64 = 1e-6;

struct Frame {
    t0: f64,
    t1: f64,
    lo: f64,
    hi: f64,
}

impl Frame {
    fn new(bands: &[BandRow]) -> Self {
        let t0 = bands.first().map_or(0.0, |b| b.t as f64);
        let mut t1 = bands.last().map_or(1.0, |b| b.t as f64);
        if t1 <= t0 {
            t1 = t0 + 1.0;
        }
        let values = bands.iter().flat_map(|b| [b.p5, b.p95]).map(|v| v.max(FLOOR));
        let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        if !lo.is_finite() {
            (lo, hi) = (1.0, 1.0);
        }
        // at least one decade, centred on flat data
        let (mut l, mut h) = (lo.log10().floor(), hi.log10().ceil());
        if h - l < 1.0 {
            l = (lo.log10() - 0.5).floor();
            h = l + 1.0;
            if hi.log10() > h {
                h += 1.0;
            }
        }
        Self { t0, t1, lo: l, hi: h }
    }

    fn x(&self, t: f64) -> f64 {
        LEFT + (t - self.t0) / (self.t1 - self.t0) * (WIDTH - LEFT - RIGHT)
    }

    fn y(&self, w: f64) -> f64 {
        let v = w.max(FLOOR).log10();
        TOP + (self.hi - v) / (self.hi - self.lo) * (HEIGHT - TOP - BOTTOM)
    }
}

fn area(f: &Frame, bands: &[BandRow], lower: fn(&BandRow) -> f64, upper: fn(&BandRow) -> f64) -> String {
    let mut pts: Vec<String> = bands
        .iter()
        .map(|b| format!("{:.2},{:.2}", f.x(b.t as f64), f.y(upper(b))))
        .collect();
    pts.extend(
        bands
            .iter()
            .rev()
            .map(|b| format!("{:.2},{:.2}", f.x(b.t as f64), f.y(lower(b)))),
    );
    pts.join(" ")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the bands of one strategy: shaded 5-95 and 25-75 percentile
/// areas and the median line, wealth on a logarithmic axis.
pub fn bands_svg(title: &str, bands: &[BandRow]) -> String {
    let f = Frame::new(bands);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    // decade grid lines
    for d in (f.lo as i32)..=(f.hi as i32) {
        let y = f.y(10f64.powi(d));
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"##,
            WIDTH - RIGHT,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let (x0, x1, yb) = (f.x(f.t0), f.x(f.t1), HEIGHT - BOTTOM);
    let _ = writeln!(
        s,
        r##"<line x1="{x0:.2}" y1="{yb:.2}" x2="{x1:.2}" y2="{yb:.2}" stroke="#333"/><line x1="{x0:.2}" y1="{TOP}" x2="{x0:.2}" y2="{yb:.2}" stroke="#333"/>"##
    );
    for t in [f.t0, f.t1] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            f.x(t),
            yb + 16.0,
            t as i64
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">round</text><text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">wealth</text>"#,
        (x0 + x1) / 2.0,
        yb + 34.0,
        (TOP + yb) / 2.0,
        (TOP + yb) / 2.0
    );
    let _ = writeln!(
        s,
        r##"<polygon points="{}" fill="#9ecae1" fill-opacity="0.5"/>"##,
        area(&f, bands, |b| b.p5, |b| b.p95)
    );
    let _ = writeln!(
        s,
        r##"<polygon points="{}" fill="#3182bd" fill-opacity="0.5"/>"##,
        area(&f, bands, |b| b.p25, |b| b.p75)
    );
    let median: Vec<String> = bands
        .iter()
        .map(|b| format!("{:.2},{:.2}", f.x(b.t as f64), f.y(b.p50)))
        .collect();
    if let [only] = median.as_slice() {
        let (x, y) = only.split_once(',').unwrap_or(("0", "0"));
        let _ = writeln!(s, r##"<circle cx="{x}" cy="{y}" r="3" fill="#08306b"/>"##);
    } else {
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#08306b" stroke-width="2"/>"##,
            median.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}
