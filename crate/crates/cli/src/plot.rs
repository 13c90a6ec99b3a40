//! Hand-written SVG line charts. Output depends only on the data, so the
//! same trajectory always gives the same bytes.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Draw a dot at each point in addition to the line.
    pub markers: bool,
}

pub struct HLine {
    pub label: String,
    pub y: f64,
}

pub struct Circle {
    pub label: String,
    pub center: (f64, f64),
    pub radius: f64,
}

#[derive(Default)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub hlines: Vec<HLine>,
    pub circles: Vec<Circle>,
    /// Same data scale on both axes.
    pub equal_aspect: bool,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

/// Tick spacing of 1, 2 or 5 times a power of ten giving about five ticks.
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
    if !(hi - lo > 1e-12 * (1.0 + lo.abs().max(hi.abs()))) {
        let c = 0.5 * (lo + hi);
        let h = 0.5 * (1.0 + c.abs());
        return (c - h, c + h);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Short tick label: trailing zeros trimmed, `-0` printed as `0`.
fn tick_label(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let s = format!("{:.*}", decimals, v);
    if s.chars().all(|c| c == '-' || c == '0' || c == '.') {
        "0".into()
    } else {
        s
    }
}

impl Chart {
    fn frame(&self) -> Frame {
        let (mut xl, mut xh, mut yl, mut yh) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        let mut take = |x: f64, y: f64| {
            if x.is_finite() && y.is_finite() {
                xl = xl.min(x);
                xh = xh.max(x);
                yl = yl.min(y);
                yh = yh.max(y);
            }
        };
        for s in &self.series {
            for &(x, y) in &s.points {
                take(x, y);
            }
        }
        for c in &self.circles {
            take(c.center.0 - c.radius, c.center.1 - c.radius);
            take(c.center.0 + c.radius, c.center.1 + c.radius);
        }
        if !xl.is_finite() {
            (xl, xh, yl, yh) = (0.0, 1.0, 0.0, 1.0);
        }
        for h in &self.hlines {
            yl = yl.min(h.y);
            yh = yh.max(h.y);
        }
        let (x0, x1) = padded(xl, xh);
        let (y0, y1) = padded(yl, yh);
        let mut f = Frame { x0, x1, y0, y1 };
        if self.equal_aspect {
            let sx = (x1 - x0) / (WIDTH - LEFT - RIGHT);
            let sy = (y1 - y0) / (HEIGHT - TOP - BOTTOM);
            let s = sx.max(sy);
            let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
            let hw = 0.5 * s * (WIDTH - LEFT - RIGHT);
            let hh = 0.5 * s * (HEIGHT - TOP - BOTTOM);
            f = Frame {
                x0: cx - hw,
                x1: cx + hw,
                y0: cy - hh,
                y1: cy + hh,
            };
        }
        f
    }

    pub fn render(&self) -> String {
        let f = self.frame();
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        self.axes(&mut s, &f);
        let _ = writeln!(
            s,
            r#"<clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{:.1}" height="{:.1}"/></clipPath>"#,
            WIDTH - LEFT - RIGHT,
            HEIGHT - TOP - BOTTOM
        );
        let _ = writeln!(s, r#"<g clip-path="url(#plot)">"#);
        for h in &self.hlines {
            let y = f.py(h.y);
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#555" stroke-dasharray="6 4"/>"##,
                WIDTH - RIGHT
            );
            let _ = writeln!(
                s,
                r##"<text x="{:.2}" y="{:.2}" text-anchor="end" fill="#555">{}</text>"##,
                WIDTH - RIGHT - 4.0,
                y - 4.0,
                escape(&h.label)
            );
        }
        for c in &self.circles {
            let (cx, cy) = (f.px(c.center.0), f.py(c.center.1));
            let r = (f.px(c.center.0 + c.radius) - cx).abs();
            let _ = writeln!(
                s,
                r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r:.2}" fill="#ffbb78" fill-opacity="0.5" stroke="#ff7f0e"/>"##
            );
            let _ = writeln!(
                s,
                r##"<text x="{:.2}" y="{:.2}" fill="#ff7f0e">{}</text>"##,
                cx + r + 4.0,
                cy - r - 2.0,
                escape(&c.label)
            );
        }
        for (i, ser) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<String> = ser
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#,
                pts.join(" ")
            );
            if ser.markers {
                for p in &pts {
                    let (x, y) = p.split_once(',').unwrap();
                    let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="2.5" fill="{color}"/>"#);
                }
            }
        }
        let _ = writeln!(s, "</g>");
        self.legend(&mut s);
        s.push_str("</svg>\n");
        s
    }

    fn axes(&self, s: &mut String, f: &Frame) {
        let (l, r, t, b) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
        let _ = writeln!(
            s,
            r#"<rect x="{l}" y="{t}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
            r - l,
            b - t
        );
        let step = tick_step(f.x1 - f.x0);
        let mut v = (f.x0 / step).ceil() * step;
        while v <= f.x1 {
            let x = f.px(v);
            let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{t}" x2="{x:.2}" y2="{b}" stroke="#e5e5e5"/>"##);
            let _ = writeln!(
                s,
                r#"<text x="{x:.2}" y="{:.1}" text-anchor="middle">{}</text>"#,
                b + 16.0,
                tick_label(v, step)
            );
            v += step;
        }
        let step = tick_step(f.y1 - f.y0);
        let mut v = (f.y0 / step).ceil() * step;
        while v <= f.y1 {
            let y = f.py(v);
            let _ = writeln!(s, r##"<line x1="{l}" y1="{y:.2}" x2="{r}" y2="{y:.2}" stroke="#e5e5e5"/>"##);
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"#,
                l - 6.0,
                y + 4.0,
                tick_label(v, step)
            );
            v += step;
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            0.5 * (l + r),
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text transform="translate(18 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
            0.5 * (t + b),
            escape(&self.y_label)
        );
    }

    fn legend(&self, s: &mut String) {
        for (i, ser) in self.series.iter().enumerate() {
            let y = TOP + 16.0 + 16.0 * i as f64;
            let x = LEFT + 10.0;
            let color = PALETTE[i % PALETTE.len()];
            let _ = writeln!(
                s,
                r#"<line x1="{x}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}" stroke-width="2"/>"#,
                y - 4.0,
                x + 18.0,
                y - 4.0
            );
            let _ = writeln!(s, r#"<text x="{:.1}" y="{y:.1}">{}</text>"#, x + 24.0, escape(&ser.label));
        }
    }
}
