//! Small self-contained SVG charts: polyline series with optional error
//! bars, histogram bars, and vertical reference markers. No dependencies,
//! fixed 860x520 canvas, enough for run inspection.

use std::fmt::Write as _;

const W: f64 = 860.0;
const H: f64 = 520.0;
const ML: f64 = 72.0;
const MR: f64 = 24.0;
const MT: f64 = 42.0;
const MB: f64 = 54.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Symmetric y error bars, one per point, when present.
    pub err: Option<Vec<f64>>,
}

impl Series {
    pub fn line(name: &str, points: Vec<(f64, f64)>) -> Self {
        Series {
            name: name.into(),
            points,
            err: None,
        }
    }
}

/// Bars given as (left edge, right edge, height).
pub struct Bars {
    pub bins: Vec<(f64, f64, f64)>,
}

/// Vertical dashed reference line with a label.
pub struct Marker {
    pub name: String,
    pub x: f64,
}

fn nice_step(raw: f64) -> f64 {
    if !(raw > 0.0) {
        return 1.0;
    }
    let pow = 10f64.powf(raw.log10().floor());
    let m = raw / pow;
    pow * if m < 1.5 {
        1.0
    } else if m < 3.5 {
        2.0
    } else if m < 7.5 {
        5.0
    } else {
        10.0
    }
}

fn fmt_tick(v: f64) -> String {
    if v.abs() < 1e-11 {
        return "0".into();
    }
    if (1e-3..1e5).contains(&v.abs()) {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.1e}")
    }
}

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn from_bounds(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Self {
        let (mut x_lo, mut x_hi) = (x_lo, x_hi);
        let (mut y_lo, mut y_hi) = (y_lo, y_hi);
        if !(x_hi > x_lo) {
            x_lo -= 0.5;
            x_hi += 0.5;
        }
        if !(y_hi > y_lo) {
            y_lo -= 0.5;
            y_hi += 0.5;
        }
        let pad = (y_hi - y_lo) * 0.06;
        Frame {
            x_lo,
            x_hi,
            y_lo: y_lo - pad,
            y_hi: y_hi + pad,
        }
    }

    fn px(&self, x: f64) -> f64 {
        ML + (x - self.x_lo) / (self.x_hi - self.x_lo) * (W - ML - MR)
    }

    fn py(&self, y: f64) -> f64 {
        H - MB - (y - self.y_lo) / (self.y_hi - self.y_lo) * (H - MT - MB)
    }
}

fn open_svg(out: &mut String, title: &str) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" \
         font-family=\"sans-serif\" font-size=\"13\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        W / 2.0,
        xml(title)
    );
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let _ = write!(
        out,
        "<rect x=\"{ML}\" y=\"{MT}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"#333\"/>\n",
        W - ML - MR,
        H - MT - MB
    );
    let xs = nice_step((f.x_hi - f.x_lo) / 5.0);
    let mut t = (f.x_lo / xs).ceil() * xs;
    while t <= f.x_hi + 1e-9 * xs {
        let px = f.px(t);
        let _ = write!(
            out,
            "<line x1=\"{px:.1}\" y1=\"{:.1}\" x2=\"{px:.1}\" y2=\"{:.1}\" stroke=\"#ccc\"/>\n\
             <text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            MT,
            H - MB,
            H - MB + 18.0,
            fmt_tick(t)
        );
        t += xs;
    }
    let ys = nice_step((f.y_hi - f.y_lo) / 5.0);
    let mut t = (f.y_lo / ys).ceil() * ys;
    while t <= f.y_hi + 1e-9 * ys {
        let py = f.py(t);
        let _ = write!(
            out,
            "<line x1=\"{ML}\" y1=\"{py:.1}\" x2=\"{:.1}\" y2=\"{py:.1}\" stroke=\"#ccc\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
            W - MR,
            ML - 6.0,
            py + 4.0,
            fmt_tick(t)
        );
        t += ys;
    }
    let _ = write!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>\n",
        (ML + W - MR) / 2.0,
        H - 12.0,
        xml(x_label),
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0,
        xml(y_label)
    );
}

fn xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Polyline chart; series indexed into a fixed palette.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    markers: &[Marker],
) -> String {
    let pts = series.iter().flat_map(|s| s.points.iter());
    let mut x_lo = f64::INFINITY;
    let mut x_hi = f64::NEG_INFINITY;
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for &(x, y) in pts {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    for s in series {
        if let Some(err) = &s.err {
            for (&(_, y), &e) in s.points.iter().zip(err) {
                y_lo = y_lo.min(y - e);
                y_hi = y_hi.max(y + e);
            }
        }
    }
    for m in markers {
        x_lo = x_lo.min(m.x);
        x_hi = x_hi.max(m.x);
    }
    if !x_lo.is_finite() {
        (x_lo, x_hi, y_lo, y_hi) = (0.0, 1.0, 0.0, 1.0);
    }
    let f = Frame::from_bounds(x_lo, x_hi, y_lo.min(0.0), y_hi);
    let mut out = String::new();
    open_svg(&mut out, title);
    axes(&mut out, &f, x_label, y_label);
    draw_markers(&mut out, &f, markers);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: String = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1} ", f.px(x), f.py(y)))
            .collect();
        let _ = write!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>\n",
            path.trim_end()
        );
        if let Some(err) = &s.err {
            for (&(x, y), &e) in s.points.iter().zip(err) {
                let _ = write!(
                    out,
                    "<line x1=\"{0:.1}\" y1=\"{1:.1}\" x2=\"{0:.1}\" y2=\"{2:.1}\" stroke=\"{color}\"/>\n\
                     <circle cx=\"{0:.1}\" cy=\"{3:.1}\" r=\"3\" fill=\"{color}\"/>\n",
                    f.px(x),
                    f.py(y - e),
                    f.py(y + e),
                    f.py(y)
                );
            }
        }
        let _ = write!(
            out,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"14\" height=\"4\" fill=\"{color}\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\">{}</text>\n",
            W - MR - 170.0,
            MT + 14.0 + 18.0 * i as f64,
            W - MR - 150.0,
            MT + 20.0 + 18.0 * i as f64,
            xml(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Histogram with optional reference markers.
pub fn histogram_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    bars: &Bars,
    markers: &[Marker],
) -> String {
    let mut x_lo = f64::INFINITY;
    let mut x_hi = f64::NEG_INFINITY;
    let mut y_hi: f64 = 0.0;
    for &(l, r, h) in &bars.bins {
        x_lo = x_lo.min(l);
        x_hi = x_hi.max(r);
        y_hi = y_hi.max(h);
    }
    for m in markers {
        x_lo = x_lo.min(m.x);
        x_hi = x_hi.max(m.x);
    }
    if !x_lo.is_finite() {
        (x_lo, x_hi, y_hi) = (0.0, 1.0, 1.0);
    }
    let f = Frame::from_bounds(x_lo, x_hi, 0.0, y_hi);
    let mut out = String::new();
    open_svg(&mut out, title);
    axes(&mut out, &f, x_label, y_label);
    for &(l, r, h) in &bars.bins {
        if h <= 0.0 {
            continue;
        }
        let _ = write!(
            out,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" \
             fill=\"#1f77b4\" fill-opacity=\"0.7\" stroke=\"#145a8a\" stroke-width=\"0.5\"/>\n",
            f.px(l),
            f.py(h),
            (f.px(r) - f.px(l)).max(0.5),
            f.py(0.0) - f.py(h)
        );
    }
    draw_markers(&mut out, &f, markers);
    out.push_str("</svg>\n");
    out
}

fn draw_markers(out: &mut String, f: &Frame, markers: &[Marker]) {
    for (i, m) in markers.iter().enumerate() {
        let px = f.px(m.x);
        let _ = write!(
            out,
            "<line x1=\"{px:.1}\" y1=\"{MT}\" x2=\"{px:.1}\" y2=\"{:.1}\" \
             stroke=\"{}\" stroke-dasharray=\"6 4\" stroke-width=\"1.5\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" fill=\"{}\">{}</text>\n",
            H - MB,
            PALETTE[(i + 1) % PALETTE.len()],
            px + 5.0,
            MT + 16.0 + 16.0 * i as f64,
            PALETTE[(i + 1) % PALETTE.len()],
            xml(&m.name)
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_is_wellformed_and_contains_series() {
        let s = Series::line("alpha", vec![(0.0, 0.0), (1.0, 2.0), (2.0, 1.0)]);
        let svg = line_chart("demo", "x", "y", &[s], &[]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("alpha"));
    }

    #[test]
    fn histogram_draws_bars_and_markers() {
        let bars = Bars {
            bins: vec![(0.0, 0.5, 3.0), (0.5, 1.0, 1.0)],
        };
        let svg = histogram_chart(
            "h",
            "t",
            "count",
            &bars,
            &[Marker {
                name: "ref".into(),
                x: 0.75,
            }],
        );
        assert!(svg.matches("<rect").count() >= 3);
        assert!(svg.contains("stroke-dasharray"));
    }

    #[test]
    fn tick_step_is_a_nice_number() {
        assert_eq!(nice_step(0.23), 0.2);
        assert_eq!(nice_step(4.2), 5.0);
        assert_eq!(nice_step(80.0), 100.0);
    }
}
