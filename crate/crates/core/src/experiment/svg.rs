//! Self-contained SVG plots with a fixed viewport.
//!
//! Every number is printed with a fixed precision so the output is a pure
//! function of the plotted data.

use std::fmt::Write;

use nalgebra::DMatrix;

use crate::linmodel::TimeSeries;
use crate::rankboot::RankDecision;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

/// Side length of the square heatmap area.
const HEATMAP_SIZE: f64 = 600.0;
const MAX_PATH_POINTS: usize = 500;

const NEGATIVE: [f64; 3] = [33.0, 102.0, 172.0];
const NEUTRAL: [f64; 3] = [247.0, 247.0, 247.0];
const POSITIVE: [f64; 3] = [178.0, 24.0, 43.0];

const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

/// Diverging colour for `value / scale` clamped to `[-1, 1]`.
pub fn diverging_color(value: f64, scale: f64) -> String {
    let t = if scale > 0.0 && value.is_finite() {
        (value / scale).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    let end = if t < 0.0 { NEGATIVE } else { POSITIVE };
    let w = t.abs();
    let c: Vec<u8> = (0..3)
        .map(|i| (NEUTRAL[i] + (end[i] - NEUTRAL[i]) * w).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn header(out: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{width:.0}" height="{height:.0}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        width / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Heatmap of `m[order[i], order[j]]`. The colour scale is symmetric around
/// zero with its end points at the largest absolute entry.
pub fn heatmap(m: &DMatrix<f64>, order: &[usize], title: &str) -> String {
    let n = order.len();
    let scale = order
        .iter()
        .flat_map(|&i| order.iter().map(move |&j| (i, j)))
        .map(|(i, j)| m[(i, j)].abs())
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let left = 40.0;
    let top = 40.0;
    let bar = 20.0;
    let width = left + HEATMAP_SIZE + 30.0 + bar + 70.0;
    let height = top + HEATMAP_SIZE + 30.0;
    let cell = if n == 0 { 0.0 } else { HEATMAP_SIZE / n as f64 };

    let mut out = String::new();
    header(&mut out, width, height, title);
    let _ = writeln!(out, r#"<g shape-rendering="crispEdges">"#);
    for (row, &i) in order.iter().enumerate() {
        for (col, &j) in order.iter().enumerate() {
            let _ = writeln!(
                out,
                r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
                left + col as f64 * cell,
                top + row as f64 * cell,
                cell,
                cell,
                diverging_color(m[(i, j)], scale)
            );
        }
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(
        out,
        r#"<rect x="{left:.1}" y="{top:.1}" width="{HEATMAP_SIZE:.1}" height="{HEATMAP_SIZE:.1}" fill="none" stroke="black"/>"#
    );

    // colour bar
    let bx = left + HEATMAP_SIZE + 30.0;
    let steps = 50;
    let h = HEATMAP_SIZE / steps as f64;
    for s in 0..steps {
        let t = 1.0 - 2.0 * (s as f64 + 0.5) / steps as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{bx:.1}" y="{:.3}" width="{bar:.1}" height="{h:.3}" fill="{}"/>"#,
            top + s as f64 * h,
            diverging_color(t, 1.0)
        );
    }
    for (t, y) in [(scale, top), (0.0, top + HEATMAP_SIZE / 2.0), (-scale, top + HEATMAP_SIZE)] {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" dominant-baseline="middle">{}</text>"#,
            bx + bar + 5.0,
            y,
            format_tick(t)
        );
    }
    out.push_str("</svg>\n");
    out
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let (x0, x1) = if x1 > x0 { (x0, x1) } else { (x0 - 0.5, x0 + 0.5) };
        let (y0, y1) = if y1 > y0 { (y0, y1) } else { (y0 - 0.5, y0 + 0.5) };
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }

    fn axes(&self, out: &mut String, xlabel: &str, ylabel: &str, ytick: impl Fn(f64) -> String) {
        let (l, r) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
        let (t, b) = (MARGIN_TOP, HEIGHT - MARGIN_BOTTOM);
        let _ = writeln!(
            out,
            r#"<rect x="{l:.1}" y="{t:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
            r - l,
            b - t
        );
        for k in 0..=4 {
            let x = self.x0 + (self.x1 - self.x0) * k as f64 / 4.0;
            let y = self.y0 + (self.y1 - self.y0) * k as f64 / 4.0;
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                self.px(x),
                b + 16.0,
                format_tick(x)
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end" dominant-baseline="middle">{}</text>"#,
                l - 6.0,
                self.py(y),
                ytick(y)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            (l + r) / 2.0,
            HEIGHT - 12.0,
            escape(xlabel)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            (t + b) / 2.0,
            (t + b) / 2.0,
            escape(ylabel)
        );
    }
}

fn format_tick(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 {
        "0".into()
    } else if !(1e-2..1e4).contains(&a) {
        format!("{v:.2e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn polyline(out: &mut String, points: &[(f64, f64)], color: &str, width: f64) {
    let mut pts = String::new();
    for (i, (x, y)) in points.iter().enumerate() {
        if i > 0 {
            pts.push(' ');
        }
        let _ = write!(pts, "{x:.2},{y:.2}");
    }
    let _ = writeln!(
        out,
        r#"<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width:.1}"/>"#
    );
}

/// Sample paths of the selected coordinates against time. Long series are
/// thinned to at most a few hundred points per path.
pub fn sample_paths(series: &TimeSeries, coords: &[usize], title: &str) -> String {
    let n = series.len();
    let stride = n.div_ceil(MAX_PATH_POINTS).max(1);
    let times: Vec<usize> = (0..=n).step_by(stride).chain(std::iter::once(n)).collect();
    let value = |c: usize, t: usize| {
        if t == 0 {
            series.y0()[c]
        } else {
            series.path()[(c, t - 1)]
        }
    };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &c in coords {
        for &t in &times {
            let v = value(c, t);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    let frame = Frame::new(0.0, n as f64, lo, hi);
    let mut out = String::new();
    header(&mut out, WIDTH, HEIGHT, title);
    frame.axes(&mut out, "n", "y", format_tick);
    for (k, &c) in coords.iter().enumerate() {
        let mut pts: Vec<(f64, f64)> = times.iter().map(|&t| (frame.px(t as f64), frame.py(value(c, t)))).collect();
        pts.dedup();
        polyline(&mut out, &pts, PALETTE[k % PALETTE.len()], 1.0);
    }
    out.push_str("</svg>\n");
    out
}

/// Observed trace statistics per tested rank on a log scale, with the region
/// below the bootstrap critical value shaded and the selected rank marked.
pub fn rank_trajectory(decision: &RankDecision, true_rank: Option<usize>) -> String {
    let records: Vec<_> = decision
        .per_rank
        .iter()
        .chain(&decision.extended)
        .filter(|r| r.rank < decision.dim)
        .collect();
    let logs: Vec<f64> = records
        .iter()
        .flat_map(|r| [r.observed, r.quantile])
        .filter(|v| *v > 0.0 && v.is_finite())
        .map(f64::log10)
        .collect();
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo.is_finite() { (lo.floor(), hi.ceil()) } else { (0.0, 1.0) };
    let last = records.iter().map(|r| r.rank).max().unwrap_or(0).max(decision.selected_rank);
    let frame = Frame::new(0.0, last.max(1) as f64, lo, hi);
    let clamp = |v: f64| if v > 0.0 && v.is_finite() { v.log10().max(lo) } else { lo };

    let mut out = String::new();
    header(&mut out, WIDTH, HEIGHT, "Trace statistic by hypothesised rank");
    frame.axes(&mut out, "rank r", "trace statistic", |y| format_tick(10f64.powf(y)));

    if !records.is_empty() {
        let mut band = String::new();
        for r in &records {
            let _ = write!(band, "{:.2},{:.2} ", frame.px(r.rank as f64), frame.py(clamp(r.quantile)));
        }
        for r in records.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", frame.px(r.rank as f64), frame.py(lo));
        }
        let _ = writeln!(
            out,
            r##"<polygon points="{}" fill="#9ecae1" fill-opacity="0.5" stroke="none"/>"##,
            band.trim_end()
        );
        let pts: Vec<(f64, f64)> = records
            .iter()
            .map(|r| (frame.px(r.rank as f64), frame.py(clamp(r.observed))))
            .collect();
        polyline(&mut out, &pts, "black", 1.5);
        for (x, y) in pts {
            let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="black"/>"#);
        }
    }
    let mut marker = |rank: usize, color: &str, label: &str| {
        let x = frame.px(rank as f64);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{MARGIN_TOP:.1}" x2="{x:.2}" y2="{:.1}" stroke="{color}" stroke-dasharray="4 3"/>"#,
            HEIGHT - MARGIN_BOTTOM
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.1}" fill="{color}">{label} {rank}</text>"#,
            x + 4.0,
            MARGIN_TOP + 14.0
        );
    };
    marker(decision.selected_rank, "#d95f02", "selected");
    if let Some(t) = true_rank.filter(|&t| t as f64 <= frame.x1) {
        marker(t, "#7570b3", "true");
    }
    out.push_str("</svg>\n");
    out
}
