//! Static two-panel SVG: the series on top, D(t) below, sharing the time axis.

use std::fmt::Write as _;

use ratio_cpd::{ScoreSeries, TimeSeries};

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 560.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const PANEL_HEIGHT: f64 = 220.0;
const TOPS: [f64; 2] = [30.0, 310.0];
const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#17becf"];

#[derive(Clone, Copy, Debug, PartialEq)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if lo == hi {
            Self {
                lo: lo - 0.5,
                hi: hi + 0.5,
            }
        } else {
            let pad = 0.05 * (hi - lo);
            Self {
                lo: lo - pad,
                hi: hi + pad,
            }
        }
    }

    fn frac(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }
}

struct Panel {
    top: f64,
    x: Range,
    y: Range,
}

impl Panel {
    fn px(&self, t: f64) -> f64 {
        LEFT + self.x.frac(t) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        self.top + (1.0 - self.y.frac(v)) * PANEL_HEIGHT
    }

    fn open(&self, out: &mut String, name: &str, title: &str) {
        let _ = writeln!(
            out,
            r#"<g class="panel" id="{name}" data-x-min="{}" data-x-max="{}" data-y-min="{}" data-y-max="{}">"#,
            self.x.lo, self.x.hi, self.y.lo, self.y.hi
        );
        let right = WIDTH - RIGHT;
        let bottom = self.top + PANEL_HEIGHT;
        let _ = writeln!(
            out,
            r##"<rect x="{LEFT}" y="{}" width="{}" height="{PANEL_HEIGHT}" fill="none" stroke="#444"/>"##,
            self.top,
            right - LEFT
        );
        let _ = writeln!(
            out,
            r#"<text x="{LEFT}" y="{}" font-size="13">{title}</text>"#,
            self.top - 8.0
        );
        for (v, anchor_y) in [(self.y.hi, self.top + 10.0), (self.y.lo, bottom)] {
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{anchor_y}" font-size="11" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                tick(v)
            );
        }
        for (t, anchor) in [(self.x.lo, "start"), (self.x.hi, "end")] {
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" font-size="11" text-anchor="{anchor}">{}</text>"#,
                self.px(t),
                bottom + 14.0,
                tick(t)
            );
        }
    }

    fn markers(&self, out: &mut String, change_points: &[usize]) {
        for &cp in change_points {
            let t = cp as f64;
            if t < self.x.lo || t > self.x.hi {
                continue;
            }
            let x = self.px(t);
            let _ = writeln!(
                out,
                r##"<line class="change-point" x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="#d62728" stroke-dasharray="4 3"/>"##,
                self.top,
                self.top + PANEL_HEIGHT
            );
        }
    }

    fn polyline(&self, out: &mut String, points: &[(f64, f64)], colour: &str) {
        let _ = write!(
            out,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1" points=""#
        );
        for &(t, v) in points {
            let _ = write!(out, "{:.2},{:.2} ", self.px(t), self.py(v));
        }
        let _ = writeln!(out, r#""/>"#);
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

/// Keeps the per-bucket minimum and maximum so spikes survive thinning.
fn decimate(points: &[(f64, f64)], buckets: usize) -> Vec<(f64, f64)> {
    if points.len() <= 2 * buckets {
        return points.to_vec();
    }
    let size = points.len().div_ceil(buckets);
    let mut out = Vec::with_capacity(2 * buckets);
    for chunk in points.chunks(size) {
        let lo = chunk.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        let hi = chunk.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        if lo.0 <= hi.0 {
            out.extend([*lo, *hi]);
        } else {
            out.extend([*hi, *lo]);
        }
    }
    out
}

pub fn render(series: &TimeSeries, scores: &ScoreSeries, change_points: &[usize]) -> String {
    let last = (series.len().saturating_sub(1)).max(scores.entries.last().map_or(0, |e| e.0)) as f64;
    let x = Range {
        lo: 0.0,
        hi: last.max(1.0),
    };
    let top = Panel {
        top: TOPS[0],
        x,
        y: Range::of(series.values().as_slice().iter().copied()),
    };
    let bottom = Panel {
        top: TOPS[1],
        x,
        y: Range::of(scores.entries.iter().map(|e| e.1)),
    };
    let buckets = (WIDTH - LEFT - RIGHT) as usize;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);

    top.open(&mut out, "series", "x(t)");
    top.markers(&mut out, change_points);
    for j in 0..series.dim() {
        let pts: Vec<(f64, f64)> = series
            .column(j)
            .into_iter()
            .enumerate()
            .map(|(t, v)| (t as f64, v))
            .collect();
        top.polyline(&mut out, &decimate(&pts, buckets), PALETTE[j % PALETTE.len()]);
    }
    let _ = writeln!(out, "</g>");

    bottom.open(&mut out, "score", "D(t)");
    bottom.markers(&mut out, change_points);
    let pts: Vec<(f64, f64)> = scores.entries.iter().map(|&(t, d)| (t as f64, d)).collect();
    bottom.polyline(&mut out, &decimate(&pts, buckets), "#000");
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, "</svg>");
    out
}
