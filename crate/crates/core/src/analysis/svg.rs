//! Minimal static SVG charts: grouped bars with optional error bars, and
//! scatter plots with an identity line.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 130.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 70.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// One bar: value and optional (low, high) whisker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bar {
    pub value: f64,
    pub whisker: Option<(f64, f64)>,
}

impl Bar {
    pub fn plain(value: f64) -> Self {
        Self { value, whisker: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarSeries {
    pub name: String,
    /// One bar per category; NaN values are skipped.
    pub bars: Vec<Bar>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarChart {
    pub title: String,
    pub y_label: String,
    pub categories: Vec<String>,
    pub series: Vec<BarSeries>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Round axis range covering `lo..hi` plus a tick step.
fn nice_range(lo: f64, hi: f64) -> (f64, f64, f64) {
    let (mut lo, mut hi) = if lo.is_finite() && hi.is_finite() { (lo, hi) } else { (0.0, 1.0) };
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    ((lo / step).floor() * step, (hi / step).ceil() * step, step)
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

struct Axis {
    lo: f64,
    hi: f64,
    step: f64,
    start: f64,
    end: f64,
}

impl Axis {
    fn map(&self, v: f64) -> f64 {
        self.start + (v - self.lo) / (self.hi - self.lo) * (self.end - self.start)
    }

    fn ticks(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step).round() as usize;
        (0..=n).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize + 1 };
    format!("{v:.decimals$}")
}

fn y_axis(out: &mut String, axis: &Axis, label: &str) {
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    for t in axis.ticks() {
        let y = axis.map(t);
        let _ = writeln!(out, r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#e0e0e0"/>"##);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            y + 4.0,
            tick_label(t, axis.step)
        );
    }
    let _ = writeln!(
        out,
        r#"<line x1="{x0}" y1="{}" x2="{x0}" y2="{}" stroke="black"/>"#,
        axis.start, axis.end
    );
    let mid = (axis.start + axis.end) / 2.0;
    let _ = writeln!(
        out,
        r#"<text x="18" y="{mid:.2}" text-anchor="middle" transform="rotate(-90 18 {mid:.2})">{}</text>"#,
        escape(label)
    );
}

impl BarChart {
    pub fn render(&self) -> String {
        let mut out = String::new();
        header(&mut out, &self.title);
        let values = self.series.iter().flat_map(|s| {
            s.bars.iter().flat_map(|b| {
                let (l, h) = b.whisker.unwrap_or((b.value, b.value));
                [b.value, l, h]
            })
        });
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        for v in values.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let (lo, hi, step) = nice_range(lo, hi);
        let axis = Axis {
            lo,
            hi,
            step,
            start: HEIGHT - MARGIN_BOTTOM,
            end: MARGIN_TOP,
        };
        y_axis(&mut out, &axis, &self.y_label);

        let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let n_cat = self.categories.len().max(1) as f64;
        let slot = plot_w / n_cat;
        let n_series = self.series.len().max(1) as f64;
        let bar_w = slot * 0.8 / n_series;
        let zero = axis.map(0.0);
        for (ci, cat) in self.categories.iter().enumerate() {
            let x_slot = MARGIN_LEFT + ci as f64 * slot;
            let cx = x_slot + slot / 2.0;
            let _ = writeln!(
                out,
                r#"<text x="{cx:.2}" y="{:.2}" text-anchor="end" transform="rotate(-45 {cx:.2} {:.2})">{}</text>"#,
                HEIGHT - MARGIN_BOTTOM + 14.0,
                HEIGHT - MARGIN_BOTTOM + 14.0,
                escape(cat)
            );
            for (si, series) in self.series.iter().enumerate() {
                let Some(bar) = series.bars.get(ci) else { continue };
                if !bar.value.is_finite() {
                    continue;
                }
                let x = x_slot + slot * 0.1 + si as f64 * bar_w;
                let y = axis.map(bar.value);
                let _ = writeln!(
                    out,
                    r#"<rect x="{x:.2}" y="{:.2}" width="{bar_w:.2}" height="{:.2}" fill="{}"/>"#,
                    y.min(zero),
                    (y - zero).abs(),
                    PALETTE[si % PALETTE.len()]
                );
                if let Some((l, h)) = bar.whisker.filter(|(l, h)| l.is_finite() && h.is_finite()) {
                    let xm = x + bar_w / 2.0;
                    let _ = writeln!(
                        out,
                        r#"<line x1="{xm:.2}" y1="{:.2}" x2="{xm:.2}" y2="{:.2}" stroke="black"/>"#,
                        axis.map(l),
                        axis.map(h)
                    );
                }
            }
        }
        let _ = writeln!(
            out,
            r#"<line x1="{MARGIN_LEFT}" y1="{zero:.2}" x2="{}" y2="{zero:.2}" stroke="black"/>"#,
            WIDTH - MARGIN_RIGHT
        );
        for (si, series) in self.series.iter().enumerate() {
            let y = MARGIN_TOP + 10.0 + si as f64 * 18.0;
            let x = WIDTH - MARGIN_RIGHT + 15.0;
            let _ = writeln!(
                out,
                r#"<rect x="{x}" y="{:.2}" width="12" height="12" fill="{}"/><text x="{}" y="{:.2}">{}</text>"#,
                y - 10.0,
                PALETTE[si % PALETTE.len()],
                x + 18.0,
                y,
                escape(&series.name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

impl ScatterChart {
    pub fn render(&self) -> String {
        let mut out = String::new();
        header(&mut out, &self.title);
        let finite: Vec<(f64, f64)> = self
            .points
            .iter()
            .copied()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .collect();
        let lo = finite.iter().flat_map(|(x, y)| [*x, *y]).fold(f64::INFINITY, f64::min);
        let hi = finite.iter().flat_map(|(x, y)| [*x, *y]).fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi, step) = nice_range(lo, hi);
        let y_axis_def = Axis {
            lo,
            hi,
            step,
            start: HEIGHT - MARGIN_BOTTOM,
            end: MARGIN_TOP,
        };
        let x_axis_def = Axis {
            lo,
            hi,
            step,
            start: MARGIN_LEFT,
            end: WIDTH - MARGIN_RIGHT,
        };
        y_axis(&mut out, &y_axis_def, &self.y_label);
        let base = HEIGHT - MARGIN_BOTTOM;
        for t in x_axis_def.ticks() {
            let x = x_axis_def.map(t);
            let _ = writeln!(
                out,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                base + 16.0,
                tick_label(t, step)
            );
        }
        let _ = writeln!(
            out,
            r#"<line x1="{MARGIN_LEFT}" y1="{base}" x2="{}" y2="{base}" stroke="black"/>"#,
            WIDTH - MARGIN_RIGHT
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
            HEIGHT - 20.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
            x_axis_def.map(lo),
            y_axis_def.map(lo),
            x_axis_def.map(hi),
            y_axis_def.map(hi)
        );
        for (x, y) in finite {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}" fill-opacity="0.7"/>"#,
                x_axis_def.map(x),
                y_axis_def.map(y),
                PALETTE[0]
            );
        }
        out.push_str("</svg>\n");
        out
    }
}
