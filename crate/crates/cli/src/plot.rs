//! Minimal deterministic SVG rendering. Coordinates are printed at fixed
//! precision and nothing time-dependent is embedded.

use slitsim::WignerGrid;
use std::fmt::Write as _;
use std::path::Path;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: (f64, f64, f64, f64) = (60.0, 20.0, 30.0, 50.0); // left, right, top, bottom
const PALETTE: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

#[derive(Debug, thiserror::Error)]
pub enum PlotError {
    #[error("nothing to plot: {0}")]
    Empty(String),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub dashed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Fixed y range; otherwise taken from the data.
    pub y_range: Option<(f64, f64)>,
    /// Horizontal reference lines `(y, label)`, drawn dashed red.
    pub references: Vec<(f64, String)>,
}

impl LinePlot {
    /// Visibility trace on a `[0, 1]` axis with the vacuum bound marked.
    pub fn visibility(title: &str, x_label: &str, series: Vec<Series>, sql: f64) -> Self {
        LinePlot { title: title.into(), x_label: x_label.into(), y_label: "V".into(), series, y_range: Some((0.0, 1.0)), references: vec![(sql, format!("V_SQL = {sql:.3}"))] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub label: String,
    pub edges: Vec<f64>,
    pub counts: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlotData {
    Lines(LinePlot),
    /// Diverging heatmap, color range symmetric about zero.
    Heatmap { title: String, grid: WignerGrid },
    /// One panel per marginal histogram.
    Histograms { title: String, panels: Vec<Histogram> },
}

pub fn emit_plot(data: &PlotData, path: &Path) -> Result<(), PlotError> {
    let svg = render(data)?;
    std::fs::write(path, svg).map_err(|source| PlotError::Io { path: path.display().to_string(), source })
}

pub fn render(data: &PlotData) -> Result<String, PlotError> {
    match data {
        PlotData::Lines(p) => lines(p),
        PlotData::Heatmap { title, grid } => heatmap(title, grid),
        PlotData::Histograms { title, panels } => histograms(title, panels),
    }
}

fn header(w: f64, h: f64) -> String {
    format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn finite_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        return None;
    }
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    left: f64,
    top: f64,
    w: f64,
    h: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x0) / (self.x1 - self.x0) * self.w
    }
    fn py(&self, y: f64) -> f64 {
        self.top + (1.0 - (y - self.y0) / (self.y1 - self.y0)) * self.h
    }

    fn axes(&self, svg: &mut String, x_label: &str, y_label: &str) {
        let (l, t, w, h) = (self.left, self.top, self.w, self.h);
        let _ = writeln!(svg, "<rect x=\"{l:.2}\" y=\"{t:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"none\" stroke=\"black\"/>");
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let xv = self.x0 + f * (self.x1 - self.x0);
            let yv = self.y0 + f * (self.y1 - self.y0);
            let (xp, yp) = (self.px(xv), self.py(yv));
            let _ = writeln!(svg, "<text x=\"{xp:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>", t + h + 16.0, tick(xv));
            let _ = writeln!(svg, "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>", l - 6.0, yp + 4.0, tick(yv));
        }
        let _ = writeln!(svg, "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>", l + w / 2.0, t + h + 36.0, escape(x_label));
        let _ = writeln!(svg, "<text x=\"14\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.2})\">{}</text>", t + h / 2.0, t + h / 2.0, escape(y_label));
    }
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e4).contains(&a) {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}").trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn lines(p: &LinePlot) -> Result<String, PlotError> {
    if p.series.iter().all(|s| s.x.is_empty()) {
        return Err(PlotError::Empty(p.title.clone()));
    }
    let (x0, x1) = finite_range(p.series.iter().flat_map(|s| s.x.iter().copied())).ok_or_else(|| PlotError::Empty(p.title.clone()))?;
    let (y0, y1) = match p.y_range {
        Some(r) => r,
        None => finite_range(p.series.iter().flat_map(|s| s.y.iter().copied()).chain(p.references.iter().map(|r| r.0))).ok_or_else(|| PlotError::Empty(p.title.clone()))?,
    };
    let (l, r, t, b) = MARGIN;
    let f = Frame { x0, x1, y0, y1, left: l, top: t, w: WIDTH - l - r, h: HEIGHT - t - b };
    let mut svg = header(WIDTH, HEIGHT);
    let _ = writeln!(svg, "<text x=\"{:.2}\" y=\"18\" text-anchor=\"middle\">{}</text>", WIDTH / 2.0, escape(&p.title));
    f.axes(&mut svg, &p.x_label, &p.y_label);
    for (y, label) in &p.references {
        let yp = f.py(*y);
        let _ = writeln!(svg, "<line x1=\"{:.2}\" y1=\"{yp:.2}\" x2=\"{:.2}\" y2=\"{yp:.2}\" stroke=\"red\" stroke-dasharray=\"6 4\"/>", f.left, f.left + f.w);
        let _ = writeln!(svg, "<text x=\"{:.2}\" y=\"{:.2}\" fill=\"red\" text-anchor=\"end\">{}</text>", f.left + f.w - 4.0, yp - 4.0, escape(label));
    }
    for (i, s) in p.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        let mut pen_up = true;
        for (&x, &y) in s.x.iter().zip(&s.y) {
            if !(x.is_finite() && y.is_finite()) {
                pen_up = true;
                continue;
            }
            let _ = write!(d, "{}{:.2} {:.2} ", if pen_up { "M" } else { "L" }, f.px(x), f.py(y.clamp(y0, y1)));
            pen_up = false;
        }
        let dash = if s.dashed { " stroke-dasharray=\"5 3\"" } else { "" };
        let _ = writeln!(svg, "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash}/>", d.trim_end());
        let _ = writeln!(svg, "<text x=\"{:.2}\" y=\"{:.2}\" fill=\"{color}\">{}</text>", f.left + 8.0, f.top + 16.0 + 14.0 * i as f64, escape(&s.label));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Blue (negative) through white to red (positive).
fn diverging(v: f64, scale: f64) -> String {
    let s = (v / scale).clamp(-1.0, 1.0);
    let fade = |c: f64| (255.0 - (255.0 - c) * s.abs()).round() as u8;
    let (r, g, b) = if s >= 0.0 { (fade(178.0), fade(24.0), fade(43.0)) } else { (fade(33.0), fade(102.0), fade(172.0)) };
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn heatmap(title: &str, grid: &WignerGrid) -> Result<String, PlotError> {
    let (nq, np) = (grid.q_axis.len(), grid.p_axis.len());
    if nq == 0 || np == 0 {
        return Err(PlotError::Empty(title.into()));
    }
    let scale = grid.values.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let size = 480.0;
    let (l, t) = (60.0, 30.0);
    let (x0, x1) = (grid.q_axis[0], grid.q_axis[nq - 1]);
    let (y0, y1) = (grid.p_axis[0], grid.p_axis[np - 1]);
    let f = Frame { x0, x1, y0, y1, left: l, top: t, w: size, h: size };
    let mut svg = header(l + size + 100.0, t + size + 50.0);
    let _ = writeln!(svg, "<text x=\"{:.2}\" y=\"18\" text-anchor=\"middle\">{}</text>", l + size / 2.0, escape(title));
    let (cw, ch) = (size / nq as f64, size / np as f64);
    for (i, row) in grid.values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let x = l + i as f64 * cw;
            let y = t + (np - 1 - j) as f64 * ch;
            let _ = writeln!(svg, "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>", cw + 0.05, ch + 0.05, diverging(v, scale));
        }
    }
    f.axes(&mut svg, "q", "p");
    // color bar
    let bx = l + size + 20.0;
    for k in 0..50 {
        let v = scale * (1.0 - 2.0 * k as f64 / 49.0);
        let _ = writeln!(svg, "<rect x=\"{bx:.2}\" y=\"{:.2}\" width=\"16\" height=\"{:.2}\" fill=\"{}\"/>", t + k as f64 * size / 50.0, size / 50.0 + 0.05, diverging(v, scale));
    }
    let _ = writeln!(svg, "<text x=\"{:.2}\" y=\"{:.2}\">{}</text>", bx + 20.0, t + 10.0, tick(scale));
    let _ = writeln!(svg, "<text x=\"{:.2}\" y=\"{:.2}\">0</text>", bx + 20.0, t + size / 2.0 + 4.0);
    let _ = writeln!(svg, "<text x=\"{:.2}\" y=\"{:.2}\">{}</text>", bx + 20.0, t + size, tick(-scale));
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn histograms(title: &str, panels: &[Histogram]) -> Result<String, PlotError> {
    if panels.is_empty() || panels.iter().all(|h| h.counts.is_empty()) {
        return Err(PlotError::Empty(title.into()));
    }
    let (pw, ph) = (220.0, 160.0);
    let cols = panels.len().min(3);
    let rows = panels.len().div_ceil(cols);
    let mut svg = header(cols as f64 * (pw + 70.0) + 20.0, rows as f64 * (ph + 70.0) + 30.0);
    let _ = writeln!(svg, "<text x=\"{:.2}\" y=\"18\" text-anchor=\"middle\">{}</text>", cols as f64 * (pw + 70.0) / 2.0, escape(title));
    for (k, h) in panels.iter().enumerate() {
        if h.edges.len() != h.counts.len() + 1 || h.counts.is_empty() {
            return Err(PlotError::Empty(h.label.clone()));
        }
        let top = h.counts.iter().fold(0.0f64, |a, &c| a.max(c));
        let f = Frame {
            x0: h.edges[0],
            x1: h.edges[h.edges.len() - 1],
            y0: 0.0,
            y1: if top > 0.0 { top } else { 1.0 },
            left: 60.0 + (k % cols) as f64 * (pw + 70.0),
            top: 40.0 + (k / cols) as f64 * (ph + 70.0),
            w: pw,
            h: ph,
        };
        for (i, &c) in h.counts.iter().enumerate() {
            let (xa, xb) = (f.px(h.edges[i]), f.px(h.edges[i + 1]));
            let y = f.py(c);
            let _ = writeln!(svg, "<rect x=\"{xa:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>", xb - xa, f.top + f.h - y, PALETTE[0]);
        }
        f.axes(&mut svg, &h.label, "density");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
