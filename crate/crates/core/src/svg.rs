//! Minimal static SVG line charts. Output depends only on the inputs, so
//! figures are byte-stable across runs.

use std::fmt::Write;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub lines: Vec<Line>,
    pub width: u32,
    pub height: u32,
    /// Lines longer than this are thinned to keep files small.
    pub max_points: usize,
}

impl Chart {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            lines: Vec::new(),
            width: 720,
            height: 420,
            max_points: 1500,
        }
    }

    pub fn line(mut self, label: impl Into<String>, xs: Vec<f64>, ys: Vec<f64>) -> Self {
        self.lines.push(Line { label: label.into(), xs, ys });
        self
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Up to `n` evenly spread ticks on a 1-2-5 grid.
fn ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![lo];
    }
    let raw = span / n.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= n as f64).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

pub fn render(chart: &Chart) -> String {
    let (w, h) = (chart.width as f64, chart.height as f64);
    let (ml, mr, mt, mb) = (70.0, 160.0, 40.0, 50.0);
    let pw = w - ml - mr;
    let ph = h - mt - mb;

    let finite = |v: &&f64| v.is_finite();
    let xs = chart.lines.iter().flat_map(|l| l.xs.iter()).filter(finite);
    let ys = chart.lines.iter().flat_map(|l| l.ys.iter()).filter(finite);
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (mut y0, mut y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let pad = (y1 - y0) * 0.05;
    y0 -= pad;
    y1 += pad;
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| mt + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#, ml + pw / 2.0, escape(&chart.title));
    for t in ticks(y0, y1, 6) {
        let y = sy(t);
        let _ = writeln!(s, r##"<line x1="{ml:.1}" x2="{:.1}" y1="{y:.1}" y2="{y:.1}" stroke="#e5e5e5"/>"##, ml + pw);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, ml - 6.0, y + 4.0, fmt_tick(t));
    }
    for t in ticks(x0, x1, 8) {
        let x = sx(t);
        let _ = writeln!(s, r##"<line x1="{x:.1}" x2="{x:.1}" y1="{mt:.1}" y2="{:.1}" stroke="#f0f0f0"/>"##, mt + ph);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, mt + ph + 16.0, fmt_tick(t));
    }
    let _ = writeln!(s, r#"<rect x="{ml:.1}" y="{mt:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, ml + pw / 2.0, h - 10.0, escape(&chart.x_label));
    let _ = writeln!(
        s,
        r#"<text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        mt + ph / 2.0,
        escape(&chart.y_label)
    );

    for (i, line) in chart.lines.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let n = line.xs.len().min(line.ys.len());
        let step = n.div_ceil(chart.max_points.max(2)).max(1);
        let mut pts = String::new();
        for k in (0..n).step_by(step).chain(if n > 0 && (n - 1) % step != 0 { Some(n - 1) } else { None }) {
            let (x, y) = (line.xs[k], line.ys[k]);
            if x.is_finite() && y.is_finite() {
                let _ = write!(pts, "{:.1},{:.1} ", sx(x), sy(y));
            }
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.4" points="{}"/>"#,
            pts.trim_end()
        );
        let ly = mt + 14.0 + 18.0 * i as f64;
        let lx = ml + pw + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx:.1}" x2="{:.1}" y1="{ly:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&line.label));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_escaped() {
        let c = Chart::new("a < b", "t", "err")
            .line("MA & pred", vec![1.0, 2.0, 3.0], vec![0.1, 0.3, 0.2])
            .line("flat", vec![1.0, 3.0], vec![0.2, 0.2]);
        let a = render(&c);
        assert_eq!(a, render(&c));
        assert!(a.contains("a &lt; b") && a.contains("MA &amp; pred"));
        assert_eq!(a.matches("<polyline").count(), 2);
    }

    #[test]
    fn thins_long_lines() {
        let xs: Vec<f64> = (0..10_000).map(f64::from).collect();
        let c = Chart::new("", "", "").line("l", xs.clone(), xs);
        let svg = render(&c);
        let pts = svg.lines().find(|l| l.starts_with("<polyline")).unwrap().matches(',').count();
        assert!(pts <= 1501);
    }

    #[test]
    fn empty_chart_renders() {
        assert!(render(&Chart::new("empty", "x", "y")).ends_with("</svg>\n"));
    }

    #[test]
    fn tick_grid() {
        assert_eq!(ticks(0.0, 1.0, 5), vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
    }
}
