//! Minimal SVG 1.1 writer shared by the plot renderers. Coordinates are
//! printed with two decimals so output bytes only depend on the input.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) const FONT: &str = "Helvetica, Arial, sans-serif";

pub(crate) fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Formats a pixel coordinate, folding `-0.00` into `0.00`.
pub(crate) fn px(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

pub(crate) struct Svg {
    buf: String,
}

impl Svg {
    pub(crate) fn new(width: u32, height: u32) -> Self {
        let mut buf = String::new();
        buf.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        let _ = writeln!(
            buf,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
        );
        let _ = writeln!(
            buf,
            "<rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"#ffffff\"/>"
        );
        Svg { buf }
    }

    pub(crate) fn open_group(&mut self, id: &str, class: &str, fill: &str) {
        let _ = writeln!(
            self.buf,
            "<g id=\"{}\" class=\"{}\" fill=\"{fill}\">",
            escape(id),
            escape(class)
        );
    }

    pub(crate) fn close_group(&mut self) {
        self.buf.push_str("</g>\n");
    }

    /// A data marker; `title` becomes a hover tooltip.
    pub(crate) fn marker(&mut self, x: f64, y: f64, r: f64, fill: Option<&str>, title: &str) {
        let fill = fill.map(|f| format!(" fill=\"{f}\"")).unwrap_or_default();
        let _ = writeln!(
            self.buf,
            "<circle class=\"marker\" cx=\"{}\" cy=\"{}\" r=\"{}\"{fill}><title>{}</title></circle>",
            px(x),
            px(y),
            px(r),
            escape(title)
        );
    }

    pub(crate) fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.buf,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{stroke}\" stroke-width=\"{}\"/>",
            px(x1),
            px(y1),
            px(x2),
            px(y2),
            px(width)
        );
    }

    pub(crate) fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, stroke: &str) {
        let _ = writeln!(
            self.buf,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{fill}\" stroke=\"{stroke}\"/>",
            px(x),
            px(y),
            px(w),
            px(h)
        );
    }

    pub(crate) fn text(&mut self, x: f64, y: f64, size: u32, anchor: &str, content: &str) {
        let _ = writeln!(
            self.buf,
            "<text x=\"{}\" y=\"{}\" font-family=\"{FONT}\" font-size=\"{size}\" text-anchor=\"{anchor}\">{}</text>",
            px(x),
            px(y),
            escape(content)
        );
    }

    pub(crate) fn rotated_text(&mut self, x: f64, y: f64, size: u32, content: &str) {
        let _ = writeln!(
            self.buf,
            "<text x=\"{0}\" y=\"{1}\" font-family=\"{FONT}\" font-size=\"{size}\" text-anchor=\"middle\" transform=\"rotate(-90 {0} {1})\">{2}</text>",
            px(x),
            px(y),
            escape(content)
        );
    }

    pub(crate) fn finish(mut self) -> String {
        self.buf.push_str("</svg>\n");
        self.buf
    }
}

/// Linear map from a data range onto a pixel span.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub start: f64,
    pub end: f64,
}

impl Axis {
    /// Padded range covering `values`; a degenerate range is widened by 1.
    pub(crate) fn fit(values: impl Iterator<Item = f64>, start: f64, end: f64) -> Self {
        let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if !lo.is_finite() || !hi.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        } else {
            let pad = (hi - lo) * 0.05;
            lo -= pad;
            hi += pad;
        }
        Axis { lo, hi, start, end }
    }

    pub(crate) fn fixed(lo: f64, hi: f64, start: f64, end: f64) -> Self {
        Axis { lo, hi, start, end }
    }

    pub(crate) fn map(&self, v: f64) -> f64 {
        self.start + (v - self.lo) / (self.hi - self.lo) * (self.end - self.start)
    }
}

/// Canvas size and labels for the scatter-type plots.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotOptions {
    pub width: u32,
    pub height: u32,
    pub title: Option<String>,
    pub x_label: String,
    pub y_label: String,
}

impl Default for PlotOptions {
    fn default() -> Self {
        PlotOptions {
            width: 640,
            height: 480,
            title: None,
            x_label: String::new(),
            y_label: String::new(),
        }
    }
}

pub(crate) const MARGIN_LEFT: f64 = 64.0;
pub(crate) const MARGIN_RIGHT: f64 = 24.0;
pub(crate) const MARGIN_TOP: f64 = 36.0;
pub(crate) const MARGIN_BOTTOM: f64 = 52.0;

/// Draws the plot frame, range labels, axis labels and title.
pub(crate) fn frame(svg: &mut Svg, opts: &PlotOptions, xs: Axis, ys: Axis) {
    let (w, h) = (opts.width as f64, opts.height as f64);
    svg.rect(
        MARGIN_LEFT,
        MARGIN_TOP,
        w - MARGIN_LEFT - MARGIN_RIGHT,
        h - MARGIN_TOP - MARGIN_BOTTOM,
        "none",
        "#333333",
    );
    for (v, label) in [(xs.lo, xs.lo), (xs.hi, xs.hi)] {
        svg.text(
            xs.map(v),
            h - MARGIN_BOTTOM + 16.0,
            10,
            "middle",
            &format!("{label:.2}"),
        );
    }
    for (v, label) in [(ys.lo, ys.lo), (ys.hi, ys.hi)] {
        svg.text(MARGIN_LEFT - 6.0, ys.map(v) + 3.0, 10, "end", &format!("{label:.2}"));
    }
    svg.text(
        MARGIN_LEFT + (w - MARGIN_LEFT - MARGIN_RIGHT) / 2.0,
        h - 12.0,
        13,
        "middle",
        &opts.x_label,
    );
    svg.rotated_text(
        18.0,
        MARGIN_TOP + (h - MARGIN_TOP - MARGIN_BOTTOM) / 2.0,
        13,
        &opts.y_label,
    );
    if let Some(title) = &opts.title {
        svg.text(w / 2.0, 22.0, 14, "middle", title);
    }
}

pub(crate) fn write(path: &Path, svg: &str) -> Result<()> {
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escapes_markup() {
        assert_eq!(escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
    }

    #[test]
    fn negative_zero_folded() {
        assert_eq!(px(-0.0001), "0.00");
        assert_eq!(px(1.005), "1.00");
    }

    #[test]
    fn axis_maps_endpoints() {
        let a = Axis::fixed(0.0, 1.0, 10.0, 110.0);
        assert_eq!(a.map(0.0), 10.0);
        assert_eq!(a.map(1.0), 110.0);
        let d = Axis::fit([3.0, 3.0].into_iter(), 0.0, 100.0);
        assert_eq!(d.map(3.0), 50.0);
    }
}
