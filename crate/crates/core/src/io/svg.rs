//! Static SVG charts built from the result tables.

use std::fmt::Write;

use super::results::{ResultsDoc, SeparationDoc};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    )
}

fn nice_max(v: f64) -> f64 {
    if !(v > 0.0) {
        return 1.0;
    }
    let step = 10f64.powf(v.log10().floor() - 1.0);
    (v / step).ceil() * step
}

/// Bar chart of the indices with bootstrap error bars and, when present, a
/// dashed line at the irrelevance threshold.
pub fn indices_svg(doc: &ResultsDoc) -> String {
    let n = doc.inputs.len().max(1);
    let top = doc
        .inputs
        .iter()
        .map(|i| i.ci.as_ref().map_or(i.index, |c| c.high.max(i.index)))
        .chain(doc.threshold)
        .fold(0.0, f64::max);
    let top = nice_max(top);
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let plot_w = WIDTH - 2.0 * MARGIN;
    let y = |v: f64| MARGIN + plot_h * (1.0 - v.clamp(0.0, top) / top);
    let slot = plot_w / n as f64;

    let mut s = header(WIDTH, HEIGHT);
    let _ = writeln!(s, "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">Sensitivity indices ({})</text>", WIDTH / 2.0, escape(&doc.method));
    axes(&mut s, MARGIN, MARGIN, plot_w, plot_h);
    for k in 0..=4 {
        let v = top * k as f64 / 4.0;
        let _ = writeln!(s, "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>", MARGIN - 6.0, y(v) + 4.0, short(v));
    }
    for (k, input) in doc.inputs.iter().enumerate() {
        let x0 = MARGIN + slot * (k as f64 + 0.2);
        let bw = slot * 0.6;
        let _ = writeln!(
            s,
            "<rect x=\"{x0:.1}\" y=\"{:.1}\" width=\"{bw:.1}\" height=\"{:.1}\" fill=\"#4878a8\"/>",
            y(input.index),
            y(0.0) - y(input.index)
        );
        if let Some(ci) = &input.ci {
            let xc = x0 + bw / 2.0;
            let (lo, hi) = (y(ci.low), y(ci.high));
            let _ = writeln!(s, "<line x1=\"{xc:.1}\" y1=\"{lo:.1}\" x2=\"{xc:.1}\" y2=\"{hi:.1}\" stroke=\"black\"/>");
            for yy in [lo, hi] {
                let _ = writeln!(
                    s,
                    "<line x1=\"{:.1}\" y1=\"{yy:.1}\" x2=\"{:.1}\" y2=\"{yy:.1}\" stroke=\"black\"/>",
                    xc - bw / 6.0,
                    xc + bw / 6.0
                );
            }
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            x0 + bw / 2.0,
            HEIGHT - MARGIN + 16.0,
            escape(&input.name)
        );
    }
    if let Some(t) = doc.threshold {
        let yt = y(t);
        let _ = writeln!(
            s,
            "<line x1=\"{MARGIN}\" y1=\"{yt:.1}\" x2=\"{:.1}\" y2=\"{yt:.1}\" stroke=\"#c03030\" stroke-dasharray=\"6,4\"/>",
            MARGIN + plot_w
        );
    }
    s.push_str("</svg>\n");
    s
}

fn axes(s: &mut String, x: f64, y: f64, w: f64, h: f64) {
    let _ = writeln!(s, "<line x1=\"{x}\" y1=\"{y}\" x2=\"{x}\" y2=\"{:.1}\" stroke=\"black\"/>", y + h);
    let _ = writeln!(s, "<line x1=\"{x}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>", y + h, x + w, y + h);
}

fn short(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// One panel per input: separation divided by the bound against the class
/// representative.
pub fn separations_svg(rows: &[SeparationDoc], inputs: &[String]) -> String {
    let panels = inputs.len().max(1);
    let cols = panels.min(3);
    let nrows = panels.div_ceil(cols);
    let (pw, ph) = (260.0, 200.0);
    let (w, h) = (pw * cols as f64, ph * nrows as f64 + 30.0);
    let top = nice_max(rows.iter().map(|r| r.value).fold(0.0, f64::max));

    let mut s = header(w, h);
    let _ = writeln!(s, "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">Local separations</text>", w / 2.0);
    for (k, name) in inputs.iter().enumerate() {
        let ox = pw * (k % cols) as f64 + 45.0;
        let oy = 30.0 + ph * (k / cols) as f64 + 20.0;
        let (iw, ih) = (pw - 65.0, ph - 55.0);
        axes(&mut s, ox, oy, iw, ih);
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>", ox + iw / 2.0, oy - 6.0, escape(name));
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>", ox - 4.0, oy + 4.0, short(top));
        let pts: Vec<&SeparationDoc> = rows.iter().filter(|r| &r.input == name).collect();
        let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.x), b.max(r.x)));
        let span = if hi > lo { hi - lo } else { 1.0 };
        let _ = writeln!(s, "<text x=\"{ox:.1}\" y=\"{:.1}\" text-anchor=\"start\">{}</text>", oy + ih + 14.0, short(lo));
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>", ox + iw, oy + ih + 14.0, short(hi));
        for r in pts {
            let cx = ox + iw * (r.x - lo) / span;
            let cy = oy + ih * (1.0 - r.value.clamp(0.0, top) / top);
            let _ = writeln!(s, "<circle cx=\"{cx:.1}\" cy=\"{cy:.1}\" r=\"3\" fill=\"#4878a8\"/>");
        }
    }
    s.push_str("</svg>\n");
    s
}
