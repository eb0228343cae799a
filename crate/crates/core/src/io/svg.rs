//! Static SVG plots: point scatters and persistence diagrams.

use std::fmt::Write;

use crate::persistence::PersistenceDiagram;

const SIZE: f64 = 400.0;
const MARGIN: f64 = 30.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Maps data ranges to a square plotting area.
struct Frame {
    lo: [f64; 2],
    scale: f64,
    x0: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = [f64; 2]>, x0: f64) -> Frame {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for c in 0..2 {
                lo[c] = lo[c].min(p[c]);
                hi[c] = hi[c].max(p[c]);
            }
        }
        if !lo[0].is_finite() {
            lo = [0.0, 0.0];
            hi = [1.0, 1.0];
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
        Frame {
            lo,
            scale: (SIZE - 2.0 * MARGIN) / span,
            x0,
        }
    }

    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        (
            self.x0 + MARGIN + (p[0] - self.lo[0]) * self.scale,
            SIZE - MARGIN - (p[1] - self.lo[1]) * self.scale,
        )
    }
}

/// Blue-to-red color for a value in `[0, 1]`.
fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (255.0 * t) as u8;
    let b = (255.0 * (1.0 - t)) as u8;
    format!("#{r:02x}40{b:02x}")
}

fn header(width: f64, title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{SIZE}\" viewBox=\"0 0 {width} {SIZE}\">\n\
         <rect width=\"{width}\" height=\"{SIZE}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        width / 2.0,
        escape(title)
    )
}

fn scatter_group(out: &mut String, points: &[[f64; 2]], values: Option<&[f64]>, frame: &Frame) {
    let (vmin, vmax) = values
        .map(|v| {
            v.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
        })
        .unwrap_or((0.0, 1.0));
    let span = (vmax - vmin).max(1e-12);
    out.push_str("<g stroke=\"none\">\n");
    for (i, &p) in points.iter().enumerate() {
        let (x, y) = frame.map(p);
        let fill = match values {
            Some(v) => ramp((v[i] - vmin) / span),
            None => PALETTE[0].to_string(),
        };
        let _ = writeln!(out, "<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"3\" fill=\"{fill}\"/>");
    }
    out.push_str("</g>\n");
}

/// Scatter plot of planar points, optionally colored by a scalar.
pub fn scatter_svg(points: &[[f64; 2]], values: Option<&[f64]>, title: &str) -> String {
    let frame = Frame::fit(points.iter().copied(), 0.0);
    let mut out = header(SIZE, title);
    scatter_group(&mut out, points, values, &frame);
    out.push_str("</svg>\n");
    out
}

/// Two scatters side by side, each with its own scale.
pub fn before_after_svg(before: &[[f64; 2]], after: &[[f64; 2]], title: &str) -> String {
    let mut out = header(2.0 * SIZE, title);
    for (k, (pts, label)) in [(before, "before"), (after, "after")].into_iter().enumerate() {
        let frame = Frame::fit(pts.iter().copied(), k as f64 * SIZE);
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{label}</text>",
            k as f64 * SIZE + SIZE / 2.0,
            SIZE - 8.0
        );
        scatter_group(&mut out, pts, None, &frame);
    }
    out.push_str("</svg>\n");
    out
}

/// Birth/death plot of several diagrams with the diagonal. Essential
/// points are drawn as triangles on the top edge.
pub fn diagram_svg(diagrams: &[PersistenceDiagram], title: &str) -> String {
    let mut top: f64 = 0.0;
    let mut bottom: f64 = 0.0;
    for d in diagrams {
        for p in &d.regular {
            top = top.max(p.death);
            bottom = bottom.min(p.birth);
        }
        for e in &d.essential {
            top = top.max(e.birth);
            bottom = bottom.min(e.birth);
        }
    }
    if top <= bottom {
        top = bottom + 1.0;
    }
    let ceiling = top + 0.1 * (top - bottom);
    let frame = Frame::fit([[bottom, bottom], [ceiling, ceiling]].into_iter(), 0.0);
    let mut out = header(SIZE, title);
    let (x1, y1) = frame.map([bottom, bottom]);
    let (x2, y2) = frame.map([ceiling, ceiling]);
    let _ = writeln!(
        out,
        "<line x1=\"{x1:.3}\" y1=\"{y1:.3}\" x2=\"{x2:.3}\" y2=\"{y2:.3}\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>"
    );
    for (k, d) in diagrams.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(out, "<g fill=\"{color}\" stroke=\"none\">");
        for p in &d.regular {
            let (x, y) = frame.map([p.birth, p.death]);
            let _ = writeln!(out, "<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"3\"/>");
        }
        for e in &d.essential {
            let (x, y) = frame.map([e.birth, ceiling]);
            let _ = writeln!(
                out,
                "<polygon points=\"{:.3},{:.3} {:.3},{:.3} {:.3},{:.3}\"/>",
                x - 4.0,
                y + 4.0,
                x + 4.0,
                y + 4.0,
                x,
                y - 3.0
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">H{}</text>",
            SIZE - MARGIN - 10.0,
            SIZE - MARGIN - 14.0 * (diagrams.len() - k) as f64,
            d.dim
        );
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtration::{weak_alpha_filtration, PointCloud};
    use crate::persistence::compute_diagrams;

    fn check(svg: &str) -> usize {
        let doc = roxmltree::Document::parse(svg).expect("well-formed SVG");
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        doc.descendants().filter(|n| n.has_tag_name("circle")).count()
    }

    #[test]
    fn scatter_is_well_formed() {
        let pts = [[0.0, 0.0], [1.0, 2.0], [3.0, -1.0]];
        assert_eq!(check(&scatter_svg(&pts, None, "a <b> & \"c\"")), 3);
        assert_eq!(check(&scatter_svg(&pts, Some(&[0.0, 1.0, 2.0]), "colored")), 3);
        assert_eq!(check(&scatter_svg(&[], None, "empty")), 0);
        assert_eq!(check(&before_after_svg(&pts, &pts[..2], "pair")), 5);
    }

    #[test]
    fn diagram_plot_is_well_formed() {
        let cloud = PointCloud::from_rows(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        let (_, d) = compute_diagrams(&weak_alpha_filtration(&cloud).unwrap(), 1);
        let svg = diagram_svg(&d, "square");
        assert_eq!(check(&svg), 4);
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polygon")).count(), 1);
        assert_eq!(check(&diagram_svg(&[], "none")), 0);
    }
}
