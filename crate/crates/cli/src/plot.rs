//! Static SVG rendering: `A` as red discs, `B` as blue squares, matched
//! pairs as `<line>` elements and transport arcs as `<path>` elements with
//! stroke width proportional to flow.

use std::fmt::Write as _;

use gpm_core::Point;

use crate::format::{Instance, Solution};

const SIZE: f64 = 800.0;
const MARGIN: f64 = 20.0;

struct Frame {
    min_x: f64,
    min_y: f64,
    scale: f64,
}

impl Frame {
    fn new(points: impl Iterator<Item = Point>) -> Frame {
        let (mut lo_x, mut lo_y, mut hi_x, mut hi_y) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for p in points {
            lo_x = lo_x.min(p.x);
            lo_y = lo_y.min(p.y);
            hi_x = hi_x.max(p.x);
            hi_y = hi_y.max(p.y);
        }
        if lo_x > hi_x {
            return Frame {
                min_x: 0.0,
                min_y: 0.0,
                scale: 1.0,
            };
        }
        let span = (hi_x - lo_x).max(hi_y - lo_y);
        let scale = if span > 0.0 { (SIZE - 2.0 * MARGIN) / span } else { 1.0 };
        Frame {
            min_x: lo_x,
            min_y: lo_y,
            scale,
        }
    }

    // y grows downwards in SVG.
    fn map(&self, p: &Point) -> (f64, f64) {
        (
            MARGIN + (p.x - self.min_x) * self.scale,
            SIZE - MARGIN - (p.y - self.min_y) * self.scale,
        )
    }
}

pub fn render(inst: &Instance, sol: &Solution) -> String {
    let frame = Frame::new(inst.a.iter().chain(&inst.b).copied());
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let max_flow = sol.pairs.iter().map(|p| p.2).fold(0.0f64, f64::max);
    let _ = writeln!(out, r##"<g stroke="#555" fill="none">"##);
    for &(x, y, f) in &sol.pairs {
        let (Some(pa), Some(pb)) = (inst.a.get(x as usize), inst.b.get(y as usize)) else {
            continue;
        };
        let (x1, y1) = frame.map(pa);
        let (x2, y2) = frame.map(pb);
        if inst.is_transport() {
            let w = 0.5 + 4.0 * f / max_flow.max(f64::MIN_POSITIVE);
            let _ = writeln!(
                out,
                r#"<path d="M {x1:.3} {y1:.3} L {x2:.3} {y2:.3}" stroke-width="{w:.3}"/>"#
            );
        } else {
            let _ = writeln!(
                out,
                r#"<line x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke-width="1"/>"#
            );
        }
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r##"<g fill="#c0392b">"##);
    for p in &inst.a {
        let (x, y) = frame.map(p);
        let _ = writeln!(out, r#"<circle cx="{x:.3}" cy="{y:.3}" r="3"/>"#);
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r##"<g fill="#2c6fbb">"##);
    for p in &inst.b {
        let (x, y) = frame.map(p);
        let _ = writeln!(
            out,
            r#"<rect x="{:.3}" y="{:.3}" width="5" height="5"/>"#,
            x - 2.5,
            y - 2.5
        );
    }
    let _ = writeln!(out, "</g>");
    out.push_str("</svg>\n");
    out
}
