//! SVG figures. Coordinates are scaled so the longer side of the drawing is 1.

use std::fmt::Write;

use equipart::{ConvexPolygon, Vec2};

const PALETTE: [&str; 10] =
    ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"];

struct Frame {
    lo: Vec2,
    scale: f64,
    w: f64,
    h: f64,
}

impl Frame {
    fn new(lo: Vec2, hi: Vec2) -> Self {
        let span = (hi - lo).x.max((hi - lo).y).max(f64::MIN_POSITIVE);
        let scale = 1.0 / span;
        Self { lo, scale, w: (hi.x - lo.x) * scale, h: (hi.y - lo.y) * scale }
    }

    // y grows downward in SVG
    fn map(&self, p: Vec2) -> (f64, f64) {
        ((p.x - self.lo.x) * self.scale, self.h - (p.y - self.lo.y) * self.scale)
    }

    fn open(&self, out: &mut String) {
        let pad = 0.02;
        writeln!(
            out,
            r##"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{:.4} {:.4} {:.4} {:.4}">"##,
            -pad,
            -pad,
            self.w + 2.0 * pad,
            self.h + 2.0 * pad
        )
        .unwrap();
    }
}

fn path(frame: &Frame, pts: &[Vec2], closed: bool) -> String {
    let mut d = String::new();
    for (k, &p) in pts.iter().enumerate() {
        let (x, y) = frame.map(p);
        write!(d, "{}{x:.6} {y:.6}", if k == 0 { "M" } else { " L" }).unwrap();
    }
    if closed {
        d.push_str(" Z");
    }
    d
}

/// One filled path per cell over the outline of the body.
pub fn partition(body: &ConvexPolygon, cells: &[&ConvexPolygon]) -> String {
    let (lo, hi) = body.bounding_box();
    let frame = Frame::new(lo, hi);
    let mut out = String::new();
    frame.open(&mut out);
    for (i, c) in cells.iter().enumerate() {
        writeln!(
            out,
            r##"  <path d="{}" fill="{}" stroke="#222" stroke-width="0.003"/>"##,
            path(&frame, c.vertices(), true),
            PALETTE[i % PALETTE.len()]
        )
        .unwrap();
    }
    writeln!(out, r##"  <path d="{}" fill="none" stroke="#000" stroke-width="0.006"/>"##, path(&frame, body.vertices(), true))
        .unwrap();
    out.push_str("</svg>\n");
    out
}

/// `G_L` and `G_M` against `t`, with `t` over one full turn.
pub fn curves(rows: &[(f64, f64, f64)]) -> String {
    let (mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(_, a, b) in rows {
        ylo = ylo.min(a.min(b));
        yhi = yhi.max(a.max(b));
    }
    if !(yhi > ylo) {
        ylo -= 0.5;
        yhi += 0.5;
    }
    // t spans the width, values half of it
    let (tlo, thi) = (rows.first().map_or(0.0, |r| r.0), rows.last().map_or(1.0, |r| r.0));
    let tscale = if thi > tlo { 1.0 / (thi - tlo) } else { 1.0 };
    let yscale = 0.5 / (yhi - ylo);
    let frame = Frame { lo: Vec2::ZERO, scale: 1.0, w: 1.0, h: 0.5 };
    let pts = |col: usize| -> Vec<Vec2> {
        rows.iter()
            .map(|r| {
                let y = if col == 0 { r.1 } else { r.2 };
                Vec2::new((r.0 - tlo) * tscale, (y - ylo) * yscale)
            })
            .collect()
    };
    let mut out = String::new();
    frame.open(&mut out);
    writeln!(out, r##"  <rect x="0" y="0" width="1" height="0.5" fill="none" stroke="#999" stroke-width="0.002"/>"##).unwrap();
    for (col, colour) in [(0, PALETTE[0]), (1, PALETTE[1])] {
        writeln!(out, r##"  <path d="{}" fill="none" stroke="{colour}" stroke-width="0.004"/>"##, path(&frame, &pts(col), false)).unwrap();
    }
    out.push_str("</svg>\n");
    out
}
