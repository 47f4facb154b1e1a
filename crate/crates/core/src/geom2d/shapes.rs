use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{ConvexPolygon, Vec2};
use crate::error::Result;

/// Regular `n`-gon with the given circumradius; the first vertex sits at
/// angle `phase`.
pub fn regular_polygon(n: usize, center: Vec2, circumradius: f64, phase: f64) -> Result<ConvexPolygon> {
    let v = (0..n)
        .map(|k| center + Vec2::polar(phase + TAU * k as f64 / n as f64) * circumradius)
        .collect();
    ConvexPolygon::new(v)
}

/// Random convex `n`-gon (Valtr's construction), rescaled into the unit
/// square with a 5% margin.
pub fn random_convex_polygon<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<ConvexPolygon> {
    let xs = split_chain(n, rng);
    let mut ys = split_chain(n, rng);
    ys.shuffle(rng);
    let mut vecs: Vec<Vec2> = xs.into_iter().zip(ys).map(|(x, y)| Vec2::new(x, y)).collect();
    vecs.sort_by(|a, b| a.y.atan2(a.x).total_cmp(&b.y.atan2(b.x)));

    let mut pts = Vec::with_capacity(n);
    let mut cur = Vec2::ZERO;
    for v in vecs {
        pts.push(cur);
        cur += v;
    }
    let (mut lo, mut hi) = (pts[0], pts[0]);
    for p in &pts {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let s = 0.9 / (hi.x - lo.x).max(hi.y - lo.y);
    ConvexPolygon::new(pts.into_iter().map(|p| (p - lo) * s + Vec2::new(0.05, 0.05)).collect())
}

/// Random increments along one axis whose sum is zero.
fn split_chain<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut vals: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    vals.sort_by(f64::total_cmp);
    let (min, max) = (vals[0], vals[n - 1]);
    let (mut last_a, mut last_b) = (min, min);
    let mut out = Vec::with_capacity(n);
    for &v in &vals[1..n - 1] {
        if rng.random::<bool>() {
            out.push(v - last_a);
            last_a = v;
        } else {
            out.push(last_b - v);
            last_b = v;
        }
    }
    out.push(max - last_a);
    out.push(last_b - max);
    out
}
