//! Starting site configurations for the outer solver.

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom2d::{segment_distance, ConvexPolygon, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    /// Near-square grid shrunk toward the centroid until it fits.
    Lattice,
    /// Parallel slabs cut along the longest edge.
    Strips,
    /// Equal-mass slabs whose cuts have the given normal angle.
    Slabs(f64),
    /// Regular `m`-gon on a small circle about the centroid.
    Ring,
    /// Binary epicycle sums; only for `m = 2^k`.
    Epicycle,
    /// Uniform random points of the body.
    Random,
    /// Track the exact ring solution on a symmetric polygon while it is
    /// deformed into the body.
    Morph,
}

/// Points `Σ_l s_l ε^(l-1) v(node_l)` over all sign paths of a full binary
/// tree of depth `k`, where `m = 2^k`.
///
/// `angles` gives one unit vector per internal node in heap order: the
/// children of node `n` are `2n + 1` (sign `+`) and `2n + 2` (sign `-`).
/// Leaves are listed with `+` before `-` at every level.
pub fn epicycle_init(m: usize, eps: f64, angles: &[f64]) -> Result<Vec<Vec2>> {
    if m == 0 || !m.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("epicycle needs a power of two, got {m}")));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidArgument(format!("epicycle radius ratio {eps} not in (0, 1/2)")));
    }
    if angles.len() != m - 1 {
        return Err(Error::InvalidArgument(format!("need {} angles, got {}", m - 1, angles.len())));
    }
    if m == 1 {
        return Ok(vec![Vec2::ZERO]);
    }
    let depth = m.trailing_zeros();
    let mut pts = Vec::with_capacity(m);
    for leaf in 0..m {
        let (mut node, mut p, mut r) = (0usize, Vec2::ZERO, 1.0);
        for level in 0..depth {
            let minus = (leaf >> (depth - 1 - level)) & 1 == 1;
            let v = Vec2::polar(angles[node]) * r;
            if minus {
                p = p - v;
                node = 2 * node + 2;
            } else {
                p = p + v;
                node = 2 * node + 1;
            }
            r *= eps;
        }
        pts.push(p);
    }
    let sep = min_separation(&pts);
    if !(sep > 1e-12) {
        return Err(Error::DegenerateConfig(format!("epicycle points collide (separation {sep:.3e})")));
    }
    Ok(pts)
}

fn min_separation(pts: &[Vec2]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            best = best.min(pts[i].dist(pts[j]));
        }
    }
    best
}

/// `m` starting sites of the given kind. `Epicycle` falls back to `Ring`
/// when `m` is not a power of two.
pub fn initial_sites<R: Rng + ?Sized>(
    body: &ConvexPolygon,
    m: usize,
    kind: Init,
    rng: &mut R,
) -> Vec<Vec2> {
    let c = body.centroid();
    match kind {
        Init::Lattice => lattice(body, m),
        Init::Strips => strips(body, m, strip_normal(body)),
        Init::Slabs(angle) => strips(body, m, Vec2::polar(angle)),
        Init::Ring | Init::Morph => ring(body, m, 0.0),
        Init::Epicycle if m.is_power_of_two() && m > 1 => {
            let depth = m.trailing_zeros() as usize;
            // Every node at tree level l points along (l - 1) * 90 degrees.
            let mut angles = Vec::with_capacity(m - 1);
            for level in 0..depth {
                angles.extend(std::iter::repeat_n(level as f64 * FRAC_PI_2, 1 << level));
            }
            let r = 0.4 * inradius_about(body, c);
            match epicycle_init(m, 0.25, &angles) {
                Ok(pts) => pts.into_iter().map(|p| c + p * r).collect(),
                Err(_) => ring(body, m, 0.0),
            }
        }
        Init::Epicycle => ring(body, m, 0.0),
        Init::Random => {
            let (lo, hi) = body.bounding_box();
            let mut pts = Vec::with_capacity(m);
            while pts.len() < m {
                let p = Vec2::new(lo.x + (hi.x - lo.x) * rng.random::<f64>(), lo.y + (hi.y - lo.y) * rng.random::<f64>());
                if body.contains(p) {
                    pts.push(p);
                }
            }
            pts
        }
    }
}

/// Distance from an interior point to the boundary.
fn inradius_about(body: &ConvexPolygon, c: Vec2) -> f64 {
    body.edges().map(|(a, b)| segment_distance(c, a, b)).fold(f64::INFINITY, f64::min)
}

pub(crate) fn ring(body: &ConvexPolygon, m: usize, phase: f64) -> Vec<Vec2> {
    let c = body.centroid();
    let r = 0.25 * inradius_about(body, c);
    (0..m).map(|k| c + Vec2::polar(phase + TAU * k as f64 / m as f64) * r).collect()
}

fn lattice(body: &ConvexPolygon, m: usize) -> Vec<Vec2> {
    let (lo, hi) = body.bounding_box();
    let (w, h) = (hi.x - lo.x, hi.y - lo.y);
    let cols = ((m as f64 * w / h).sqrt().ceil() as usize).clamp(1, m);
    let rows = m.div_ceil(cols);
    let mut pts = Vec::with_capacity(m);
    for r in 0..rows {
        let in_row = cols.min(m - r * cols);
        for k in 0..in_row {
            pts.push(Vec2::new(
                lo.x + w * (k as f64 + 0.5) / in_row as f64,
                lo.y + h * (r as f64 + 0.5) / rows as f64,
            ));
        }
    }
    let c = body.centroid();
    let mut s = 1.0;
    while s > 1e-3 && !pts.iter().all(|&p| body.contains(c + (p - c) * s)) {
        s *= 0.8;
    }
    pts.into_iter().map(|p| c + (p - c) * (0.9 * s)).collect()
}

/// Unit normal of the longest edge (the first one on ties).
fn strip_normal(body: &ConvexPolygon) -> Vec2 {
    let (a, b) = body
        .edges()
        .fold((Vec2::ZERO, Vec2::ZERO), |best, e| if (e.1 - e.0).norm() > (best.1 - best.0).norm() { e } else { best });
    let d = b - a;
    d.perp() * (1.0 / d.norm())
}

/// Evenly spaced sites on a line along `normal`: their power diagram is a
/// family of parallel cuts, which the weight solve moves to equal mass.
fn strips(body: &ConvexPolygon, m: usize, normal: Vec2) -> Vec<Vec2> {
    let c = body.centroid();
    let (lo, hi) = body.support_range(normal);
    let step = (hi - lo) / m as f64;
    let mid = 0.5 * (lo + hi) - normal.dot(c);
    (0..m)
        .map(|k| c + normal * (mid + step * (k as f64 - 0.5 * (m as f64 - 1.0))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn epicycle_two() {
        let p = epicycle_init(2, 0.3, &[0.0]).unwrap();
        assert_eq!(p, vec![Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0)]);
    }

    #[test]
    fn epicycle_four() {
        let h = FRAC_PI_2;
        let p = epicycle_init(4, 0.1, &[0.0, h, h]).unwrap();
        let want = [(1.0, 0.1), (1.0, -0.1), (-1.0, 0.1), (-1.0, -0.1)];
        for (q, w) in p.iter().zip(want) {
            assert!((q.x - w.0).abs() < 1e-15 && (q.y - w.1).abs() < 1e-15, "{q} vs {w:?}");
        }
    }

    #[test]
    fn epicycle_eight_random_angles_are_separated() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let angles: Vec<f64> = (0..7).map(|_| rng.random::<f64>() * TAU).collect();
        let eps: f64 = 0.05;
        let p = epicycle_init(8, eps, &angles).unwrap();
        assert_eq!(p.len(), 8);
        assert!(min_separation(&p) >= eps.powi(3));
    }

    #[test]
    fn epicycle_rejects_bad_input() {
        assert!(epicycle_init(6, 0.1, &[0.0; 5]).is_err());
        assert!(epicycle_init(4, 0.6, &[0.0; 3]).is_err());
        assert!(epicycle_init(4, 0.1, &[0.0; 2]).is_err());
    }

    #[test]
    fn strips_on_square() {
        let sq = ConvexPolygon::unit_square();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let p = initial_sites(&sq, 3, Init::Strips, &mut rng);
        // Cuts parallel to the first edge: sites stacked vertically.
        let mut ys: Vec<f64> = p.iter().map(|q| q.y).collect();
        ys.sort_by(f64::total_cmp);
        for (k, (q, y)) in p.iter().zip(&ys).enumerate() {
            assert!((y - (k as f64 + 0.5) / 3.0).abs() < 1e-12);
            assert!((q.x - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn slab_sites_are_collinear_along_the_normal() {
        let tri = ConvexPolygon::new(vec![Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(0.0, 1.0)]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let n = Vec2::polar(1.1);
        let p = initial_sites(&tri, 5, Init::Slabs(1.1), &mut rng);
        for q in &p[1..] {
            assert!((*q - p[0]).cross(n).abs() < 1e-12);
        }
    }

    #[test]
    fn every_kind_gives_distinct_inside_points() {
        let tri = ConvexPolygon::new(vec![Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(0.0, 1.0)]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for kind in [Init::Lattice, Init::Strips, Init::Ring, Init::Epicycle, Init::Random] {
            for m in 1..=9 {
                let p = initial_sites(&tri, m, kind, &mut rng);
                assert_eq!(p.len(), m);
                // Strip sites sit on a line and may leave the body.
                assert!(kind == Init::Strips || p.iter().all(|&q| tri.contains(q)), "{kind:?} m={m}");
                assert!(m == 1 || min_separation(&p) > 1e-6, "{kind:?} m={m}");
            }
        }
    }
}
