//! Convex polygon kernel.
//!
//! Polygons are stored as counterclockwise vertex lists. All geometric
//! predicates use a tolerance of [`EPS_GEOM`] relative to the polygon
//! diameter. Clipping returns `None` for measure-zero results so that callers
//! never hand a degenerate body to a functional.

mod density;
mod quadrature;
mod shapes;

pub use density::Density;
pub use quadrature::{QuadratureOrder, TriangleRule};
pub use shapes::{random_convex_polygon, regular_polygon};

use std::f64::consts::TAU;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for collinearity and degeneracy tests.
pub const EPS_GEOM: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at angle `t`.
    #[inline]
    pub fn polar(t: f64) -> Self {
        let (s, c) = t.sin_cos();
        Self::new(c, s)
    }

    #[inline]
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3-D cross product.
    #[inline]
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Counterclockwise quarter turn.
    #[inline]
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    #[inline]
    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    #[inline]
    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        self + (o - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// A convex polygon with counterclockwise vertices.
///
/// Invariants (checked by [`ConvexPolygon::new`]): at least three vertices,
/// positive signed area, every turn is a left turn up to `EPS_GEOM * diam^2`,
/// total turning is one full revolution, and no two consecutive vertices are
/// closer than `EPS_GEOM * diam`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec2>", into = "Vec<Vec2>")]
pub struct ConvexPolygon {
    vertices: Vec<Vec2>,
    diameter: f64,
}

impl TryFrom<Vec<Vec2>> for ConvexPolygon {
    type Error = Error;
    fn try_from(v: Vec<Vec2>) -> Result<Self> {
        ConvexPolygon::new(v)
    }
}

impl From<ConvexPolygon> for Vec<Vec2> {
    fn from(p: ConvexPolygon) -> Self {
        p.vertices
    }
}

impl ConvexPolygon {
    pub fn new(vertices: Vec<Vec2>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::InvalidPolygon(format!("need at least 3 vertices, got {n}")));
        }
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidPolygon(format!("vertex {i} is not finite")));
        }
        let diameter = diameter_of(&vertices);
        if !(diameter > 0.0) {
            return Err(Error::InvalidPolygon("all vertices coincide".into()));
        }
        let tol_len = EPS_GEOM * diameter;
        let tol_cross = EPS_GEOM * diameter * diameter;
        let mut turning = 0.0;
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if a.dist(b) < tol_len {
                return Err(Error::InvalidPolygon(format!(
                    "vertices {i} and {} are closer than the degeneracy tolerance",
                    (i + 1) % n
                )));
            }
            let (e1, e2) = (b - a, c - b);
            let cross = e1.cross(e2);
            if cross < -tol_cross {
                return Err(Error::InvalidPolygon(format!(
                    "reflex or clockwise turn at vertex {}",
                    (i + 1) % n
                )));
            }
            turning += cross.atan2(e1.dot(e2));
        }
        if (turning - TAU).abs() > 1e-6 {
            return Err(Error::InvalidPolygon(format!(
                "vertex list winds {:.6} turns instead of one",
                turning / TAU
            )));
        }
        if signed_area(&vertices) <= 0.0 {
            return Err(Error::InvalidPolygon("signed area is not positive".into()));
        }
        Ok(Self { vertices, diameter })
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new(vec![
            Vec2::new(x0, y0),
            Vec2::new(x1, y0),
            Vec2::new(x1, y1),
            Vec2::new(x0, y1),
        ])
    }

    pub fn unit_square() -> Self {
        Self::rectangle(0.0, 0.0, 1.0, 1.0).expect("unit square is valid")
    }

    /// Build from clipping output without re-running the full validation.
    pub(crate) fn from_clip(vertices: Vec<Vec2>) -> Option<Self> {
        if vertices.len() < 3 {
            return None;
        }
        let diameter = diameter_of(&vertices);
        Some(Self { vertices, diameter })
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Directed edges `(v[i], v[i+1])`.
    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.dist(b)).sum()
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Minimum width over all directions (attained perpendicular to an edge).
    pub fn width(&self) -> f64 {
        let v = &self.vertices;
        let n = v.len();
        let mut best = f64::INFINITY;
        let mut j = 1;
        for i in 0..n {
            let a = v[i];
            let e = v[(i + 1) % n] - a;
            let len = e.norm();
            let h = |k: usize| e.cross(v[k % n] - a);
            while h(j + 1) > h(j) {
                j += 1;
            }
            best = best.min(h(j) / len);
        }
        best
    }

    /// Area centroid.
    pub fn centroid(&self) -> Vec2 {
        let v = &self.vertices;
        let o = v[0];
        let mut acc = Vec2::ZERO;
        let mut a2 = 0.0;
        for i in 1..v.len() - 1 {
            let (p, q) = (v[i] - o, v[i + 1] - o);
            let w = p.cross(q);
            a2 += w;
            acc += (p + q) * w;
        }
        o + acc * (1.0 / (3.0 * a2))
    }

    /// Mean of the vertices; always interior for a convex polygon.
    pub fn vertex_mean(&self) -> Vec2 {
        let s = self.vertices.iter().fold(Vec2::ZERO, |acc, &v| acc + v);
        s * (1.0 / self.vertices.len() as f64)
    }

    /// `(min, max)` corners of the bounding box.
    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        (lo, hi)
    }

    /// `(min, max)` of `dir . v` over the vertices.
    pub fn support_range(&self, dir: Vec2) -> (f64, f64) {
        self.vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            let s = dir.dot(*v);
            (lo.min(s), hi.max(s))
        })
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let tol = EPS_GEOM * self.diameter;
        self.edges().all(|(a, b)| {
            let e = b - a;
            e.cross(p - a) >= -tol * e.norm()
        })
    }

    /// Euclidean distance from `p` to the polygon (zero inside).
    pub fn distance_to(&self, p: Vec2) -> f64 {
        if self.contains(p) {
            return 0.0;
        }
        self.edges()
            .map(|(a, b)| segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Keep the part `{x : normal . x <= offset}`; `None` if it has measure zero.
    pub fn clip_halfplane(&self, normal: Vec2, offset: f64) -> Option<ConvexPolygon> {
        let tags = vec![(); self.vertices.len()];
        match clip_tagged(&self.vertices, &tags, self.diameter, normal, offset, ()) {
            Clip::Unchanged => Some(self.clone()),
            Clip::Empty => None,
            Clip::Clipped(v, _) => ConvexPolygon::from_clip(v),
        }
    }

    /// Convex intersection, `None` when it has measure zero.
    pub fn intersection(&self, other: &ConvexPolygon) -> Option<ConvexPolygon> {
        let mut cur = self.clone();
        for (a, b) in other.edges() {
            let normal = (b - a).perp() * -1.0;
            cur = cur.clip_halfplane(normal, normal.dot(a))?;
        }
        Some(cur)
    }

    /// Hausdorff distance between two convex polygons (attained at vertices).
    pub fn hausdorff(&self, other: &ConvexPolygon) -> f64 {
        let one_way = |p: &ConvexPolygon, q: &ConvexPolygon| {
            p.vertices.iter().map(|&v| q.distance_to(v)).fold(0.0, f64::max)
        };
        one_way(self, other).max(one_way(other, self))
    }

    /// Apply `x -> rotation(angle) * x + shift` to every vertex.
    pub fn transformed(&self, angle: f64, shift: Vec2) -> ConvexPolygon {
        let vertices: Vec<Vec2> = self.vertices.iter().map(|v| v.rotate(angle) + shift).collect();
        ConvexPolygon { diameter: self.diameter, vertices }
    }

    /// Same polygon with the vertex list cyclically shifted by `k`.
    pub fn rotated_start(&self, k: usize) -> ConvexPolygon {
        let mut vertices = self.vertices.clone();
        let n = vertices.len();
        vertices.rotate_left(k % n);
        ConvexPolygon { diameter: self.diameter, vertices }
    }
}

/// Minkowski combination `(1 - s) a + s b` of two convex polygons.
pub fn minkowski_blend(a: &ConvexPolygon, b: &ConvexPolygon, s: f64) -> Result<ConvexPolygon> {
    if s <= 0.0 {
        return Ok(a.clone());
    }
    if s >= 1.0 {
        return Ok(b.clone());
    }
    // Walk both edge sequences from the lowest (then leftmost) vertex,
    // merging edge vectors by polar angle.
    let start = |p: &ConvexPolygon| {
        (0..p.len())
            .min_by(|&i, &j| {
                let (u, v) = (p.vertices[i], p.vertices[j]);
                u.y.total_cmp(&v.y).then(u.x.total_cmp(&v.x))
            })
            .unwrap_or(0)
    };
    let edges = |p: &ConvexPolygon, w: f64| -> Vec<Vec2> {
        let n = p.len();
        let k = start(p);
        (0..n).map(|i| (p.vertices[(k + i + 1) % n] - p.vertices[(k + i) % n]) * w).collect()
    };
    let angle = |e: Vec2| {
        let t = e.y.atan2(e.x);
        if t < 0.0 { t + TAU } else { t }
    };
    let (ea, eb) = (edges(a, 1.0 - s), edges(b, s));
    let mut p = a.vertices[start(a)] * (1.0 - s) + b.vertices[start(b)] * s;
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(ea.len() + eb.len());
    while i < ea.len() || j < eb.len() {
        out.push(p);
        let take_a = j >= eb.len() || (i < ea.len() && angle(ea[i]) <= angle(eb[j]));
        if take_a {
            p += ea[i];
            i += 1;
        } else {
            p += eb[j];
            j += 1;
        }
    }
    let diam = a.diameter.max(b.diameter);
    let mut tags = vec![(); out.len()];
    merge_close(&mut out, &mut tags, EPS_GEOM * diam);
    ConvexPolygon::new(out)
}

pub fn signed_area(v: &[Vec2]) -> f64 {
    let n = v.len();
    if n < 3 {
        return 0.0;
    }
    let o = v[0];
    let mut a2 = 0.0;
    for i in 1..n - 1 {
        a2 += (v[i] - o).cross(v[i + 1] - o);
    }
    0.5 * a2
}

pub(crate) fn segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let e = b - a;
    let len2 = e.norm_sq();
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(e) / len2).clamp(0.0, 1.0);
    p.dist(a + e * t)
}

/// Largest vertex distance of a convex polygon, via antipodal pairs.
fn diameter_of(v: &[Vec2]) -> f64 {
    let n = v.len();
    if n <= 8 {
        let mut best: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                best = best.max((v[i] - v[j]).norm_sq());
            }
        }
        return best.sqrt();
    }
    let mut best: f64 = 0.0;
    let mut j = 1;
    for i in 0..n {
        let a = v[i];
        let e = v[(i + 1) % n] - a;
        let h = |k: usize| e.cross(v[k % n] - a);
        let mut steps = 0;
        while h(j + 1) > h(j) && steps < n {
            j += 1;
            steps += 1;
        }
        for k in [j, j + 1] {
            best = best.max((a - v[k % n]).norm_sq());
            best = best.max((v[(i + 1) % n] - v[k % n]).norm_sq());
        }
    }
    best.sqrt()
}

pub(crate) enum Clip<T> {
    Unchanged,
    Empty,
    Clipped(Vec<Vec2>, Vec<T>),
}

/// Sutherland-Hodgman against one half-plane, carrying a tag per edge.
///
/// `tags[i]` labels the edge `v[i] -> v[i+1]`; edges created along the clip
/// line receive `new_tag`.
pub(crate) fn clip_tagged<T: Copy>(
    v: &[Vec2],
    tags: &[T],
    scale: f64,
    normal: Vec2,
    offset: f64,
    new_tag: T,
) -> Clip<T> {
    #[derive(Clone, Copy, PartialEq)]
    enum Side {
        In,
        On,
        Out,
    }
    let n = v.len();
    let tol = EPS_GEOM * normal.norm() * scale;
    let dist: Vec<f64> = v.iter().map(|p| normal.dot(*p) - offset).collect();
    let side: Vec<Side> = dist
        .iter()
        .map(|&s| {
            if s > tol {
                Side::Out
            } else if s < -tol {
                Side::In
            } else {
                Side::On
            }
        })
        .collect();
    if side.iter().all(|&s| s != Side::Out) {
        return Clip::Unchanged;
    }
    if side.iter().all(|&s| s != Side::In) {
        return Clip::Empty;
    }

    let mut out_v = Vec::with_capacity(n + 1);
    let mut out_t = Vec::with_capacity(n + 1);
    for i in 0..n {
        let j = (i + 1) % n;
        let (a, b) = (v[i], v[j]);
        match (side[i], side[j]) {
            (Side::Out, Side::In) => {
                out_v.push(a.lerp(b, dist[i] / (dist[i] - dist[j])));
                out_t.push(tags[i]);
            }
            (Side::Out, _) => {}
            (Side::In, Side::Out) => {
                out_v.push(a);
                out_t.push(tags[i]);
                out_v.push(a.lerp(b, dist[i] / (dist[i] - dist[j])));
                out_t.push(new_tag);
            }
            (Side::On, Side::Out) => {
                out_v.push(a);
                out_t.push(new_tag);
            }
            _ => {
                out_v.push(a);
                out_t.push(tags[i]);
            }
        }
    }

    merge_close(&mut out_v, &mut out_t, EPS_GEOM * scale);
    if out_v.len() < 3 || signed_area(&out_v) <= (EPS_GEOM * scale).powi(2) {
        return Clip::Empty;
    }
    Clip::Clipped(out_v, out_t)
}

/// Drop a vertex when it sits within `tol` of its successor; the dropped
/// vertex's outgoing edge disappears with it.
fn merge_close<T>(v: &mut Vec<Vec2>, t: &mut Vec<T>, tol: f64) {
    let mut i = 0;
    while v.len() >= 3 && i < v.len() {
        let j = (i + 1) % v.len();
        if v[i].dist(v[j]) < tol {
            v.remove(i);
            t.remove(i);
        } else {
            i += 1;
        }
    }
}
