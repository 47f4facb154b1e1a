//! Halving-line sweeps for `m = 2 m'`.
//!
//! For each direction angle `t` the body is cut by the unique line of that
//! direction into halves `L_t` (left of the directed line) and `M_t` of equal
//! mass, so `L_{t+π} = M_t`. The common value of an `m'`-partition of `L_t`
//! traced continuously in `t` gives the curve `G_L`; `G_M` likewise. A `t`
//! where the two curves cross gives an `m`-partition.
//!
//! Sub-solutions are carried from one angle to the next in the frame of the
//! cut (chord midpoint, direction `t` for L and `t + π` for M). The M curve
//! is anchored on the L curve at `t0 + π`, so `G_M(t) = G_L(t + π)` as long
//! as the traced branch closes up after a full turn.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::joint;
use crate::functional::Functional;
use crate::geom2d::{ConvexPolygon, Density, Vec2};
use crate::recursive::{child_tol, GeneralOptions, Motion, PartitionTree, Plan, Solved, Solver};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    L,
    M,
}

impl Side {
    /// Frame direction of this half relative to the line direction.
    fn turn(self) -> f64 {
        match self {
            Side::L => 0.0,
            Side::M => PI,
        }
    }
}

/// The two equal-mass halves cut by the line of direction `t`.
#[derive(Clone, Debug)]
pub struct HalfPair {
    /// Direction angle in `[0, 2π)`.
    pub t: f64,
    /// `(-sin t, cos t)`; `L = {normal . x >= offset}`.
    pub normal: Vec2,
    pub offset: f64,
    pub l: ConvexPolygon,
    pub m: ConvexPolygon,
    /// Endpoints of the cut inside the body.
    pub chord: (Vec2, Vec2),
}

impl HalfPair {
    pub fn half(&self, side: Side) -> &ConvexPolygon {
        match side {
            Side::L => &self.l,
            Side::M => &self.m,
        }
    }

    pub fn midpoint(&self) -> Vec2 {
        self.chord.0.lerp(self.chord.1, 0.5)
    }
}

/// Halving line of direction `(cos t, sin t)`. The offset is found by
/// bisection on the mass below the line. Directions `t` and `t + π` share
/// one computed line with the halves swapped.
pub fn halving_line(body: &ConvexPolygon, t: f64, density: &Density) -> Result<HalfPair> {
    let t = t.rem_euclid(TAU);
    if t >= PI {
        let h = halving_line(body, t - PI, density)?;
        return Ok(HalfPair { t, normal: -h.normal, offset: -h.offset, l: h.m, m: h.l, chord: (h.chord.1, h.chord.0) });
    }
    let u = Vec2::polar(t);
    let normal = u.perp();
    let total = density.mass(body);
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("body has zero mass under the density".into()));
    }
    let offset = density.cut_offset(body, normal, 0.5 * total);
    let degenerate = || Error::DegenerateConfig(format!("halving line at t = {t} leaves an empty half"));
    let m = body.clip_halfplane(normal, offset).ok_or_else(degenerate)?;
    let l = body.clip_halfplane(-normal, -offset).ok_or_else(degenerate)?;
    let chord = chord(body, normal, offset);
    Ok(HalfPair { t, normal, offset, l, m, chord })
}

/// Intersection of `{normal . x = offset}` with the body, ordered along the
/// line direction.
fn chord(body: &ConvexPolygon, normal: Vec2, offset: f64) -> (Vec2, Vec2) {
    let u = -normal.perp();
    let tol = 1e-12 * body.diameter();
    let mut pts = Vec::new();
    for (a, b) in body.edges() {
        let (fa, fb) = (normal.dot(a) - offset, normal.dot(b) - offset);
        if fa.abs() <= tol {
            pts.push(a);
        } else if (fa < 0.0) != (fb < 0.0) && fb.abs() > tol {
            pts.push(a + (b - a) * (fa / (fa - fb)));
        }
    }
    let lo = pts.iter().copied().min_by(|p, q| u.dot(*p).total_cmp(&u.dot(*q)));
    let hi = pts.iter().copied().max_by(|p, q| u.dot(*p).total_cmp(&u.dot(*q)));
    match (lo, hi) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            let c = body.centroid();
            (c, c)
        }
    }
}

/// Hausdorff distance between `L_{t+π}` and `M_t`; infinite if either cut fails.
pub fn interchange_check(body: &ConvexPolygon, t: f64, density: &Density) -> f64 {
    match (halving_line(body, t, density), halving_line(body, t + PI, density)) {
        (Ok(a), Ok(b)) => b.l.hausdorff(&a.m),
        _ => f64::INFINITY,
    }
}

/// Rigid motion carrying the frame of `side_a` at `a` onto `side_b` at `b`.
fn frame_motion(a: &HalfPair, side_a: Side, b: &HalfPair, side_b: Side) -> Motion {
    Motion { angle: (b.t + side_b.turn()) - (a.t + side_a.turn()), from: a.midpoint(), to: b.midpoint() }
}

#[derive(Clone, Debug)]
pub struct SweepOptions {
    /// Uniform samples over a full turn; must be even.
    pub grid: usize,
    /// Smallest angle step of the continuation and of refinement.
    pub min_step: f64,
    /// Neighbouring samples may differ by this fraction of the curve's range.
    pub continuity: f64,
    /// A continuation step whose value changes by more than this fraction
    /// is retried with a smaller step.
    pub jump: f64,
    /// Refinement passes after the uniform sweep.
    pub passes: usize,
    /// Root-finding iterations per bracket.
    pub max_bisect: usize,
    /// Anchors tried before giving up on a crossing.
    pub anchors: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { grid: 64, min_step: TAU / 4096.0, continuity: 0.05, jump: 0.25, passes: 8, max_bisect: 60, anchors: 3 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BranchSample {
    /// Sweep parameter; the cut direction is `t mod 2π`.
    pub t: f64,
    pub y: f64,
    pub plan: Plan,
}

/// One traced branch over a full turn starting at `t0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BranchCurve {
    pub side: Side,
    /// Parts per half.
    pub m: usize,
    pub t0: f64,
    /// Sorted by `t`, covering `[t0, t0 + 2π)`.
    pub samples: Vec<BranchSample>,
    /// Value reached again at `t0 + 2π` by the continuation.
    pub closing: BranchSample,
    /// False when some neighbouring samples still differ by more than the
    /// continuity budget at the finest step.
    pub continuous: bool,
    pub broken_at: Vec<f64>,
}

impl BranchCurve {
    /// Value at a sample angle, if sampled.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.sample_at(t).map(|s| s.y)
    }

    fn sample_at(&self, t: f64) -> Option<&BranchSample> {
        if (t - self.closing.t).abs() < 1e-12 {
            return Some(&self.closing);
        }
        self.samples.iter().find(|s| (s.t - t).abs() < 1e-12)
    }

    /// `|y(t0 + 2π) - y(t0)|`.
    pub fn periodicity_gap(&self) -> f64 {
        (self.closing.y - self.samples[0].y).abs()
    }

    /// Largest value change between neighbouring samples, closing included.
    pub fn max_jump(&self) -> f64 {
        self.samples
            .iter()
            .chain(std::iter::once(&self.closing))
            .collect::<Vec<_>>()
            .windows(2)
            .map(|w| (w[1].y - w[0].y).abs())
            .fold(0.0, f64::max)
    }

    pub fn range(&self) -> f64 {
        let (lo, hi) = self.samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.y), hi.max(s.y)));
        hi - lo
    }
}

#[derive(Clone, Debug)]
struct Point {
    t: f64,
    pair: HalfPair,
    y: f64,
    plan: Plan,
}

impl Point {
    fn sample(&self) -> BranchSample {
        BranchSample { t: self.t, y: self.y, plan: self.plan.clone() }
    }
}

struct Tracer<'a> {
    solver: Solver<'a>,
    body: &'a ConvexPolygon,
    sub: usize,
    tol: f64,
    opts: &'a SweepOptions,
}

impl Tracer<'_> {
    fn cold(&self, t: f64, side: Side) -> Result<Point> {
        let pair = halving_line(self.body, t, self.solver.density)?;
        let s = self.solver.solve(pair.half(side), self.sub, None, self.tol)?;
        Ok(Point { t, pair, y: s.y, plan: s.plan })
    }

    /// Solve `side` at `t` starting from `from`, a solution of `from_side`.
    fn step(&self, from: &Point, from_side: Side, t: f64, side: Side) -> Result<Point> {
        let pair = halving_line(self.body, t, self.solver.density)?;
        let warm = from.plan.moved(&frame_motion(&from.pair, from_side, &pair, side));
        let s: Solved = self.solver.solve(pair.half(side), self.sub, Some(&warm), self.tol)?;
        Ok(Point { t, pair, y: s.y, plan: s.plan })
    }

    /// Continue from `from` to `target`, halving the step when the solve
    /// fails or the value jumps. Intermediate points are appended to `out`;
    /// the point at `target` is returned.
    fn advance(&self, from: &Point, target: f64, side: Side, out: &mut Vec<Point>, broken: &mut Vec<f64>) -> Result<Point> {
        let mut cur = from.clone();
        while cur.t < target {
            let mut dt = target - cur.t;
            let next = loop {
                let t = if dt >= target - cur.t { target } else { cur.t + dt };
                let r = self.step(&cur, side, t, side);
                match r {
                    Ok(p) if (p.y - cur.y).abs() <= self.opts.jump * cur.y.abs() => break p,
                    _ if dt > self.opts.min_step => dt *= 0.5,
                    r => {
                        broken.push(t);
                        break match r {
                            Ok(p) => p,
                            Err(_) => self.cold(t, side)?,
                        };
                    }
                }
            };
            if next.t < target {
                out.push(next.clone());
            }
            cur = next;
        }
        Ok(cur)
    }

    /// Uniform continuation over `[t0, t0 + 2π]` from `first`, then
    /// midpoint refinement where neighbours differ by more than the budget.
    /// Continue `first` over `steps` grid steps; the last point becomes the
    /// closing sample.
    fn trace(&self, first: Point, side: Side, steps: usize) -> Result<BranchCurve> {
        let n = self.opts.grid;
        let t0 = first.t;
        let h = TAU / n as f64;
        let mut pts = vec![first];
        let mut broken = Vec::new();
        for k in 1..=steps {
            let target = t0 + k as f64 * h;
            let mut extra = Vec::new();
            let last = pts.last().expect("nonempty");
            let p = self.advance(last, target, side, &mut extra, &mut broken)?;
            pts.extend(extra);
            pts.push(p);
        }
        for _ in 0..self.opts.passes {
            let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.y), hi.max(p.y)));
            let budget = self.opts.continuity * (hi - lo).max(1e-12 * hi.abs());
            let mut inserted = false;
            let mut next = Vec::with_capacity(pts.len());
            for i in 0..pts.len() {
                next.push(pts[i].clone());
                if i + 1 < pts.len() {
                    let (a, b) = (&pts[i], &pts[i + 1]);
                    if (b.y - a.y).abs() > budget && b.t - a.t > 2.0 * self.opts.min_step {
                        // Continue into the midpoint with step halving; keep
                        // it only if no step on the way had to jump.
                        let (mut extra, mut jumped) = (Vec::new(), Vec::new());
                        if let Ok(mid) = self.advance(a, 0.5 * (a.t + b.t), side, &mut extra, &mut jumped) {
                            if jumped.is_empty() {
                                next.extend(extra);
                                next.push(mid);
                                inserted = true;
                            }
                        }
                    }
                }
            }
            pts = next;
            if !inserted {
                break;
            }
        }
        let samples: Vec<BranchSample> = pts.iter().map(Point::sample).collect();
        broken.extend(self.breaks(&samples));
        broken.sort_by(f64::total_cmp);
        broken.dedup();
        let mut samples = samples;
        let closing = samples.pop().expect("closing sample");
        Ok(BranchCurve {
            side,
            m: self.sub,
            t0,
            samples,
            closing,
            continuous: broken.is_empty(),
            broken_at: broken,
        })
    }

    /// Angles of samples differing from their predecessor by more than the
    /// continuity budget.
    fn breaks(&self, samples: &[BranchSample]) -> Vec<f64> {
        let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.y), hi.max(p.y)));
        let budget = self.opts.continuity * (hi - lo).max(1e-12 * hi.abs());
        samples.windows(2).filter(|w| (w[1].y - w[0].y).abs() > budget).map(|w| w[1].t).collect()
    }

    /// Both curves from a cold solve of L at `t0`; M is anchored on L at `t0 + π`.
    fn curves(&self, t0: f64) -> Result<Sweep> {
        if let Some(c) = symmetry_center(self.body, self.solver.density) {
            return self.symmetric_curves(c, t0);
        }
        let first = self.cold(t0, Side::L)?;
        let l = self.trace(first, Side::L, self.opts.grid)?;
        let half = t0 + PI;
        let anchor = l.sample_at(half).ok_or_else(|| Error::InvalidArgument("sweep grid must be even".into()))?;
        let anchor = self.point(anchor)?;
        let m0 = match self.step(&anchor, Side::L, t0, Side::M) {
            Ok(p) => p,
            Err(_) => self.cold(t0, Side::M)?,
        };
        let m = self.trace(m0, Side::M, self.opts.grid)?;
        Ok(Sweep { l, m })
    }

    /// On a point-symmetric body `L_{t+π}` and `M_t` are both the
    /// reflection of `L_t`: trace L over a half turn and reflect the rest.
    /// A branch that does not close after the half turn shows up as a break
    /// at `t0 + π`, where the sample is the reflected start.
    fn symmetric_curves(&self, c: Vec2, t0: f64) -> Result<Sweep> {
        let half = self.trace(self.cold(t0, Side::L)?, Side::L, self.opts.grid / 2)?;
        let flip = Motion { angle: PI, from: c, to: c };
        let moved = |s: &BranchSample, dt: f64| BranchSample { t: s.t + dt, y: s.y, plan: s.plan.moved(&flip) };
        let mut samples = half.samples.clone();
        samples.extend(half.samples.iter().map(|s| moved(s, PI)));
        samples.push(moved(&half.samples[0], TAU));
        let mut broken: Vec<f64> = half.broken_at.iter().flat_map(|&t| [t, t + PI]).collect();
        broken.extend(self.breaks(&samples));
        broken.sort_by(f64::total_cmp);
        broken.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let closing = samples.pop().expect("closing sample");
        let curve = |side: Side, samples: Vec<BranchSample>, closing: BranchSample| BranchCurve {
            side,
            m: self.sub,
            t0,
            samples,
            closing,
            continuous: broken.is_empty(),
            broken_at: broken.clone(),
        };
        let m_samples = samples.iter().map(|s| moved(s, 0.0)).collect();
        let m_closing = moved(&closing, 0.0);
        Ok(Sweep { l: curve(Side::L, samples, closing), m: curve(Side::M, m_samples, m_closing) })
    }

    fn point(&self, s: &BranchSample) -> Result<Point> {
        let pair = halving_line(self.body, s.t, self.solver.density)?;
        Ok(Point { t: s.t, pair, y: s.y, plan: s.plan.clone() })
    }

    fn pair_point(&self, l: &BranchSample, m: &BranchSample) -> Result<PairPoint> {
        Ok(PairPoint { l: self.point(l)?, m: self.point(m)? })
    }

    /// Solve both halves at `t` from the solutions at `from`, cold where the
    /// warm start fails.
    fn pair_step(&self, from: &PairPoint, t: f64) -> Result<PairPoint> {
        let side = |p: &Point, s: Side| self.step(p, s, t, s).or_else(|_| self.cold(t, s));
        Ok(PairPoint { l: side(&from.l, Side::L)?, m: side(&from.m, Side::M)? })
    }
}

#[derive(Clone, Debug)]
struct PairPoint {
    l: Point,
    m: Point,
}

impl PairPoint {
    fn d(&self) -> f64 {
        self.l.y - self.m.y
    }

    fn crossing(&self) -> Crossing {
        Crossing {
            t: self.l.t.rem_euclid(TAU),
            y: 0.5 * (self.l.y + self.m.y),
            y_l: self.l.y,
            y_m: self.m.y,
            left: self.l.plan.clone(),
            right: self.m.plan.clone(),
        }
    }
}

/// The two traced curves of a sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sweep {
    pub l: BranchCurve,
    pub m: BranchCurve,
}

impl Sweep {
    /// `(t, G_L(t), G_M(t))` on the angles sampled by both curves.
    pub fn table(&self) -> Vec<(f64, f64, f64)> {
        self.l.samples.iter().filter_map(|s| self.m.value_at(s.t).map(|ym| (s.t, s.y, ym))).collect()
    }

    /// `max |G_M(t) - G_L(t + π)|` over the common samples, relative to the mean value.
    pub fn half_turn_defect(&self) -> f64 {
        let scale = self.l.samples.iter().map(|s| s.y.abs()).sum::<f64>() / self.l.samples.len() as f64;
        let mut worst: f64 = 0.0;
        for s in &self.m.samples {
            let shifted = s.t + PI;
            let target = if shifted < self.l.t0 + TAU + 1e-12 { shifted } else { shifted - TAU };
            let other = if (target - self.l.closing.t).abs() < 1e-12 { Some(self.l.closing.y) } else { self.l.value_at(target) };
            if let Some(y) = other {
                worst = worst.max((s.y - y).abs());
            }
        }
        worst / scale
    }
}

/// A direction whose halves admit sub-partitions of one common value.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Crossing {
    pub t: f64,
    pub y: f64,
    pub y_l: f64,
    pub y_m: f64,
    pub left: Plan,
    pub right: Plan,
}

impl Crossing {
    pub fn plan(&self) -> Plan {
        Plan::Halving { t: self.t, left: Box::new(self.left.clone()), right: Box::new(self.right.clone()) }
    }

    /// `|y_l - y_m| / |y|`.
    pub fn defect(&self) -> f64 {
        (self.y_l - self.y_m).abs() / self.y.abs()
    }
}

/// Trace `G_L` and `G_M` for `m'`-partitions of the halves.
pub fn branch_curves(
    body: &ConvexPolygon,
    m_sub: usize,
    f: &Functional,
    density: &Density,
    opts: &GeneralOptions,
) -> Result<Sweep> {
    check_grid(&opts.sweep)?;
    let tracer = Tracer { solver: Solver { f, density, opts }, body, sub: m_sub, tol: opts.partition.tol_f, opts: &opts.sweep };
    tracer.curves(0.0)
}

/// One side of [`branch_curves`]; a curve that stays discontinuous at the
/// finest step is an error.
pub fn branch_curve(
    body: &ConvexPolygon,
    m_sub: usize,
    f: &Functional,
    density: &Density,
    side: Side,
    opts: &GeneralOptions,
) -> Result<BranchCurve> {
    let sweep = branch_curves(body, m_sub, f, density, opts)?;
    let c = match side {
        Side::L => sweep.l,
        Side::M => sweep.m,
    };
    match c.broken_at.first() {
        Some(&t) => Err(Error::BranchBroken { t }),
        None => Ok(c),
    }
}

fn check_grid(opts: &SweepOptions) -> Result<()> {
    if opts.grid < 2 || opts.grid % 2 != 0 {
        return Err(Error::InvalidArgument(format!("sweep grid must be even and positive, got {}", opts.grid)));
    }
    Ok(())
}

/// A crossing of the curves of `sweep`, refined to `|G_L - G_M| <= tol * |y|`
/// with fresh solves.
pub fn find_crossing(
    body: &ConvexPolygon,
    f: &Functional,
    density: &Density,
    sweep: &Sweep,
    refine_tol: f64,
    opts: &GeneralOptions,
) -> Result<Crossing> {
    let tracer = Tracer { solver: Solver { f, density, opts }, body, sub: sweep.l.m, tol: opts.partition.tol_f, opts: &opts.sweep };
    crossing_of(&tracer, sweep, refine_tol)
}

/// Centre of point symmetry of `body` under `density`, if any.
fn symmetry_center(body: &ConvexPolygon, density: &Density) -> Option<Vec2> {
    if !density.is_uniform() {
        return None;
    }
    let c = body.vertex_mean();
    let tol = 1e-12 * body.diameter();
    body.vertices().iter().all(|&v| body.distance_to(c * 2.0 - v) <= tol).then_some(c)
}

/// On a point-symmetric body `M_t` is the reflection of `L_t`, so every
/// direction is a crossing: reflect the solution of `L` at `t`.
fn reflected_crossing(c: Vec2, t: f64, l: &BranchSample) -> Crossing {
    let right = l.plan.moved(&Motion { angle: PI, from: c, to: c });
    Crossing { t: t.rem_euclid(TAU), y: l.y, y_l: l.y, y_m: l.y, left: l.plan.clone(), right }
}

fn crossing_of(tracer: &Tracer, sweep: &Sweep, refine_tol: f64) -> Result<Crossing> {
    if let Some(c) = symmetry_center(tracer.body, tracer.solver.density) {
        return Ok(reflected_crossing(c, sweep.l.t0, &sweep.l.samples[0]));
    }
    let n = tracer.opts.grid;
    let h = TAU / n as f64;
    let t0 = sweep.l.t0;
    let mut grid: Vec<(f64, f64, (BranchSample, BranchSample))> = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = t0 + k as f64 * h;
        if let (Some(a), Some(b)) = (sweep.l.sample_at(t), sweep.m.sample_at(t)) {
            grid.push((t, a.y - b.y, (a.clone(), b.clone())));
        }
    }
    let scale = grid.iter().map(|g| (g.2 .0.y.abs() + g.2 .1.y.abs()) * 0.5).sum::<f64>() / grid.len().max(1) as f64;
    let tol = refine_tol * scale;
    let trace: Vec<(f64, f64)> = grid.iter().map(|g| (g.0, g.1)).collect();
    let found = crossing_search(&grid, tol, tracer.opts.max_bisect, tracer.opts.min_step, |t, from: &(BranchSample, BranchSample)| {
        let p = tracer.pair_point(&from.0, &from.1)?;
        let q = tracer.pair_step(&p, t)?;
        Ok((q.d(), (q.l.sample(), q.m.sample())))
    });
    match found {
        Ok((t, _, (a, b))) => {
            let pp = tracer.pair_point(&a, &b)?;
            let mut c = pp.crossing();
            c.t = t.rem_euclid(TAU);
            Ok(c)
        }
        Err(_) => Err(Error::NoCrossingFound { trace }),
    }
}

/// Plateau rule, then sign-change brackets, smallest jump in `d` first.
/// `samples` holds `(t, d, state)` sorted by `t`; `eval(t, nearest)` solves
/// afresh. A bracket narrower than `min_width` whose end values have not
/// shrunk is a jump, not a root.
fn crossing_search<P: Clone>(
    samples: &[(f64, f64, P)],
    tol: f64,
    max_iter: usize,
    min_width: f64,
    mut eval: impl FnMut(f64, &P) -> Result<(f64, P)>,
) -> Result<(f64, f64, P)> {
    if let Some(s) = samples.iter().find(|s| s.1.abs() <= tol) {
        return Ok(s.clone());
    }
    let mut brackets: Vec<(&(f64, f64, P), &(f64, f64, P))> =
        samples.windows(2).filter(|w| (w[0].1 < 0.0) != (w[1].1 < 0.0)).map(|w| (&w[0], &w[1])).collect();
    brackets.sort_by(|x, y| (x.1 .1 - x.0 .1).abs().total_cmp(&(y.1 .1 - y.0 .1).abs()));
    for (a, b) in brackets {
        if let Ok(r) = illinois(a.clone(), b.clone(), tol, max_iter, min_width, &mut eval) {
            return Ok(r);
        }
    }
    Err(Error::NoCrossingFound { trace: samples.iter().map(|s| (s.0, s.1)).collect() })
}

/// Regula falsi with the Illinois modification. Each new point is solved
/// from the nearer bracket end.
fn illinois<P: Clone>(
    mut a: (f64, f64, P),
    mut b: (f64, f64, P),
    tol: f64,
    max_iter: usize,
    min_width: f64,
    eval: &mut impl FnMut(f64, &P) -> Result<(f64, P)>,
) -> Result<(f64, f64, P)> {
    let (mut fa, mut fb) = (a.1, b.1);
    let gap = a.1.abs() + b.1.abs();
    let mut last_side = 0i8;
    for _ in 0..max_iter {
        let width = b.0 - a.0;
        // Near a root |d| shrinks with the bracket; across a jump it does not.
        if width < 1e-14 || (width < min_width && a.1.abs() + b.1.abs() > 0.1 * gap) {
            break;
        }
        let mut t = (a.0 * fb - b.0 * fa) / (fb - fa);
        if !(t > a.0 + 0.01 * width && t < b.0 - 0.01 * width) {
            t = 0.5 * (a.0 + b.0);
        }
        let from = if t - a.0 <= b.0 - t { &a.2 } else { &b.2 };
        let (d, p) = eval(t, from)?;
        if d.abs() <= tol {
            return Ok((t, d, p));
        }
        if (d < 0.0) == (fa < 0.0) {
            a = (t, d, p);
            fa = d;
            if last_side == -1 {
                fb *= 0.5;
            }
            last_side = -1;
        } else {
            b = (t, d, p);
            fb = d;
            if last_side == 1 {
                fa *= 0.5;
            }
            last_side = 1;
        }
    }
    Err(Error::NoCrossingFound { trace: vec![(a.0, a.1), (b.0, b.1)] })
}

/// Crossing search on a synthetic curve `d` over the grid `ts` covering a
/// full turn: the first `|d| <= tol` sample, else the first sign change
/// (wrapping around) refined with `eval`.
pub fn locate_crossing(ts: &[f64], ds: &[f64], tol: f64, mut eval: impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    if ts.is_empty() || ts.len() != ds.len() {
        return Err(Error::InvalidArgument("need matching nonempty samples".into()));
    }
    let mut samples: Vec<(f64, f64, ())> = ts.iter().zip(ds).map(|(&t, &d)| (t, d, ())).collect();
    samples.push((ts[0] + TAU, ds[0], ()));
    crossing_search(&samples, tol, 100, 1e-14, |t, _| Ok((eval(t)?, ()))).map(|(t, d, _)| (t.rem_euclid(TAU), d))
}

/// The tree of the halving cut recorded in `c`, `m'` parts per half.
pub fn assemble(
    body: &ConvexPolygon,
    m_sub: usize,
    c: &Crossing,
    f: &Functional,
    density: &Density,
) -> Result<PartitionTree> {
    PartitionTree::build(body, 2 * m_sub, &c.plan(), f, density)
}

/// Halving level of the recursion: with a warm plan, a joint fit of all its
/// cuts; cold, full sweeps from a few anchors.
pub(crate) fn solve_halving(solver: &Solver, body: &ConvexPolygon, sub: usize, warm: Option<&Plan>, tol: f64) -> Result<Solved> {
    let opts = &solver.opts.sweep;
    check_grid(opts)?;
    let tracer = Tracer { solver: *solver, body, sub, tol: child_tol(tol), opts };
    let refine = 0.5 * tol;
    let c = match warm {
        Some(plan @ Plan::Halving { .. }) => return joint::fit(solver, body, 2 * sub, plan, tol),
        Some(_) => return Err(Error::InvalidArgument(format!("warm plan does not fit m = {}", 2 * sub))),
        None if symmetry_center(body, solver.density).is_some() => {
            let c = symmetry_center(body, solver.density).expect("checked");
            let l = tracer.cold(0.0, Side::L)?;
            reflected_crossing(c, 0.0, &l.sample())
        }
        None => {
            let mut last = None;
            let mut found = None;
            for k in 0..opts.anchors.max(1) {
                let t0 = k as f64 * TAU / 7.0;
                match tracer.curves(t0).and_then(|s| crossing_of(&tracer, &s, refine)) {
                    Ok(c) => {
                        found = Some(c);
                        break;
                    }
                    Err(e) => last = Some(e),
                }
            }
            match found {
                Some(c) => c,
                None => return Err(last.expect("at least one anchor")),
            }
        }
    };
    Ok(Solved { y: c.y, plan: c.plan() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_halves() {
        let sq = ConvexPolygon::unit_square();
        let h = halving_line(&sq, 0.0, &Density::Uniform).unwrap();
        assert!((h.offset - 0.5).abs() < 1e-12);
        assert!(h.l.centroid().y > 0.5 && h.m.centroid().y < 0.5);
        let v = halving_line(&sq, PI / 2.0, &Density::Uniform).unwrap();
        assert!((v.normal.dot(Vec2::new(0.5, 0.3)) - v.offset).abs() < 1e-12);
        assert!(v.l.centroid().x < 0.5);
    }

    #[test]
    fn triangle_horizontal_halving() {
        let tri = ConvexPolygon::new(vec![Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(0.0, 1.0)]).unwrap();
        let h = halving_line(&tri, 0.0, &Density::Uniform).unwrap();
        // Similar triangles: the top piece has half the area, so height 1/√2.
        assert!((h.offset - (1.0 - 0.5f64.sqrt())).abs() < 1e-12);
        assert!((h.l.area() - 0.5).abs() < 1e-12 && (h.m.area() - 0.5).abs() < 1e-12);
        let (a, b) = h.chord;
        assert!((a.y - h.offset).abs() < 1e-12 && (b.y - h.offset).abs() < 1e-12);
        assert!(a.x < b.x);
    }

    #[test]
    fn interchange_on_square_is_exact() {
        assert!(interchange_check(&ConvexPolygon::unit_square(), 0.0, &Density::Uniform) < 1e-9);
    }

    #[test]
    fn periodic_in_t() {
        let tri = ConvexPolygon::new(vec![Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(0.0, 1.0)]).unwrap();
        let a = halving_line(&tri, 0.7, &Density::Uniform).unwrap();
        let b = halving_line(&tri, 0.7 + TAU, &Density::Uniform).unwrap();
        assert!(a.l.hausdorff(&b.l) < 1e-12 && a.m.hausdorff(&b.m) < 1e-12);
    }

    #[test]
    fn synthetic_sine_crossing() {
        let ts: Vec<f64> = (0..16).map(|k| TAU * k as f64 / 16.0).collect();
        let ds: Vec<f64> = ts.iter().map(|t| t.sin()).collect();
        let (t, _) = locate_crossing(&ts, &ds, 1e-12, |t| Ok(t.sin())).unwrap();
        assert!(t.abs() < 1e-12 || (t - PI).abs() < 1e-12);
    }

    #[test]
    fn synthetic_shifted_crossing_is_refined() {
        let ts: Vec<f64> = (0..16).map(|k| TAU * k as f64 / 16.0).collect();
        let d = |t: f64| (t - 0.3).sin();
        let ds: Vec<f64> = ts.iter().map(|&t| d(t)).collect();
        let (t, v) = locate_crossing(&ts, &ds, 1e-12, |t| Ok(d(t))).unwrap();
        assert!(v.abs() <= 1e-12);
        assert!((t - 0.3).abs() < 1e-10);
    }

    #[test]
    fn no_sign_change_is_reported_with_trace() {
        let ts: Vec<f64> = (0..8).map(|k| TAU * k as f64 / 8.0).collect();
        let ds = vec![1.0; 8];
        match locate_crossing(&ts, &ds, 1e-9, |_| Ok(1.0)) {
            Err(Error::NoCrossingFound { trace }) => assert_eq!(trace.len(), 9),
            other => panic!("{other:?}"),
        }
    }
}
