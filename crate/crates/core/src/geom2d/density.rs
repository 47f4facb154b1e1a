use std::fmt;
use std::sync::Arc;

use super::quadrature::{segment_integral, QuadratureOrder, TriangleRule};
use super::{clip_tagged, Clip, ConvexPolygon, Vec2};

/// A nonnegative density on the plane; the measure used for "area".
#[derive(Clone)]
pub enum Density {
    /// Lebesgue measure.
    Uniform,
    /// `max(a x + b y + c, 0)`.
    Linear { a: f64, b: f64, c: f64 },
    /// `exp(-|x - center|^2 / (2 sigma^2))`.
    Gauss { center: Vec2, sigma: f64 },
    /// Arbitrary evaluator; must be nonnegative on the bodies it is used with.
    Custom(Arc<dyn Fn(Vec2) -> f64 + Send + Sync>),
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Density::Uniform => write!(f, "Uniform"),
            Density::Linear { a, b, c } => write!(f, "Linear({a}, {b}, {c})"),
            Density::Gauss { center, sigma } => write!(f, "Gauss({center}, {sigma})"),
            Density::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Default for Density {
    fn default() -> Self {
        Density::Uniform
    }
}

impl std::str::FromStr for Density {
    type Err = crate::error::Error;

    /// `uniform`, `linear:a,b,c` or `gauss:cx,cy,sigma`.
    fn from_str(s: &str) -> crate::error::Result<Self> {
        let bad = |why: &str| crate::error::Error::InvalidArgument(format!("density '{s}': {why}"));
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let nums = || -> crate::error::Result<Vec<f64>> {
            args.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad("expected numbers"))).collect()
        };
        match kind.trim() {
            "uniform" if args.is_empty() => Ok(Density::Uniform),
            "linear" => match nums()?[..] {
                [a, b, c] => Ok(Density::Linear { a, b, c }),
                _ => Err(bad("linear takes a,b,c")),
            },
            "gauss" => match nums()?[..] {
                [x, y, sigma] if sigma > 0.0 => Ok(Density::Gauss { center: Vec2::new(x, y), sigma }),
                _ => Err(bad("gauss takes cx,cy,sigma with sigma > 0")),
            },
            _ => Err(bad("unknown kind")),
        }
    }
}

impl Density {
    pub fn custom(f: impl Fn(Vec2) -> f64 + Send + Sync + 'static) -> Self {
        Density::Custom(Arc::new(f))
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, Density::Uniform)
    }

    pub fn eval(&self, p: Vec2) -> f64 {
        match self {
            Density::Uniform => 1.0,
            Density::Linear { a, b, c } => (a * p.x + b * p.y + c).max(0.0),
            Density::Gauss { center, sigma } => (-(p - *center).norm_sq() / (2.0 * sigma * sigma)).exp(),
            Density::Custom(f) => f(p),
        }
    }

    /// Measure of `p` with the default degree-7 rule.
    pub fn mass(&self, p: &ConvexPolygon) -> f64 {
        self.integrate(p, QuadratureOrder::default())
    }

    /// `∫_P ρ`. Exact for the uniform and linear densities; otherwise the
    /// fan triangles are subdivided until the rule of degree `order` agrees
    /// with its refinement to about 1e-13 relative.
    pub fn integrate(&self, p: &ConvexPolygon, order: QuadratureOrder) -> f64 {
        match self {
            Density::Uniform => p.area(),
            Density::Linear { a, b, c } => match self.positive_part(p) {
                Some(q) => {
                    let g = q.centroid();
                    q.area() * (a * g.x + b * g.y + c)
                }
                None => 0.0,
            },
            _ => adaptive_fan_integrate(p, &TriangleRule::for_order(order), |x| self.eval(x)),
        }
    }

    /// `∫_P ρ g`.
    pub fn integrate_weighted(&self, p: &ConvexPolygon, order: QuadratureOrder, g: impl Fn(Vec2) -> f64) -> f64 {
        let rule = TriangleRule::for_order(order);
        match self {
            Density::Uniform => fan_integrate(p, &rule, g),
            Density::Linear { .. } => match self.positive_part(p) {
                Some(q) => fan_integrate(&q, &rule, |x| self.eval(x) * g(x)),
                None => 0.0,
            },
            _ => adaptive_fan_integrate(p, &rule, |x| self.eval(x) * g(x)),
        }
    }

    /// `∫ ρ ds` along the segment `a -> b`.
    pub fn line_integral(&self, a: Vec2, b: Vec2) -> f64 {
        match self {
            Density::Uniform => a.dist(b),
            Density::Linear { .. } => {
                let (fa, fb) = (self.affine(a), self.affine(b));
                let len = a.dist(b);
                match (fa >= 0.0, fb >= 0.0) {
                    (true, true) => 0.5 * (fa + fb) * len,
                    (false, false) => 0.0,
                    _ => {
                        // Only the positive piece contributes; it is a triangle in (s, ρ).
                        let (pos, neg) = if fa >= 0.0 { (fa, fb) } else { (fb, fa) };
                        0.5 * pos * len * pos / (pos - neg)
                    }
                }
            }
            _ => segment_integral(a, b, 6, |x| self.eval(x)),
        }
    }

    /// Offset `s` with `mass(body ∩ {normal . x <= s}) = target`, by bisection.
    pub fn cut_offset(&self, body: &ConvexPolygon, normal: Vec2, target: f64) -> f64 {
        let (mut lo, mut hi) = body.support_range(normal);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let below = self.mass_below(body, normal, mid);
            if below < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Mass of `body ∩ {normal . x <= offset}` without snapping vertices to
    /// the line, so that it is monotone in `offset` to rounding.
    fn mass_below(&self, body: &ConvexPolygon, normal: Vec2, offset: f64) -> f64 {
        let tags = vec![(); body.len()];
        match clip_tagged(body.vertices(), &tags, 0.0, normal, offset, ()) {
            Clip::Unchanged => self.mass(body),
            Clip::Empty => 0.0,
            Clip::Clipped(v, _) => match ConvexPolygon::from_clip(v) {
                Some(q) if q.area() > 0.0 => self.mass(&q),
                _ => 0.0,
            },
        }
    }

    fn affine(&self, p: Vec2) -> f64 {
        match self {
            Density::Linear { a, b, c } => a * p.x + b * p.y + c,
            _ => self.eval(p),
        }
    }

    /// `P ∩ {ρ > 0}` for the linear density.
    fn positive_part(&self, p: &ConvexPolygon) -> Option<ConvexPolygon> {
        match *self {
            Density::Linear { a, b, c } => {
                if a == 0.0 && b == 0.0 {
                    return (c > 0.0).then(|| p.clone());
                }
                p.clip_halfplane(Vec2::new(-a, -b), c)
            }
            _ => Some(p.clone()),
        }
    }
}

/// Fan-triangulate from the vertex mean and apply `rule` per triangle.
fn fan_integrate(p: &ConvexPolygon, rule: &TriangleRule, mut g: impl FnMut(Vec2) -> f64) -> f64 {
    let c = p.vertex_mean();
    p.edges().map(|(a, b)| rule.integrate(c, a, b, &mut g)).sum()
}

const ADAPT_TOL: f64 = 1e-13;
const ADAPT_DEPTH: u32 = 8;

/// [`fan_integrate`] with each fan triangle split into four until the
/// split changes the estimate by less than its share of the tolerance.
fn adaptive_fan_integrate(p: &ConvexPolygon, rule: &TriangleRule, mut g: impl FnMut(Vec2) -> f64) -> f64 {
    let c = p.vertex_mean();
    let coarse: Vec<f64> = p.edges().map(|(a, b)| rule.integrate(c, a, b, &mut g)).collect();
    let tol = ADAPT_TOL * coarse.iter().map(|v| v.abs()).sum::<f64>() / coarse.len() as f64;
    p.edges().zip(coarse).map(|((a, b), v)| refine(rule, [c, a, b], v, tol, ADAPT_DEPTH, &mut g)).sum()
}

fn refine(rule: &TriangleRule, [a, b, c]: [Vec2; 3], coarse: f64, tol: f64, depth: u32, g: &mut impl FnMut(Vec2) -> f64) -> f64 {
    let (ab, bc, ca) = (a.lerp(b, 0.5), b.lerp(c, 0.5), c.lerp(a, 0.5));
    let parts = [[a, ab, ca], [ab, b, bc], [ca, bc, c], [bc, ca, ab]];
    let vals = parts.map(|[x, y, z]| rule.integrate(x, y, z, &mut *g));
    let fine: f64 = vals.iter().sum();
    if depth == 0 || (fine - coarse).abs() <= tol {
        return fine;
    }
    parts.into_iter().zip(vals).map(|(t, v)| refine(rule, t, v, 0.25 * tol, depth - 1, g)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn parse_specs() {
        assert!(matches!("uniform".parse::<Density>(), Ok(Density::Uniform)));
        match "linear:1,0,0.1".parse::<Density>() {
            Ok(Density::Linear { a, b, c }) => assert_eq!((a, b, c), (1.0, 0.0, 0.1)),
            other => panic!("{other:?}"),
        }
        assert!(matches!("gauss:0.5,0.5,0.2".parse::<Density>(), Ok(Density::Gauss { .. })));
        for bad in ["linear:1,2", "gauss:0,0,-1", "cubic", "uniform:3", "linear:a,b,c"] {
            assert!(bad.parse::<Density>().is_err(), "{bad}");
        }
    }

    #[test]
    fn uniform_and_first_moment() {
        let sq = ConvexPolygon::unit_square();
        assert_eq!(Density::Uniform.mass(&sq), 1.0);
        let x = Density::custom(|p| p.x);
        assert!((x.mass(&sq) - 0.5).abs() < 1e-14);
        let lin = Density::Linear { a: 1.0, b: 0.0, c: 0.0 };
        assert!((lin.mass(&sq) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_density_matches_area() {
        let p = super::super::regular_polygon(9, Vec2::new(0.3, -2.0), 1.7, 0.4).unwrap();
        let one = Density::custom(|_| 1.0);
        assert!((one.mass(&p) - p.area()).abs() <= 1e-12 * p.area());
    }

    #[test]
    fn linear_density_is_clamped() {
        // x - 0.5 on the unit square: only the right half counts, ∫ = 1/8.
        let d = Density::Linear { a: 1.0, b: 0.0, c: -0.5 };
        let sq = ConvexPolygon::unit_square();
        assert!((d.mass(&sq) - 0.125).abs() < 1e-15);
        assert!((d.line_integral(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)) - 0.125).abs() < 1e-15);
        assert_eq!(d.line_integral(Vec2::new(0.0, 0.0), Vec2::new(0.0, 1.0)), 0.0);
    }

    /// Monte-Carlo oracle for ∫ exp(x + y) over the unit square.
    #[test]
    fn exponential_density_against_monte_carlo() {
        let d = Density::custom(|p| (p.x + p.y).exp());
        let got = d.mass(&ConvexPolygon::unit_square());

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20_240_601);
        let n = 10_000_000usize;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let v = (rng.random::<f64>() + rng.random::<f64>()).exp();
            s += v;
            s2 += v * v;
        }
        let mean = s / n as f64;
        let sigma = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((got - mean).abs() <= 3.0 * sigma, "quadrature {got}, MC {mean} ± {sigma}");
    }

    #[test]
    fn weighted_second_moment_of_square() {
        // ∫ |x - c|^2 over the unit square about its center is 1/6.
        let sq = ConvexPolygon::unit_square();
        let c = Vec2::new(0.5, 0.5);
        let m2 = Density::Uniform.integrate_weighted(&sq, QuadratureOrder(2), |x| (x - c).norm_sq());
        assert!((m2 - 1.0 / 6.0).abs() < 1e-15);
    }
}
