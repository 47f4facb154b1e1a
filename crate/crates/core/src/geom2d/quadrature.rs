//! Triangle and segment quadrature rules.

use super::Vec2;

/// Polynomial degree a rule must integrate exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadratureOrder(pub u32);

impl Default for QuadratureOrder {
    /// Degree 7.
    fn default() -> Self {
        QuadratureOrder(7)
    }
}

/// Rule on the reference triangle in barycentric form; weights sum to one.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    points: Vec<([f64; 3], f64)>,
    degree: u32,
}

impl TriangleRule {
    /// Smallest built-in rule exact for polynomials of degree `order.0`
    /// (at least one). Degrees above 7 fall back to a collapsed
    /// Gauss-Legendre product rule.
    pub fn for_order(order: QuadratureOrder) -> TriangleRule {
        match order.0 {
            0 | 1 => Self::symmetric(1, &[(1.0, Orbit::Center)]),
            2 => Self::symmetric(2, &[(1.0 / 3.0, Orbit::Edge(2.0 / 3.0))]),
            3..=5 => Self::symmetric(
                5,
                &[
                    (0.225, Orbit::Center),
                    (0.132394152788506, Orbit::Edge(0.059715871789770)),
                    (0.125939180544827, Orbit::Edge(0.797426985353087)),
                ],
            ),
            6 | 7 => Self::symmetric(
                7,
                &[
                    (-0.149570044467682, Orbit::Center),
                    (0.175615257433208, Orbit::Edge(0.479308067841920)),
                    (0.053347235608838, Orbit::Edge(0.869739794195568)),
                    (0.077113760890257, Orbit::General(0.048690315425316, 0.312865496004874)),
                ],
            ),
            d => Self::conical(d),
        }
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integrate `g` over the triangle `(a, b, c)` (any orientation; the
    /// result carries the sign of the orientation).
    pub fn integrate(&self, a: Vec2, b: Vec2, c: Vec2, mut g: impl FnMut(Vec2) -> f64) -> f64 {
        let area = 0.5 * (b - a).cross(c - a);
        let mut acc = 0.0;
        for &([l0, l1, l2], w) in &self.points {
            let p = Vec2::new(l0 * a.x + l1 * b.x + l2 * c.x, l0 * a.y + l1 * b.y + l2 * c.y);
            acc += w * g(p);
        }
        area * acc
    }

    fn symmetric(degree: u32, orbits: &[(f64, Orbit)]) -> TriangleRule {
        let mut points = Vec::new();
        for &(w, orbit) in orbits {
            match orbit {
                Orbit::Center => points.push(([1.0 / 3.0; 3], w)),
                Orbit::Edge(a) => {
                    let b = 0.5 * (1.0 - a);
                    points.push(([a, b, b], w));
                    points.push(([b, a, b], w));
                    points.push(([b, b, a], w));
                }
                Orbit::General(a, b) => {
                    let c = 1.0 - a - b;
                    for l in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                        points.push((l, w));
                    }
                }
            }
        }
        TriangleRule { points, degree }
    }

    /// Duffy-collapsed Gauss-Legendre product rule of the given degree.
    fn conical(degree: u32) -> TriangleRule {
        // u-direction integrand carries the extra (1 - u) Jacobian factor.
        let n = (degree as usize + 2).div_ceil(2);
        let gl = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        for &(xu, wu) in &gl {
            let u = 0.5 * (xu + 1.0);
            for &(xv, wv) in &gl {
                let v = 0.5 * (xv + 1.0) * (1.0 - u);
                // Reference triangle area is 1/2; weights are normalised to it.
                let w = 0.25 * wu * wv * (1.0 - u) * 2.0;
                points.push(([1.0 - u - v, u, v], w));
            }
        }
        TriangleRule { points, degree }
    }
}

#[derive(Clone, Copy)]
enum Orbit {
    Center,
    Edge(f64),
    General(f64, f64),
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm1 = if n == 0 { 0.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Integrate `g` along the segment `a -> b` with an `n`-point Gauss rule.
pub fn segment_integral(a: Vec2, b: Vec2, n: usize, mut g: impl FnMut(Vec2) -> f64) -> f64 {
    let half = 0.5 * a.dist(b);
    gauss_legendre(n)
        .into_iter()
        .map(|(x, w)| w * g(a.lerp(b, 0.5 * (x + 1.0))))
        .sum::<f64>()
        * half
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Exact value of the monomial x^i y^j over the triangle (0,0),(1,0),(0,1).
    fn monomial_exact(i: u32, j: u32) -> f64 {
        factorial(i) * factorial(j) / factorial(i + j + 2)
    }

    #[test]
    fn rules_are_exact_up_to_their_degree() {
        for order in [1, 2, 5, 7, 9, 12] {
            let rule = TriangleRule::for_order(QuadratureOrder(order));
            let (a, b, c) = (Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0));
            for deg in 0..=rule.degree() {
                for i in 0..=deg {
                    let j = deg - i;
                    let got = rule.integrate(a, b, c, |p| p.x.powi(i as i32) * p.y.powi(j as i32));
                    let want = monomial_exact(i, j);
                    assert!(
                        (got - want).abs() < 1e-14,
                        "order {order}: x^{i} y^{j} gave {got}, want {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn weights_sum_to_one() {
        for order in 1..=10 {
            let rule = TriangleRule::for_order(QuadratureOrder(order));
            let s: f64 = rule.points.iter().map(|p| p.1).sum();
            assert!((s - 1.0).abs() < 1e-14, "order {order}: {s}");
        }
    }

    #[test]
    fn gauss_legendre_small_cases() {
        let g2 = gauss_legendre(2);
        assert!((g2[0].0.abs() - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((g2[0].1 - 1.0).abs() < 1e-15);
        let s = segment_integral(Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), 3, |p| p.x.powi(5));
        assert!((s - 64.0 / 6.0).abs() < 1e-12);
    }
}
