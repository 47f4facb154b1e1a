//! Derivative-free and finite-difference least-squares drivers shared by
//! the site solver and the tree polish.

use nalgebra::{DMatrix, DVector};

/// A residual map `x -> r(x)` with an infeasible region.
pub(crate) trait Problem {
    type Extra: Clone;

    /// Pull `x` back into the search box.
    fn project(&self, x: &mut [f64]);

    /// Residuals at `x`, or `None` where they are undefined. Evaluations
    /// may warm-start from the last accepted sample but must not change it.
    fn evaluate(&mut self, x: &[f64]) -> Option<(Vec<f64>, Self::Extra)>;

    /// `s` becomes the new warm-start point.
    fn accept(&mut self, _s: &Sample<Self::Extra>) {}

    fn converged(&self, s: &Sample<Self::Extra>) -> bool;

    /// Finite-difference step per coordinate.
    fn fd_step(&self) -> f64;
}

#[derive(Clone, Debug)]
pub(crate) struct Sample<E> {
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    pub obj: f64,
    pub extra: E,
}

pub(crate) struct Counter {
    pub evals: usize,
    pub max_evals: usize,
}

impl Counter {
    pub fn new(max_evals: usize) -> Self {
        Self { evals: 0, max_evals }
    }

    /// A counter sharing the tally but capped `extra` evaluations from now.
    pub fn budget(&self, extra: usize) -> Self {
        Self { evals: self.evals, max_evals: (self.evals + extra).min(self.max_evals) }
    }

    pub fn exhausted(&self) -> bool {
        self.evals >= self.max_evals
    }
}

pub(crate) fn sample<P: Problem>(p: &mut P, mut x: Vec<f64>, count: &mut Counter) -> Option<Sample<P::Extra>> {
    p.project(&mut x);
    count.evals += 1;
    let (r, extra) = p.evaluate(&x)?;
    let obj = 0.5 * r.iter().map(|v| v * v).sum::<f64>();
    obj.is_finite().then_some(Sample { x, r, obj, extra })
}

/// Compass search with opportunistic polling and step halving.
pub(crate) fn pattern_search<P: Problem>(
    p: &mut P,
    start: Sample<P::Extra>,
    step: f64,
    min_step: f64,
    count: &mut Counter,
    stop: impl Fn(&Sample<P::Extra>) -> bool,
) -> Sample<P::Extra> {
    let mut cur = start;
    p.accept(&cur);
    let mut h = step;
    let n = cur.x.len();
    while h >= min_step && !stop(&cur) && !count.exhausted() {
        let mut improved = false;
        'poll: for k in 0..n {
            for sign in [1.0, -1.0] {
                let mut x = cur.x.clone();
                x[k] += sign * h;
                if let Some(s) = sample(p, x, count) {
                    if s.obj < cur.obj {
                        cur = s;
                        p.accept(&cur);
                        improved = true;
                        break 'poll;
                    }
                }
                if count.exhausted() {
                    break 'poll;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    cur
}

/// Forward-difference Jacobian, falling back to a backward difference where
/// the forward point is infeasible. Columns with neither stay zero.
fn jacobian<P: Problem>(p: &mut P, cur: &Sample<P::Extra>, count: &mut Counter) -> DMatrix<f64> {
    let (nr, nx) = (cur.r.len(), cur.x.len());
    let h = p.fd_step();
    let mut jac = DMatrix::zeros(nr, nx);
    for k in 0..nx {
        for sign in [1.0, -1.0] {
            let mut x = cur.x.clone();
            x[k] += sign * h;
            p.project(&mut x);
            let dx = x[k] - cur.x[k];
            if dx == 0.0 {
                continue;
            }
            count.evals += 1;
            if let Some((r, _)) = p.evaluate(&x) {
                for i in 0..nr {
                    jac[(i, k)] = (r[i] - cur.r[i]) / dx;
                }
                break;
            }
        }
    }
    jac
}

/// Levenberg-Marquardt in the min-norm form `δ = -Jᵀ (J Jᵀ + λ I)⁻¹ r`,
/// suited to underdetermined residuals.
pub(crate) fn levenberg_marquardt<P: Problem>(
    p: &mut P,
    start: Sample<P::Extra>,
    max_iter: usize,
    count: &mut Counter,
) -> Sample<P::Extra> {
    let mut cur = start;
    p.accept(&cur);
    let mut lambda: Option<f64> = None;
    for _ in 0..max_iter {
        if p.converged(&cur) || count.exhausted() {
            break;
        }
        let jac = jacobian(p, &cur, count);
        let jjt = &jac * jac.transpose();
        let scale = (0..jjt.nrows()).map(|i| jjt[(i, i)]).fold(0.0, f64::max);
        if !(scale > 0.0) {
            break;
        }
        let mut lam = lambda.unwrap_or(1e-3 * scale).max(1e-15 * scale);
        let r = DVector::from_column_slice(&cur.r);
        let mut accepted = false;
        for _ in 0..30 {
            let mut a = jjt.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lam;
            }
            let Some(ch) = a.cholesky() else {
                lam *= 10.0;
                continue;
            };
            let step = -(jac.transpose() * ch.solve(&r));
            let x: Vec<f64> = cur.x.iter().zip(step.iter()).map(|(a, d)| a + d).collect();
            if let Some(s) = sample(p, x, count) {
                if s.obj < cur.obj {
                    cur = s;
                    p.accept(&cur);
                    lam *= 0.2;
                    accepted = true;
                    break;
                }
            }
            lam *= 8.0;
        }
        lambda = Some(lam);
        if !accepted {
            break;
        }
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Residuals of the circle `x² + y² = 1` and the line `x = y`.
    struct Circle;

    impl Problem for Circle {
        type Extra = ();
        fn project(&self, _x: &mut [f64]) {}
        fn evaluate(&mut self, x: &[f64]) -> Option<(Vec<f64>, ())> {
            Some((vec![x[0] * x[0] + x[1] * x[1] - 1.0, x[0] - x[1]], ()))
        }
        fn converged(&self, s: &Sample<()>) -> bool {
            s.r.iter().all(|v| v.abs() < 1e-12)
        }
        fn fd_step(&self) -> f64 {
            1e-7
        }
    }

    #[test]
    fn lm_solves_square_system() {
        let mut count = Counter::new(10_000);
        let s0 = sample(&mut Circle, vec![2.0, 0.5], &mut count).unwrap();
        let s = levenberg_marquardt(&mut Circle, s0, 100, &mut count);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.x[0] - h).abs() < 1e-9 && (s.x[1] - h).abs() < 1e-9, "{:?}", s.x);
    }

    #[test]
    fn pattern_search_decreases() {
        let mut count = Counter::new(10_000);
        let s0 = sample(&mut Circle, vec![2.0, 0.5], &mut count).unwrap();
        let obj0 = s0.obj;
        let s = pattern_search(&mut Circle, s0, 0.5, 1e-9, &mut count, |s| s.obj < 1e-16);
        assert!(s.obj < 1e-12 * obj0);
    }

    /// One equation in two unknowns: the min-norm step lands on the nearest point.
    struct Line;

    impl Problem for Line {
        type Extra = ();
        fn project(&self, _x: &mut [f64]) {}
        fn evaluate(&mut self, x: &[f64]) -> Option<(Vec<f64>, ())> {
            Some((vec![x[0] + x[1] - 1.0], ()))
        }
        fn converged(&self, s: &Sample<()>) -> bool {
            s.r[0].abs() < 1e-13
        }
        fn fd_step(&self) -> f64 {
            1e-7
        }
    }

    #[test]
    fn lm_underdetermined_goes_to_nearest_solution() {
        let mut count = Counter::new(10_000);
        let s0 = sample(&mut Line, vec![0.0, 0.0], &mut count).unwrap();
        let s = levenberg_marquardt(&mut Line, s0, 100, &mut count);
        assert!((s.x[0] - 0.5).abs() < 1e-7 && (s.x[1] - 0.5).abs() < 1e-7, "{:?}", s.x);
    }
}
