//! Capacity-constrained power diagrams: find weights so that every cell
//! carries a prescribed mass.
//!
//! The weights maximise the concave dual
//!
//! ```text
//! g(w) = Σ c_i w_i + ∫_K min_i (|x - x_i|^2 - w_i) dμ
//! ```
//!
//! whose gradient is `c_i - mass_i(w)`. The negative Hessian is a weighted
//! graph Laplacian with off-diagonal entries `∫_{e_ij} ρ ds / (2 |x_i - x_j|)`
//! over the shared edges, so each Newton step is one small SPD solve. Steps
//! are damped by backtracking until `g` increases (Armijo) and, once all
//! cells are nonempty, no cell falls below half the smallest initial mass.
//! Empty cells make the Hessian singular; the solver then takes gradient
//! steps until every cell has reappeared.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom2d::{ConvexPolygon, Density, QuadratureOrder, Vec2};
use crate::powerdiag::{power_cell_tagged, EdgeOwner, SiteConfig, TaggedCell};

#[derive(Clone, Debug)]
pub struct WeightOptions {
    /// Mass tolerance relative to the total mass.
    pub tol: f64,
    pub max_iter: usize,
    pub max_backtrack: usize,
}

impl Default for WeightOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 200, max_backtrack: 40 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightSolution {
    pub config: SiteConfig,
    pub masses: Vec<f64>,
    pub capacities: Vec<f64>,
    pub iterations: usize,
    /// `max_i |mass_i - capacity_i| / μ(K)`.
    pub max_mass_error: f64,
    /// Dual objective after every accepted step, starting with the initial
    /// point. Each entry adds the step's gain to the previous one, so gains
    /// below the rounding of `g` still accumulate.
    pub dual_trace: Vec<f64>,
    pub converged: bool,
}

/// Equal-area weights from `w = 0` with default iteration limits.
pub fn solve_weights(
    body: &ConvexPolygon,
    sites: &[Vec2],
    capacities: &[f64],
    density: &Density,
    tol: f64,
) -> Result<WeightSolution> {
    let opts = WeightOptions { tol, ..WeightOptions::default() };
    solve_weights_from(body, sites, None, capacities, density, &opts)
}

/// Capacities `μ(K)/m` for each of `m` cells.
pub fn equal_capacities(body: &ConvexPolygon, density: &Density, m: usize) -> Vec<f64> {
    vec![density.mass(body) / m as f64; m]
}

struct Eval {
    cells: Vec<Option<TaggedCell>>,
    masses: Vec<f64>,
    dual: f64,
    /// Rounding scale of `dual`.
    dual_noise: f64,
}

impl Eval {
    fn all_nonempty(&self) -> bool {
        self.masses.iter().all(|&m| m > 0.0)
    }
}

fn evaluate(body: &ConvexPolygon, sites: &[Vec2], w: &[f64], caps: &[f64], density: &Density) -> Eval {
    let cfg = SiteConfig { sites: sites.to_vec(), weights: w.to_vec() };
    let order = if density.is_uniform() { QuadratureOrder(2) } else { QuadratureOrder(7) };
    let mut cells = Vec::with_capacity(sites.len());
    let mut masses = Vec::with_capacity(sites.len());
    let mut dual = 0.0;
    let mut noise = 0.0;
    for (i, &xi) in sites.iter().enumerate() {
        let cell = power_cell_tagged(body, &cfg, i);
        let (mass, moment) = match &cell {
            Some(c) => (
                density.mass(&c.polygon),
                density.integrate_weighted(&c.polygon, order, |x| (x - xi).norm_sq()),
            ),
            None => (0.0, 0.0),
        };
        dual += (caps[i] - mass) * w[i] + moment;
        noise += moment.abs() + (caps[i] * w[i]).abs() + (mass * w[i]).abs();
        cells.push(cell);
        masses.push(mass);
    }
    Eval { cells, masses, dual, dual_noise: 64.0 * f64::EPSILON * noise }
}

/// Negative Hessian of the dual: a Laplacian over shared cell edges.
fn laplacian(sites: &[Vec2], cells: &[Option<TaggedCell>], density: &Density) -> DMatrix<f64> {
    let m = sites.len();
    let mut lap = DMatrix::zeros(m, m);
    for (i, cell) in cells.iter().enumerate() {
        let Some(cell) = cell else { continue };
        for ((a, b), owner) in cell.polygon.edges().zip(&cell.owners) {
            if let EdgeOwner::Site(j) = *owner {
                // Each shared edge is seen from both sides; average the two.
                let c = 0.25 * density.line_integral(a, b) / sites[i].dist(sites[j]);
                lap[(i, j)] -= c;
                lap[(j, i)] -= c;
                lap[(i, i)] += c;
                lap[(j, j)] += c;
            }
        }
    }
    lap
}

/// Newton direction `L Δ = grad` on the zero-mean subspace.
fn newton_direction(lap: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let m = lap.nrows();
    let trace = lap.trace();
    if !(trace > 0.0) {
        return None;
    }
    let mut a = lap.clone();
    a.add_scalar_mut(trace / (m * m) as f64);
    if let Some(ch) = a.clone().cholesky() {
        return Some(ch.solve(grad));
    }
    for k in 0..m {
        a[(k, k)] += 1e-12 * trace;
    }
    a.cholesky().map(|ch| ch.solve(grad))
}

/// Solve for weights starting from `init` (or zero).
pub fn solve_weights_from(
    body: &ConvexPolygon,
    sites: &[Vec2],
    init: Option<&[f64]>,
    capacities: &[f64],
    density: &Density,
    opts: &WeightOptions,
) -> Result<WeightSolution> {
    let m = sites.len();
    if capacities.len() != m {
        return Err(Error::InvalidArgument(format!("{m} sites but {} capacities", capacities.len())));
    }
    if capacities.iter().any(|&c| !(c > 0.0)) {
        return Err(Error::InvalidArgument("capacities must be positive".into()));
    }
    SiteConfig::unweighted(sites.to_vec())?.check_distinct(body.diameter())?;
    let total = density.mass(body);
    let cap_sum: f64 = capacities.iter().sum();
    if (cap_sum - total).abs() > 1e-12 * total {
        return Err(Error::InvalidArgument(format!(
            "capacities sum to {cap_sum}, body mass is {total}"
        )));
    }
    let mut w: Vec<f64> = match init {
        Some(w0) if w0.len() == m => w0.to_vec(),
        _ => vec![0.0; m],
    };
    center(&mut w);

    let mut ev = evaluate(body, sites, &w, capacities, density);
    if !ev.all_nonempty() && init.is_some() {
        let zero = vec![0.0; m];
        let ev0 = evaluate(body, sites, &zero, capacities, density);
        if ev0.all_nonempty() {
            w = zero;
            ev = ev0;
        }
    }

    let mut trace = vec![ev.dual];
    // Gradient-step scale, adapted while cells are empty.
    let mut sigma = 0.0;
    let mut floor = 0.0;
    let mut iterations = 0;
    let mut converged = false;

    loop {
        let err = mass_error(&ev.masses, capacities);
        if err <= opts.tol * total {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        let grad = DVector::from_iterator(m, target_gap(&ev.masses, capacities));
        let lap = laplacian(sites, &ev.cells, density);
        let nonempty = ev.all_nonempty();
        let newton = if nonempty { newton_direction(&lap, &grad) } else { None };
        let is_newton = newton.is_some();
        let dir = match newton {
            Some(d) => {
                if floor == 0.0 {
                    let min_mass = ev.masses.iter().copied().fold(f64::INFINITY, f64::min);
                    let min_cap = capacities.iter().copied().fold(f64::INFINITY, f64::min);
                    floor = 0.5 * min_mass.min(min_cap);
                }
                d
            }
            None => {
                if sigma == 0.0 {
                    let dmax = (0..m).map(|k| lap[(k, k)]).fold(0.0, f64::max);
                    sigma = if dmax > 0.0 { 1.0 / dmax } else { body.diameter().powi(2) / total };
                }
                &grad * sigma
            }
        };
        let slope = grad.dot(&dir);

        let mut tau = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_backtrack {
            let trial: Vec<f64> = w.iter().zip(dir.iter()).map(|(a, d)| a + tau * d).collect();
            let tev = evaluate(body, sites, &trial, capacities, density);
            let armijo = tev.dual >= ev.dual + 1e-4 * tau * slope;
            // Near the optimum the Armijo gain drops below rounding of g;
            // accept a step that keeps g level and shrinks the mass error,
            // and measure its gain by the trapezoid rule on the gradient.
            let tslope: f64 = target_gap(&tev.masses, capacities).zip(dir.iter()).map(|(g, d)| g * d).sum();
            let trapezoid = 0.5 * tau * (slope + tslope);
            let level = tev.dual >= ev.dual - ev.dual_noise.max(tev.dual_noise)
                && trapezoid >= 0.0
                && mass_error(&tev.masses, capacities) < err;
            let keeps_cells = !nonempty || tev.masses.iter().all(|&mm| mm >= floor);
            if (armijo || level) && keeps_cells {
                let gain = if armijo { tev.dual - ev.dual } else { trapezoid };
                accepted = Some((trial, tev, gain));
                break;
            }
            tau *= 0.5;
        }
        match accepted {
            Some((trial, tev, gain)) => {
                if !is_newton {
                    sigma *= if tau == 1.0 { 2.0 } else { tau.max(0.125) };
                }
                w = trial;
                center(&mut w);
                ev = tev;
                let last = *trace.last().expect("trace starts with g(w0)");
                trace.push(last + gain);
            }
            None => break,
        }
    }

    let max_mass_error = mass_error(&ev.masses, capacities) / total;
    let sol = WeightSolution {
        config: SiteConfig { sites: sites.to_vec(), weights: w },
        masses: ev.masses,
        capacities: capacities.to_vec(),
        iterations,
        max_mass_error,
        dual_trace: trace,
        converged,
    };
    if converged {
        Ok(sol)
    } else {
        Err(Error::WeightsNotConverged(Box::new(sol)))
    }
}

/// Capacities rescaled to the achieved total, minus the masses. The rescale
/// absorbs quadrature inconsistency between the body and the sum of its
/// cells; it is exactly one for the uniform and linear densities.
fn target_gap<'a>(masses: &'a [f64], caps: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
    let s = masses.iter().sum::<f64>() / caps.iter().sum::<f64>();
    caps.iter().zip(masses).map(move |(c, m)| c * s - m)
}

fn mass_error(masses: &[f64], caps: &[f64]) -> f64 {
    target_gap(masses, caps).fold(0.0, |a, g| a.max(g.abs()))
}

fn center(w: &mut [f64]) {
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    w.iter_mut().for_each(|x| *x -= mean);
}

/// Dual objective `g(w)` at a configuration (for diagnostics and tests).
pub fn dual_value(body: &ConvexPolygon, cfg: &SiteConfig, capacities: &[f64], density: &Density) -> f64 {
    evaluate(body, &cfg.sites, &cfg.weights, capacities, density).dual
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom2d::regular_polygon;
    use crate::powerdiag::cell_set;
    use rand::{Rng, SeedableRng};

    fn sq() -> ConvexPolygon {
        ConvexPolygon::unit_square()
    }

    #[test]
    fn symmetric_pair_needs_no_weights() {
        let sites = [Vec2::new(0.3, 0.5), Vec2::new(0.7, 0.5)];
        let sol = solve_weights(&sq(), &sites, &[0.5, 0.5], &Density::Uniform, 1e-10).unwrap();
        assert!(sol.config.weights.iter().all(|w| w.abs() < 1e-15));
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn orbit_in_disk_needs_no_weights() {
        let disk = regular_polygon(240, Vec2::ZERO, 1.0, 0.0).unwrap();
        let m = 5;
        let sites: Vec<Vec2> = (0..m).map(|k| Vec2::polar(std::f64::consts::TAU * k as f64 / m as f64) * 0.3).collect();
        let caps = equal_capacities(&disk, &Density::Uniform, m);
        let sol = solve_weights(&disk, &sites, &caps, &Density::Uniform, 1e-10).unwrap();
        assert!(sol.config.weights.iter().all(|w| w.abs() < 1e-12), "{:?}", sol.config.weights);
    }

    #[test]
    fn three_random_sites_reach_thirds() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let sites: Vec<Vec2> = (0..3).map(|_| Vec2::new(rng.random(), rng.random())).collect();
        let caps = [1.0 / 3.0; 3];
        let sol = solve_weights(&sq(), &sites, &caps, &Density::Uniform, 1e-10).unwrap();
        let check = cell_set(&sq(), &sol.config, &Density::Uniform);
        for m in check.masses {
            assert!((m - 1.0 / 3.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn dual_is_monotone_and_converges_quickly() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let sites: Vec<Vec2> = (0..10).map(|_| Vec2::new(rng.random(), rng.random())).collect();
            let sol = solve_weights(&sq(), &sites, &[0.1; 10], &Density::Uniform, 1e-10).unwrap();
            assert!(sol.iterations <= 200);
            for w in sol.dual_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-13, "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn unequal_capacities_with_linear_density() {
        let d = Density::Linear { a: 1.0, b: 0.0, c: 0.1 };
        let body = sq();
        let total = d.mass(&body);
        let caps = [0.2 * total, 0.3 * total, 0.5 * total];
        let sites = [Vec2::new(0.2, 0.2), Vec2::new(0.8, 0.3), Vec2::new(0.4, 0.8)];
        let sol = solve_weights(&body, &sites, &caps, &d, 1e-10).unwrap();
        for (m, c) in sol.masses.iter().zip(caps) {
            assert!((m - c).abs() <= 1e-10 * total);
        }
    }

    #[test]
    fn sites_outside_body_recover_their_cells() {
        let sites = [Vec2::new(-0.5, 0.5), Vec2::new(0.5, 0.5), Vec2::new(1.5, 0.5), Vec2::new(0.5, 1.8)];
        let sol = solve_weights(&sq(), &sites, &[0.25; 4], &Density::Uniform, 1e-10).unwrap();
        assert!(sol.max_mass_error <= 1e-10);
    }

    #[test]
    fn warm_start_and_cold_start_agree() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let sites: Vec<Vec2> = (0..6).map(|_| Vec2::new(rng.random(), rng.random())).collect();
        let caps = [1.0 / 6.0; 6];
        let cold = solve_weights(&sq(), &sites, &caps, &Density::Uniform, 1e-10).unwrap();
        let init: Vec<f64> = (0..6).map(|_| 0.05 * (rng.random::<f64>() - 0.5)).collect();
        let opts = WeightOptions::default();
        let warm = solve_weights_from(&sq(), &sites, Some(&init), &caps, &Density::Uniform, &opts).unwrap();
        for (a, b) in cold.config.weights.iter().zip(&warm.config.weights) {
            assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn scaling_density_leaves_weights() {
        let sites = [Vec2::new(0.1, 0.2), Vec2::new(0.7, 0.4), Vec2::new(0.5, 0.9)];
        let d1 = Density::Linear { a: 1.0, b: 2.0, c: 0.5 };
        let d2 = Density::Linear { a: 3.0, b: 6.0, c: 1.5 };
        let s1 = solve_weights(&sq(), &sites, &equal_capacities(&sq(), &d1, 3), &d1, 1e-12).unwrap();
        let s2 = solve_weights(&sq(), &sites, &equal_capacities(&sq(), &d2, 3), &d2, 1e-12).unwrap();
        for (a, b) in s1.config.weights.iter().zip(&s2.config.weights) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn rejects_bad_capacities() {
        let sites = [Vec2::new(0.3, 0.5), Vec2::new(0.7, 0.5)];
        assert!(solve_weights(&sq(), &sites, &[0.5, 0.6], &Density::Uniform, 1e-10).is_err());
        assert!(solve_weights(&sq(), &sites, &[1.0, 0.0], &Density::Uniform, 1e-10).is_err());
        let same = [Vec2::new(0.3, 0.5), Vec2::new(0.3, 0.5)];
        assert!(solve_weights(&sq(), &same, &[0.5, 0.5], &Density::Uniform, 1e-10).is_err());
    }
}
