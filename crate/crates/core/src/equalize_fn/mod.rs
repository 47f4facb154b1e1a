//! Move sites until the equal-mass cells also agree on a functional.
//!
//! The outer problem is bilevel: for every trial site vector the weights are
//! re-solved so that all cells carry equal mass, and the residual is the
//! discrepancy vector `f(V_i) - mean_j f(V_j)`. There are `2m` site
//! coordinates and `m - 1` independent residuals, so solutions form a
//! manifold and the least-squares step is taken in min-norm form.

mod init;
pub(crate) mod outer;

pub use init::{epicycle_init, initial_sites, Init};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::equalize_area::{equal_capacities, solve_weights_from, WeightOptions};
use crate::error::{Error, Result};
use crate::functional::Functional;
use crate::geom2d::{minkowski_blend, regular_polygon, ConvexPolygon, Density, Vec2, EPS_GEOM};
use crate::powerdiag::{power_cell, SiteConfig};
use outer::{levenberg_marquardt, pattern_search, sample, Counter, Problem, Sample};

/// Functional values minus their mean; a point of the zero-sum hyperplane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyVector(Vec<f64>);

impl DiscrepancyVector {
    pub fn from_values(values: &[f64]) -> Self {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Self(values.iter().map(|v| v - mean).collect())
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Cells below this area count as degenerate.
pub fn area_floor(body: &ConvexPolygon, m: usize) -> f64 {
    1e-6 * body.area() / m as f64
}

/// Discrepancy of the power diagram `cfg` restricted to `body`. The weights
/// are taken as given; callers equalize masses first.
pub fn discrepancy(body: &ConvexPolygon, cfg: &SiteConfig, f: &Functional) -> Result<DiscrepancyVector> {
    let floor = area_floor(body, cfg.len());
    let mut values = Vec::with_capacity(cfg.len());
    for i in 0..cfg.len() {
        match power_cell(body, cfg, i) {
            Some(c) if c.area() >= floor => values.push(f.eval(&c)),
            _ => return Err(Error::DegenerateCell { index: i }),
        }
    }
    Ok(DiscrepancyVector::from_values(&values))
}

/// Per-cell values the outer solver equalizes.
pub trait CellValues {
    fn values(&mut self, cells: &[ConvexPolygon]) -> Result<Vec<f64>>;
}

/// Plain evaluation of a functional on every cell.
pub struct FunctionalValues(pub Functional);

impl CellValues for FunctionalValues {
    fn values(&mut self, cells: &[ConvexPolygon]) -> Result<Vec<f64>> {
        Ok(cells.iter().map(|c| self.0.eval(c)).collect())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PatternSearch,
    LevenbergMarquardt,
    /// LM; if it stalls, pattern search down to a moderate discrepancy and
    /// LM again.
    #[default]
    Hybrid,
}

#[derive(Clone, Debug)]
pub struct PartitionOptions {
    /// Target `max |discrepancy|` relative to the mean functional value.
    pub tol_f: f64,
    /// Inner weight-solver tolerance relative to the body mass.
    pub tol_area: f64,
    pub method: Method,
    pub max_starts: usize,
    pub threads: usize,
    pub seed: u64,
    /// Start kinds in order; empty means the default sequence.
    pub inits: Vec<Init>,
    pub max_iter: usize,
    pub max_evals: usize,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        Self {
            tol_f: 1e-8,
            tol_area: 1e-12,
            method: Method::Hybrid,
            max_starts: 16,
            threads: 1,
            seed: 0,
            inits: Vec::new(),
            max_iter: 100,
            max_evals: 20_000,
        }
    }
}

impl PartitionOptions {
    /// Start kinds padded with random starts up to the budget. The default
    /// order interleaves the fixed kinds with slab starts at `slab_angles`,
    /// which callers rank best first.
    pub fn start_sequence(&self, m: usize, slab_angles: &[f64]) -> Vec<Init> {
        let mut seq = if self.inits.is_empty() {
            let mut fixed = vec![Init::Lattice, Init::Ring];
            if m.is_power_of_two() {
                fixed.push(Init::Epicycle);
            }
            fixed.push(Init::Morph);
            let mut s = vec![Init::Strips];
            let mut slabs = slab_angles.iter().map(|&a| Init::Slabs(a));
            for f in fixed {
                s.extend(slabs.next());
                s.push(f);
            }
            s.extend(slabs);
            s
        } else {
            self.inits.clone()
        };
        let budget = self.max_starts.max(1);
        seq.truncate(budget);
        while seq.len() < budget {
            seq.push(Init::Random);
        }
        seq
    }
}

/// Number of slab directions scanned over a half turn.
const SLAB_SCAN: usize = 16;

/// Slab normal angles in `[0, π)` ordered by the discrepancy of the
/// equal-mass slab partition, smallest first. Angles giving degenerate
/// cells are dropped.
fn ranked_slab_angles<V: CellValues>(
    body: &ConvexPolygon,
    m: usize,
    values: &mut V,
    density: &Density,
    opts: &PartitionOptions,
) -> Vec<f64> {
    let mut prob = SiteProblem::new(body, m, density, values, opts);
    let mut count = Counter::new(usize::MAX);
    let mut scored: Vec<(f64, f64)> = (0..SLAB_SCAN)
        .filter_map(|k| {
            let a = std::f64::consts::PI * k as f64 / SLAB_SCAN as f64;
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let sites = initial_sites(body, m, Init::Slabs(a), &mut rng);
            prob.warm.iter_mut().for_each(|w| *w = 0.0);
            let s = sample(&mut prob, flatten(&sites), &mut count)?;
            Some((SiteProblem::<V>::relative_discrepancy(&s.extra.values), a))
        })
        .collect();
    scored.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    scored.into_iter().map(|(_, a)| a).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartitionSolution {
    pub config: SiteConfig,
    pub cells: Vec<ConvexPolygon>,
    pub masses: Vec<f64>,
    pub values: Vec<f64>,
    /// Mean of `values`: the common value once converged.
    pub value: f64,
    /// `max_i |values_i - value| / |value|`.
    pub max_discrepancy: f64,
    /// `max_i |mass_i - μ(K)/m| / μ(K)`.
    pub max_mass_error: f64,
    pub converged: bool,
    /// Index of the start that produced this solution.
    pub start: usize,
    pub evaluations: usize,
}

#[derive(Clone, Debug)]
struct SiteEval {
    weights: Vec<f64>,
    cells: Vec<ConvexPolygon>,
    masses: Vec<f64>,
    values: Vec<f64>,
}

struct SiteProblem<'a, V> {
    body: &'a ConvexPolygon,
    density: &'a Density,
    values: &'a mut V,
    caps: Vec<f64>,
    warm: Vec<f64>,
    lo: Vec2,
    hi: Vec2,
    floor: f64,
    weight_opts: WeightOptions,
    tol_f: f64,
}

impl<'a, V: CellValues> SiteProblem<'a, V> {
    fn new(body: &'a ConvexPolygon, m: usize, density: &'a Density, values: &'a mut V, opts: &PartitionOptions) -> Self {
        let (blo, bhi) = body.bounding_box();
        let c = (blo + bhi) * 0.5;
        let d = body.diameter();
        Self {
            body,
            density,
            values,
            caps: equal_capacities(body, density, m),
            warm: vec![0.0; m],
            lo: c - Vec2::new(d, d),
            hi: c + Vec2::new(d, d),
            floor: area_floor(body, m),
            weight_opts: WeightOptions { tol: opts.tol_area, ..WeightOptions::default() },
            tol_f: opts.tol_f,
        }
    }

    fn relative_discrepancy(values: &[f64]) -> f64 {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let dev = values.iter().fold(0.0f64, |a, v| a.max((v - mean).abs()));
        if mean == 0.0 {
            dev
        } else {
            dev / mean.abs()
        }
    }
}

fn to_sites(x: &[f64]) -> Vec<Vec2> {
    x.chunks_exact(2).map(|c| Vec2::new(c[0], c[1])).collect()
}

fn flatten(sites: &[Vec2]) -> Vec<f64> {
    sites.iter().flat_map(|s| [s.x, s.y]).collect()
}

impl<V: CellValues> Problem for SiteProblem<'_, V> {
    type Extra = SiteEval;

    fn project(&self, x: &mut [f64]) {
        for c in x.chunks_exact_mut(2) {
            c[0] = c[0].clamp(self.lo.x, self.hi.x);
            c[1] = c[1].clamp(self.lo.y, self.hi.y);
        }
    }

    fn evaluate(&mut self, x: &[f64]) -> Option<(Vec<f64>, SiteEval)> {
        let sites = to_sites(x);
        let sol = solve_weights_from(self.body, &sites, Some(&self.warm), &self.caps, self.density, &self.weight_opts)
            .ok()?;
        let mut cells = Vec::with_capacity(sites.len());
        for i in 0..sites.len() {
            let c = power_cell(self.body, &sol.config, i)?;
            if c.area() < self.floor {
                return None;
            }
            cells.push(c);
        }
        let values = self.values.values(&cells).ok()?;
        if values.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let r = DiscrepancyVector::from_values(&values).0;
        Some((r, SiteEval { weights: sol.config.weights, cells, masses: sol.masses, values }))
    }

    fn accept(&mut self, s: &Sample<SiteEval>) {
        self.warm.clone_from(&s.extra.weights);
    }

    fn converged(&self, s: &Sample<SiteEval>) -> bool {
        Self::relative_discrepancy(&s.extra.values) <= self.tol_f
    }

    fn fd_step(&self) -> f64 {
        1e-6 * self.body.diameter()
    }
}

fn run<V: CellValues>(
    body: &ConvexPolygon,
    sites: &[Vec2],
    values: &mut V,
    density: &Density,
    opts: &PartitionOptions,
    start: usize,
) -> Result<PartitionSolution> {
    let m = sites.len();
    let total = density.mass(body);
    let mut prob = SiteProblem::new(body, m, density, values, opts);
    let mut count = Counter::new(opts.max_evals);
    let s0 = sample(&mut prob, flatten(sites), &mut count)
        .ok_or_else(|| Error::DegenerateConfig("starting sites give a degenerate partition".into()))?;
    let diam = body.diameter();
    let tol_f = opts.tol_f;
    let ps_stop = |s: &Sample<SiteEval>| SiteProblem::<V>::relative_discrepancy(&s.extra.values) <= tol_f;
    let best = match opts.method {
        Method::LevenbergMarquardt => lm_polished(&mut prob, s0, opts.max_iter, diam, &mut count),
        Method::PatternSearch => pattern_search(&mut prob, s0, 0.05 * diam, 1e-12 * diam, &mut count, ps_stop),
        Method::Hybrid => {
            let a = lm_polished(&mut prob, s0.clone(), opts.max_iter, diam, &mut count);
            if prob.converged(&a) {
                a
            } else {
                let mut ps_count = count.budget(80 * m);
                let s = pattern_search(&mut prob, s0, 0.05 * diam, 1e-4 * diam, &mut ps_count, |s| {
                    SiteProblem::<V>::relative_discrepancy(&s.extra.values) <= 1e-3
                });
                count.evals = ps_count.evals;
                let b = lm_polished(&mut prob, s, opts.max_iter, diam, &mut count);
                if b.obj < a.obj {
                    b
                } else {
                    a
                }
            }
        }
    };
    let max_discrepancy = SiteProblem::<V>::relative_discrepancy(&best.extra.values);
    let cap = total / m as f64;
    let max_mass_error = best.extra.masses.iter().fold(0.0f64, |a, &mm| a.max((mm - cap).abs())) / total;
    let value = best.extra.values.iter().sum::<f64>() / m as f64;
    let converged = max_discrepancy <= opts.tol_f;
    let sol = PartitionSolution {
        config: SiteConfig { sites: to_sites(&best.x), weights: best.extra.weights },
        cells: best.extra.cells,
        masses: best.extra.masses,
        values: best.extra.values,
        value,
        max_discrepancy,
        max_mass_error,
        converged,
        start,
        evaluations: count.evals,
    };
    if sol.converged {
        Ok(sol)
    } else {
        Err(Error::PartitionNotConverged(Box::new(sol)))
    }
}

/// LM, then alternating pattern-search and LM rounds while the residual is
/// already small. Near a kink of the cell map the finite-difference
/// Jacobian is unreliable and LM stalls; a few compass steps move off it.
pub(crate) fn lm_polished<P: Problem>(p: &mut P, s0: Sample<P::Extra>, max_iter: usize, diam: f64, count: &mut Counter) -> Sample<P::Extra> {
    let mut cur = levenberg_marquardt(p, s0, max_iter, count);
    for _ in 0..4 {
        if p.converged(&cur) || count.exhausted() {
            break;
        }
        let scale = cur.obj.sqrt();
        if !(scale < 1e-3 * cur.r.len() as f64) {
            break;
        }
        let before = cur.obj;
        let n = cur.x.len();
        let mut ps_count = count.budget(60 * n);
        let tiny = cur.obj * 1e-4;
        cur = pattern_search(p, cur, 1e-4 * diam, 1e-13 * diam, &mut ps_count, move |s| s.obj <= tiny);
        count.evals = ps_count.evals;
        cur = levenberg_marquardt(p, cur, max_iter, count);
        if !(cur.obj < 0.5 * before) {
            break;
        }
    }
    cur
}

/// Single-start solve from the given sites.
pub fn solve_from<V: CellValues>(
    body: &ConvexPolygon,
    sites: &[Vec2],
    values: &mut V,
    density: &Density,
    opts: &PartitionOptions,
) -> Result<PartitionSolution> {
    if sites.is_empty() {
        return Err(Error::InvalidArgument("no sites".into()));
    }
    SiteConfig::unweighted(sites.to_vec())?.check_distinct(body.diameter())?;
    if sites.len() == 1 {
        return trivial(body, values, density);
    }
    run(body, sites, values, density, opts, 0)
}

fn trivial<V: CellValues>(body: &ConvexPolygon, values: &mut V, density: &Density) -> Result<PartitionSolution> {
    let v = values.values(std::slice::from_ref(body))?;
    Ok(PartitionSolution {
        config: SiteConfig { sites: vec![body.centroid()], weights: vec![0.0] },
        cells: vec![body.clone()],
        masses: vec![density.mass(body)],
        value: v[0],
        values: v,
        max_discrepancy: 0.0,
        max_mass_error: 0.0,
        converged: true,
        start: 0,
        evaluations: 1,
    })
}

/// Equal-mass, equal-`f` partition of `body` into `m` cells.
pub fn solve_partition(
    body: &ConvexPolygon,
    m: usize,
    f: &Functional,
    density: &Density,
    opts: &PartitionOptions,
) -> Result<PartitionSolution> {
    solve_partition_with(body, m, || FunctionalValues(f.clone()), density, opts).map(|(s, _)| s)
}

/// Multi-start solve with caller-supplied cell values. Starts run in chunks
/// of `opts.threads`; the lowest-index converged start wins, so the result
/// does not depend on the thread count. Returns the value evaluator of the
/// winning start.
pub fn solve_partition_with<V, F>(
    body: &ConvexPolygon,
    m: usize,
    make: F,
    density: &Density,
    opts: &PartitionOptions,
) -> Result<(PartitionSolution, V)>
where
    V: CellValues + Send,
    F: Fn() -> V + Sync,
{
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    if !(density.mass(body) > 0.0) {
        return Err(Error::InvalidArgument("body has zero mass under the density".into()));
    }
    if m == 1 {
        let mut v = make();
        return trivial(body, &mut v, density).map(|s| (s, v));
    }
    let seq = if opts.inits.is_empty() {
        let angles = ranked_slab_angles(body, m, &mut make(), density, opts);
        opts.start_sequence(m, &angles)
    } else {
        opts.start_sequence(m, &[])
    };
    let attempt = |k: usize| -> (Result<PartitionSolution>, V) {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(k as u64);
        let mut v = make();
        let sites = match seq[k] {
            Init::Morph => morph_start(body, m, &mut v, density, opts),
            kind => Some(initial_sites(body, m, kind, &mut rng)),
        };
        let r = match sites {
            Some(sites) => run(body, &sites, &mut v, density, opts, k),
            None => Err(Error::DegenerateConfig("continuation start failed".into())),
        };
        (r, v)
    };
    let threads = opts.threads.max(1);
    let mut best: Option<PartitionSolution> = None;
    let mut evaluations = 0;
    for chunk in (0..seq.len()).collect::<Vec<_>>().chunks(threads) {
        let results: Vec<(Result<PartitionSolution>, V)> = if threads == 1 {
            chunk.iter().map(|&k| attempt(k)).collect()
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = chunk.iter().map(|&k| s.spawn(move || attempt(k))).collect();
                handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
            })
        };
        for (r, v) in results {
            match r {
                Ok(mut sol) => {
                    evaluations += sol.evaluations;
                    sol.evaluations = evaluations;
                    return Ok((sol, v));
                }
                Err(Error::PartitionNotConverged(sol)) => {
                    evaluations += sol.evaluations;
                    if best.as_ref().is_none_or(|b| sol.max_discrepancy < b.max_discrepancy) {
                        best = Some(*sol);
                    }
                }
                Err(_) => {}
            }
        }
    }
    match best {
        Some(mut b) => {
            b.evaluations = evaluations;
            Err(Error::PartitionNotConverged(Box::new(b)))
        }
        None => Err(Error::DegenerateConfig("every start gave a degenerate partition".into())),
    }
}

/// Continuation from a regular polygon with a multiple of `m` vertices,
/// where ring sites give congruent sectors, through Minkowski combinations
/// `(1 - s) D + s K`. Returns sites that solve the problem at `s = 1`
/// to a loose tolerance, or `None` if the step size collapses.
fn morph_start<V: CellValues>(
    body: &ConvexPolygon,
    m: usize,
    values: &mut V,
    density: &Density,
    opts: &PartitionOptions,
) -> Option<Vec<Vec2>> {
    let n = m * 64usize.div_ceil(m);
    let r = (2.0 * body.area() / (n as f64 * (std::f64::consts::TAU / n as f64).sin())).sqrt();
    let disk = regular_polygon(n, body.centroid(), r, 0.0).ok()?;
    let mut sites = init::ring(&disk, m, 0.0);
    let step_opts = PartitionOptions { tol_f: opts.tol_f.max(1e-9), method: Method::LevenbergMarquardt, ..opts.clone() };
    let (mut s, mut ds) = (0.0f64, 0.125f64);
    while s < 1.0 {
        let t = (s + ds).min(1.0);
        let k = minkowski_blend(&disk, body, t).ok()?;
        if density.mass(&k) > 0.0 {
            let res = run(&k, &sites, values, density, &step_opts, 0);
            if let Ok(sol) = res {
                sites = sol.config.sites;
                s = t;
                ds = (ds * 1.5).min(0.25);
                continue;
            }
        }
        ds *= 0.5;
        if ds < 1e-3 {
            return None;
        }
    }
    Some(sites)
}

/// True when sites are pairwise farther apart than the geometric tolerance.
pub fn sites_distinct(sites: &[Vec2], scale: f64) -> bool {
    (0..sites.len()).all(|i| (i + 1..sites.len()).all(|j| sites[i].dist(sites[j]) > EPS_GEOM * scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq() -> ConvexPolygon {
        ConvexPolygon::unit_square()
    }

    #[test]
    fn quarter_centres_have_zero_discrepancy() {
        let cfg = SiteConfig::unweighted(vec![
            Vec2::new(0.25, 0.25),
            Vec2::new(0.75, 0.25),
            Vec2::new(0.25, 0.75),
            Vec2::new(0.75, 0.75),
        ])
        .unwrap();
        let d = discrepancy(&sq(), &cfg, &Functional::perimeter()).unwrap();
        assert!(d.max_abs() < 1e-15);
    }

    #[test]
    fn mirrored_pair_in_isosceles_triangle() {
        let tri = ConvexPolygon::new(vec![Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.5)]).unwrap();
        let cfg = SiteConfig::unweighted(vec![Vec2::new(-0.3, 0.4), Vec2::new(0.3, 0.4)]).unwrap();
        let d = discrepancy(&tri, &cfg, &Functional::perimeter()).unwrap();
        assert!(d.max_abs() < 1e-14);
    }

    #[test]
    fn empty_cell_is_degenerate() {
        let cfg = SiteConfig::new(vec![Vec2::new(0.5, 0.5), Vec2::new(3.0, 0.5)], vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            discrepancy(&sq(), &cfg, &Functional::perimeter()),
            Err(Error::DegenerateCell { index: 1 })
        ));
    }

    #[test]
    fn discrepancy_sums_to_zero() {
        let v = [3.1, 2.7, 9.4, 0.2];
        let d = DiscrepancyVector::from_values(&v);
        assert!(d.components().iter().sum::<f64>().abs() < 1e-14);
    }

    #[test]
    fn square_three_strips() {
        let opts = PartitionOptions { inits: vec![Init::Strips], max_starts: 1, ..Default::default() };
        let sol = solve_partition(&sq(), 3, &Functional::perimeter(), &Density::Uniform, &opts).unwrap();
        assert!((sol.value - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn trivial_single_cell() {
        let sol = solve_partition(&sq(), 1, &Functional::perimeter(), &Density::Uniform, &Default::default()).unwrap();
        assert_eq!(sol.cells.len(), 1);
        assert_eq!(sol.value, 4.0);
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let tri = ConvexPolygon::new(vec![Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(0.0, 1.0)]).unwrap();
        let f = Functional::perimeter();
        let one = PartitionOptions { seed: 5, ..Default::default() };
        let four = PartitionOptions { threads: 4, ..one.clone() };
        let a = solve_partition(&tri, 3, &f, &Density::Uniform, &one).unwrap();
        let b = solve_partition(&tri, 3, &f, &Density::Uniform, &four).unwrap();
        assert_eq!(a.config, b.config);
        assert_eq!(a.start, b.start);
    }
}
