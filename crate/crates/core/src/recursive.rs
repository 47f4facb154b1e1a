//! General `m` by recursion along the prime factorization.
//!
//! Prime powers are solved directly. Otherwise a prime `p` is split off (see
//! [`Order`]): for `p = 2` a halving line whose two halves carry
//! sub-partitions of equal value (see [`crate::sweep`]), for odd `p` a power
//! diagram of `p` cells whose *branch values* (the common value of a solved
//! sub-partition) are equalized by the site solver.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::equalize_fn::{
    solve_from, solve_partition, solve_partition_with, CellValues, FunctionalValues, Method, PartitionOptions,
};
use crate::error::{Error, Result};
use crate::functional::Functional;
use crate::geom2d::{ConvexPolygon, Density, Vec2};
use crate::powerdiag::{power_cell, SiteConfig};
use crate::sweep::{self, halving_line, SweepOptions};

/// How a body is cut, without the cells themselves. Coordinates are
/// absolute, so a plan can be moved rigidly to warm-start a nearby body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Plan {
    /// The body itself.
    Whole,
    /// Equal-mass power diagram, solved directly.
    Direct { config: SiteConfig },
    /// Halving line of direction angle `t`; `left` cuts L, `right` cuts M.
    Halving { t: f64, left: Box<Plan>, right: Box<Plan> },
    /// Power cells, each cut by its child plan.
    Power { config: SiteConfig, children: Vec<Plan> },
}

/// `x -> to + rotation(angle) (x - from)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Motion {
    pub angle: f64,
    pub from: Vec2,
    pub to: Vec2,
}

impl Motion {
    pub fn apply(&self, p: Vec2) -> Vec2 {
        self.to + (p - self.from).rotate(self.angle)
    }
}

impl Plan {
    pub fn moved(&self, mo: &Motion) -> Plan {
        let cfg = |c: &SiteConfig| SiteConfig { sites: c.sites.iter().map(|&s| mo.apply(s)).collect(), weights: c.weights.clone() };
        match self {
            Plan::Whole => Plan::Whole,
            Plan::Direct { config } => Plan::Direct { config: cfg(config) },
            Plan::Halving { t, left, right } => Plan::Halving {
                t: (t + mo.angle).rem_euclid(TAU),
                left: Box::new(left.moved(mo)),
                right: Box::new(right.moved(mo)),
            },
            Plan::Power { config, children } => {
                Plan::Power { config: cfg(config), children: children.iter().map(|c| c.moved(mo)).collect() }
            }
        }
    }
}

/// The top-level step used for `m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Whole,
    PrimePower,
    /// Halving line, then `m / 2` on each half.
    Halve(usize),
    /// `p` power cells (smallest odd prime factor), then `m / p` in each.
    Power(usize, usize),
}

pub fn is_prime_power(m: usize) -> bool {
    m >= 2 && {
        let p = smallest_prime_factor(m);
        let mut r = m;
        while r % p == 0 {
            r /= p;
        }
        r == 1
    }
}

fn smallest_prime_factor(m: usize) -> usize {
    (2..).take_while(|d| d * d <= m).find(|d| m % d == 0).unwrap_or(m)
}

/// Which prime is split off at each level.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Order {
    /// Halving levels first, then odd primes ascending.
    TwosFirst,
    /// The smallest prime leaving a prime power below, so every sweep and
    /// every branch value is a direct solve; `TwosFirst` when there is none.
    #[default]
    PrimePowerBelow,
}

pub fn step_of(m: usize, order: Order) -> Step {
    if m <= 1 {
        return Step::Whole;
    }
    if is_prime_power(m) {
        return Step::PrimePower;
    }
    let split = |p: usize| if p == 2 { Step::Halve(m / 2) } else { Step::Power(p, m / p) };
    if order == Order::PrimePowerBelow {
        if let Some(p) = prime_factors(m).into_iter().find(|&p| is_prime_power(m / p)) {
            return split(p);
        }
    }
    split(smallest_prime_factor(m))
}

fn prime_factors(mut m: usize) -> Vec<usize> {
    let mut out = Vec::new();
    while m > 1 {
        let p = smallest_prime_factor(m);
        out.push(p);
        while m % p == 0 {
            m /= p;
        }
    }
    out
}

/// Orders of the successive levels, outermost first; a final prime power
/// is solved in one piece. `12 -> [3, 4]`, or `[2, 2, 3]` twos first.
pub fn levels(m: usize, order: Order) -> Vec<usize> {
    let mut out = Vec::new();
    let mut r = m;
    loop {
        match step_of(r, order) {
            Step::Whole => break,
            Step::PrimePower => {
                out.push(r);
                break;
            }
            Step::Halve(sub) => {
                out.push(2);
                r = sub;
            }
            Step::Power(p, sub) => {
                out.push(p);
                r = sub;
            }
        }
    }
    out
}

impl Plan {
    /// Orders of the levels this plan cuts, outermost first.
    pub fn levels(&self) -> Vec<usize> {
        match self {
            Plan::Whole => Vec::new(),
            Plan::Direct { config } => vec![config.len()],
            Plan::Halving { left, .. } => std::iter::once(2).chain(left.levels()).collect(),
            Plan::Power { config, children } => {
                std::iter::once(config.len()).chain(children.first().map(Plan::levels).unwrap_or_default()).collect()
            }
        }
    }

    /// Number of leaves.
    pub fn parts(&self) -> usize {
        self.levels().iter().product()
    }

    /// Site and child counts agree, and siblings have the same number of
    /// leaves.
    pub fn is_consistent(&self) -> bool {
        match self {
            Plan::Whole => true,
            Plan::Direct { config } => !config.is_empty(),
            Plan::Halving { left, right, .. } => left.is_consistent() && right.is_consistent() && left.parts() == right.parts(),
            Plan::Power { config, children } => {
                !children.is_empty()
                    && config.len() == children.len()
                    && children.iter().all(Plan::is_consistent)
                    && children.iter().all(|c| c.parts() == children[0].parts())
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct GeneralOptions {
    pub partition: PartitionOptions,
    pub sweep: SweepOptions,
    /// Leaf mass tolerance of the finished tree, relative to the mean.
    pub tol_area: f64,
    /// Leaf functional tolerance of the finished tree, relative to the mean.
    pub tol_f: f64,
    pub order: Order,
}

impl Default for GeneralOptions {
    fn default() -> Self {
        Self {
            partition: PartitionOptions::default(),
            sweep: SweepOptions { grid: 16, passes: 0, ..SweepOptions::default() },
            tol_area: 1e-6,
            tol_f: 1e-5,
            order: Order::default(),
        }
    }
}

/// Nested solves never ask for more than this relative accuracy.
const MIN_TOL: f64 = 1e-11;

pub(crate) fn child_tol(tol: f64) -> f64 {
    (0.1 * tol).max(MIN_TOL)
}

#[derive(Clone, Debug)]
pub(crate) struct Solved {
    pub y: f64,
    pub plan: Plan,
}

#[derive(Clone, Copy)]
pub(crate) struct Solver<'a> {
    pub f: &'a Functional,
    pub density: &'a Density,
    pub opts: &'a GeneralOptions,
}

impl Solver<'_> {
    /// Partition `body` into `m` parts with common value `y` to relative
    /// accuracy `tol`. With `warm`, only strategies that start from it are
    /// tried and failure is reported to the caller.
    pub fn solve(&self, body: &ConvexPolygon, m: usize, warm: Option<&Plan>, tol: f64) -> Result<Solved> {
        match step_of(m, self.opts.order) {
            Step::Whole => Ok(Solved { y: self.f.eval(body), plan: Plan::Whole }),
            Step::PrimePower => self.direct(body, m, warm, tol),
            Step::Halve(sub) => sweep::solve_halving(self, body, sub, warm, tol),
            Step::Power(p, sub) => self.power(body, p, sub, warm, tol),
        }
    }

    fn partition_opts(&self, tol: f64) -> PartitionOptions {
        PartitionOptions { tol_f: tol, ..self.opts.partition.clone() }
    }

    fn direct(&self, body: &ConvexPolygon, m: usize, warm: Option<&Plan>, tol: f64) -> Result<Solved> {
        let popts = self.partition_opts(tol);
        let sol = match warm {
            Some(Plan::Direct { config }) if config.len() == m => {
                // A warm start is a local correction: plain LM on a small
                // budget, failing fast so the caller can shorten its step.
                let local = PartitionOptions {
                    method: Method::LevenbergMarquardt,
                    max_evals: popts.max_evals.min(40 * (2 * m + 1)),
                    ..popts
                };
                solve_from(body, &config.sites, &mut FunctionalValues(self.f.clone()), self.density, &local)?
            }
            Some(_) => return Err(Error::InvalidArgument(format!("warm plan does not fit m = {m}"))),
            None => solve_partition(body, m, self.f, self.density, &popts)?,
        };
        Ok(Solved { y: sol.value, plan: Plan::Direct { config: sol.config } })
    }

    fn power(&self, body: &ConvexPolygon, p: usize, sub: usize, warm: Option<&Plan>, tol: f64) -> Result<Solved> {
        let ctol = child_tol(tol);
        let popts = self.partition_opts(tol);
        let seeds: Vec<Option<Plan>> = match warm {
            Some(Plan::Power { children, .. }) if children.len() == p => children.iter().cloned().map(Some).collect(),
            Some(_) => return Err(Error::InvalidArgument(format!("warm plan does not fit {p} parts"))),
            None => vec![None; p],
        };
        let make = || BranchValues {
            fns: seeds.iter().map(|s| BranchValueFn::with_solver(*self, sub, ctol, s.clone())).collect(),
        };
        let (sol, mut v) = match warm {
            Some(Plan::Power { config, .. }) => {
                let mut v = make();
                (solve_from(body, &config.sites, &mut v, self.density, &popts)?, v)
            }
            _ => solve_partition_with(body, p, make, self.density, &popts)?,
        };
        // Re-solve the children on the final cells so the plans match them.
        let mut children = Vec::with_capacity(p);
        for (g, cell) in v.fns.iter_mut().zip(&sol.cells) {
            children.push(g.value(cell)?.1);
        }
        Ok(Solved { y: sol.value, plan: Plan::Power { config: sol.config, children } })
    }
}

/// Common value of a solved `m'`-partition, as a function of the body.
///
/// The last solution is cached and used to warm-start the next query when
/// the bodies are close; a warm result that jumps by more than `budget`
/// relative to the cached value is discarded and the query re-solved from
/// the multi-start.
pub struct BranchValueFn<'a> {
    solver: Solver<'a>,
    m: usize,
    tol: f64,
    /// Largest Hausdorff distance, relative to the diameter, for reuse.
    pub reach: f64,
    pub budget: f64,
    cache: Option<Cached>,
}

struct Cached {
    body: Option<ConvexPolygon>,
    y: Option<f64>,
    plan: Plan,
}

impl<'a> BranchValueFn<'a> {
    pub fn new(f: &'a Functional, density: &'a Density, opts: &'a GeneralOptions, m: usize) -> Self {
        Self::with_solver(Solver { f, density, opts }, m, opts.partition.tol_f, None)
    }

    fn with_solver(solver: Solver<'a>, m: usize, tol: f64, seed: Option<Plan>) -> Self {
        Self {
            solver,
            m,
            tol,
            reach: 0.1,
            budget: 0.05,
            cache: seed.map(|plan| Cached { body: None, y: None, plan }),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn value(&mut self, c: &ConvexPolygon) -> Result<(f64, Plan)> {
        if let Some(cache) = &self.cache {
            let near = cache.body.as_ref().is_none_or(|b| b.hausdorff(c) <= self.reach * c.diameter());
            if near {
                if let Ok(s) = self.solver.solve(c, self.m, Some(&cache.plan), self.tol) {
                    if cache.y.is_none_or(|y| (s.y - y).abs() <= self.budget * y.abs()) {
                        return Ok(self.store(c, s));
                    }
                }
            }
        }
        let s = self.solver.solve(c, self.m, None, self.tol)?;
        Ok(self.store(c, s))
    }

    fn store(&mut self, c: &ConvexPolygon, s: Solved) -> (f64, Plan) {
        self.cache = Some(Cached { body: Some(c.clone()), y: Some(s.y), plan: s.plan.clone() });
        (s.y, s.plan)
    }
}

/// Evaluate `g` at `c`: the common value and the plan achieving it.
pub fn branch_value(g: &mut BranchValueFn, c: &ConvexPolygon) -> Result<(f64, Plan)> {
    g.value(c)
}

/// Branch values of every cell, one cache per cell index.
struct BranchValues<'a> {
    fns: Vec<BranchValueFn<'a>>,
}

impl CellValues for BranchValues<'_> {
    fn values(&mut self, cells: &[ConvexPolygon]) -> Result<Vec<f64>> {
        self.fns.iter_mut().zip(cells).map(|(g, c)| g.value(c).map(|v| v.0)).collect()
    }
}

/// How a tree node is divided among its children.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Cut {
    /// Halving line `normal . x = offset`, direction angle `t`. Children are
    /// the left half, then the right half.
    Line { t: f64, normal: Vec2, offset: f64 },
    /// Power diagram; child `i` is cell `i`.
    Power { config: SiteConfig },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TreeNode {
    pub polygon: ConvexPolygon,
    pub mass: f64,
    /// Leaves below this node.
    pub parts: usize,
    /// Mean functional value of the leaves below; the value itself at a leaf.
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut: Option<Cut>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<TreeNode>,
}

impl TreeNode {
    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a TreeNode>) {
        if self.children.is_empty() {
            out.push(self);
        }
        for c in &self.children {
            c.collect_leaves(out);
        }
    }

    /// Every node, parents before children.
    pub fn walk(&self) -> Vec<&TreeNode> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.walk());
        }
        out
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartitionTree {
    pub m: usize,
    pub functional: String,
    /// Orders of the successive levels, outermost first.
    pub levels: Vec<usize>,
    /// Mean leaf value.
    pub value: f64,
    pub max_mass_deviation: f64,
    pub max_f_deviation: f64,
    pub root: TreeNode,
}

impl PartitionTree {
    /// Cut `body` by `plan` and record masses and values at every node.
    pub fn build(body: &ConvexPolygon, m: usize, plan: &Plan, f: &Functional, density: &Density) -> Result<Self> {
        if !plan.is_consistent() || plan.parts() != m {
            return Err(Error::InvalidArgument(format!("plan does not fit m = {m}")));
        }
        let root = build_node(body, plan, f, density)?;
        let mut leaves = Vec::new();
        root.collect_leaves(&mut leaves);
        let masses: Vec<f64> = leaves.iter().map(|n| n.mass).collect();
        let values: Vec<f64> = leaves.iter().map(|n| n.y).collect();
        Ok(Self {
            m,
            functional: f.name().to_string(),
            levels: plan.levels(),
            value: root.y,
            max_mass_deviation: spread(&masses),
            max_f_deviation: spread(&values),
            root,
        })
    }

    pub fn leaves(&self) -> Vec<&ConvexPolygon> {
        let mut out = Vec::new();
        self.root.collect_leaves(&mut out);
        out.into_iter().map(|n| &n.polygon).collect()
    }

    pub fn leaf_cells(&self) -> Vec<ConvexPolygon> {
        self.leaves().into_iter().cloned().collect()
    }
}

/// `max |v - mean| / |mean|`.
fn spread(v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let dev = v.iter().fold(0.0f64, |a, x| a.max((x - mean).abs()));
    if mean == 0.0 {
        dev
    } else {
        dev / mean.abs()
    }
}

fn build_node(poly: &ConvexPolygon, plan: &Plan, f: &Functional, density: &Density) -> Result<TreeNode> {
    let m = plan.parts();
    let (cut, children) = match plan {
        Plan::Whole => (None, Vec::new()),
        Plan::Direct { config } => {
            let mut children = Vec::with_capacity(config.len());
            for i in 0..config.len() {
                let cell = power_cell(poly, config, i).ok_or(Error::DegenerateCell { index: i })?;
                children.push(build_node(&cell, &Plan::Whole, f, density)?);
            }
            (Some(Cut::Power { config: config.clone() }), children)
        }
        Plan::Halving { t, left, right } => {
            let hp = halving_line(poly, *t, density)?;
            let children = vec![build_node(&hp.l, left, f, density)?, build_node(&hp.m, right, f, density)?];
            (Some(Cut::Line { t: hp.t, normal: hp.normal, offset: hp.offset }), children)
        }
        Plan::Power { config, children: plans } => {
            let mut children = Vec::with_capacity(plans.len());
            for (i, child) in plans.iter().enumerate() {
                let cell = power_cell(poly, config, i).ok_or(Error::DegenerateCell { index: i })?;
                children.push(build_node(&cell, child, f, density)?);
            }
            (Some(Cut::Power { config: config.clone() }), children)
        }
    };
    let y = if children.is_empty() {
        f.eval(poly)
    } else {
        let mut leaves = Vec::new();
        for c in &children {
            c.collect_leaves(&mut leaves);
        }
        leaves.iter().map(|n| n.y).sum::<f64>() / leaves.len() as f64
    };
    Ok(TreeNode { polygon: poly.clone(), mass: density.mass(poly), parts: m.max(1), y, cut, children })
}

/// Equal-mass, equal-`f` partition of `body` into `m` parts for any `m`.
///
/// A prime `m` is a single call to the direct solver with the same options,
/// so both give the same partition.
pub fn solve_general(
    body: &ConvexPolygon,
    m: usize,
    f: &Functional,
    density: &Density,
    opts: &GeneralOptions,
) -> Result<PartitionTree> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    if !(density.mass(body) > 0.0) {
        return Err(Error::InvalidArgument("body has zero mass under the density".into()));
    }
    let solver = Solver { f, density, opts };
    let solved = solver.solve(body, m, None, opts.partition.tol_f)?;
    let tree = PartitionTree::build(body, m, &solved.plan, f, density)?;
    if !(tree.max_mass_deviation <= opts.tol_area && tree.max_f_deviation <= opts.tol_f) {
        return Err(Error::TreeNotConverged {
            reason: format!(
                "leaf mass deviation {:.3e}, functional deviation {:.3e}",
                tree.max_mass_deviation, tree.max_f_deviation
            ),
            partial: Some(Box::new(tree)),
        });
    }
    Ok(tree)
}
