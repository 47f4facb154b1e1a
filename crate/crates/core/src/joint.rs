//! Least squares over every parameter of a plan at once: cut angles and
//! the sites of every power diagram. Masses stay equal by construction, so
//! the residuals are the leaf values minus their mean.

use crate::equalize_area::{equal_capacities, solve_weights_from, WeightOptions};
use crate::equalize_fn::outer::{sample, Counter, Problem, Sample};
use crate::equalize_fn::{area_floor, lm_polished, DiscrepancyVector};
use crate::error::{Error, Result};
use crate::geom2d::{ConvexPolygon, Vec2};
use crate::powerdiag::{power_cell, SiteConfig};
use crate::recursive::{Plan, Solved, Solver};
use crate::sweep::halving_line;

/// Angles are stored as `t * scale` so one finite-difference step suits
/// both kinds of coordinate.
fn params(plan: &Plan, scale: f64, out: &mut Vec<f64>) {
    match plan {
        Plan::Whole => {}
        Plan::Direct { config } => out.extend(config.sites.iter().flat_map(|s| [s.x, s.y])),
        Plan::Halving { t, left, right } => {
            out.push(t * scale);
            params(left, scale, out);
            params(right, scale, out);
        }
        Plan::Power { config, children } => {
            out.extend(config.sites.iter().flat_map(|s| [s.x, s.y]));
            for c in children {
                params(c, scale, out);
            }
        }
    }
}

fn rebuild(plan: &Plan, scale: f64, x: &mut std::slice::Iter<f64>) -> Plan {
    let cfg = |c: &SiteConfig, x: &mut std::slice::Iter<f64>| SiteConfig {
        sites: (0..c.len()).map(|_| Vec2::new(*x.next().unwrap(), *x.next().unwrap())).collect(),
        weights: c.weights.clone(),
    };
    match plan {
        Plan::Whole => Plan::Whole,
        Plan::Direct { config } => Plan::Direct { config: cfg(config, x) },
        Plan::Halving { left, right, .. } => {
            let t = x.next().unwrap() / scale;
            let left = Box::new(rebuild(left, scale, x));
            let right = Box::new(rebuild(right, scale, x));
            Plan::Halving { t, left, right }
        }
        Plan::Power { config, children } => {
            let config = cfg(config, x);
            Plan::Power { config, children: children.iter().map(|c| rebuild(c, scale, x)).collect() }
        }
    }
}

/// Which entries of the parameter vector are sites.
fn site_mask(plan: &Plan, out: &mut Vec<bool>) {
    match plan {
        Plan::Whole => {}
        Plan::Direct { config } => out.extend(std::iter::repeat_n(true, 2 * config.len())),
        Plan::Halving { left, right, .. } => {
            out.push(false);
            site_mask(left, out);
            site_mask(right, out);
        }
        Plan::Power { config, children } => {
            out.extend(std::iter::repeat_n(true, 2 * config.len()));
            for c in children {
                site_mask(c, out);
            }
        }
    }
}

struct JointProblem<'a> {
    solver: &'a Solver<'a>,
    body: &'a ConvexPolygon,
    m: usize,
    /// Weights of the last accepted plan warm-start every evaluation.
    warm: Plan,
    scale: f64,
    sites: Vec<bool>,
    lo: Vec2,
    hi: Vec2,
    weight_opts: WeightOptions,
    tol: f64,
}

impl JointProblem<'_> {
    fn power(&self, body: &ConvexPolygon, config: &SiteConfig) -> Option<(SiteConfig, Vec<ConvexPolygon>)> {
        let k = config.len();
        let caps = equal_capacities(body, self.solver.density, k);
        let sol = solve_weights_from(body, &config.sites, Some(&config.weights), &caps, self.solver.density, &self.weight_opts)
            .ok()?;
        let floor = area_floor(body, k);
        let mut cells = Vec::with_capacity(k);
        for i in 0..k {
            let c = power_cell(body, &sol.config, i)?;
            if c.area() < floor {
                return None;
            }
            cells.push(c);
        }
        Some((sol.config, cells))
    }

    fn realize(&self, body: &ConvexPolygon, plan: &Plan, values: &mut Vec<f64>) -> Option<Plan> {
        match plan {
            Plan::Whole => {
                values.push(self.solver.f.eval(body));
                Some(Plan::Whole)
            }
            Plan::Direct { config } => {
                let (config, cells) = self.power(body, config)?;
                values.extend(cells.iter().map(|c| self.solver.f.eval(c)));
                Some(Plan::Direct { config })
            }
            Plan::Halving { t, left, right } => {
                let hp = halving_line(body, *t, self.solver.density).ok()?;
                let left = Box::new(self.realize(&hp.l, left, values)?);
                let right = Box::new(self.realize(&hp.m, right, values)?);
                Some(Plan::Halving { t: *t, left, right })
            }
            Plan::Power { config, children } => {
                let (config, cells) = self.power(body, config)?;
                let mut out = Vec::with_capacity(children.len());
                for (c, cell) in children.iter().zip(&cells) {
                    out.push(self.realize(cell, c, values)?);
                }
                Some(Plan::Power { config, children: out })
            }
        }
    }
}

#[derive(Clone)]
struct JointEval {
    plan: Plan,
    values: Vec<f64>,
}

fn relative_spread(v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let dev = v.iter().fold(0.0f64, |a, x| a.max((x - mean).abs()));
    if mean == 0.0 {
        dev
    } else {
        dev / mean.abs()
    }
}

impl Problem for JointProblem<'_> {
    type Extra = JointEval;

    fn project(&self, x: &mut [f64]) {
        let mut k = 0;
        while k < x.len() {
            if self.sites[k] {
                x[k] = x[k].clamp(self.lo.x, self.hi.x);
                x[k + 1] = x[k + 1].clamp(self.lo.y, self.hi.y);
                k += 2;
            } else {
                k += 1;
            }
        }
    }

    fn evaluate(&mut self, x: &[f64]) -> Option<(Vec<f64>, JointEval)> {
        let plan = rebuild(&self.warm, self.scale, &mut x.iter());
        let mut values = Vec::with_capacity(self.m);
        let plan = self.realize(self.body, &plan, &mut values)?;
        if values.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let r = DiscrepancyVector::from_values(&values).components().to_vec();
        Some((r, JointEval { plan, values }))
    }

    fn accept(&mut self, s: &Sample<JointEval>) {
        self.warm = s.extra.plan.clone();
    }

    fn converged(&self, s: &Sample<JointEval>) -> bool {
        relative_spread(&s.extra.values) <= self.tol
    }

    fn fd_step(&self) -> f64 {
        1e-6 * self.scale
    }
}

/// Move every cut of `plan` at once until the leaves of `body` agree on the
/// functional to relative accuracy `tol`.
pub(crate) fn fit(solver: &Solver, body: &ConvexPolygon, m: usize, plan: &Plan, tol: f64) -> Result<Solved> {
    let diam = body.diameter();
    let (blo, bhi) = body.bounding_box();
    let c = (blo + bhi) * 0.5;
    let mut sites = Vec::new();
    site_mask(plan, &mut sites);
    let popts = &solver.opts.partition;
    let mut prob = JointProblem {
        solver,
        body,
        m,
        warm: plan.clone(),
        scale: diam,
        sites,
        lo: c - Vec2::new(diam, diam),
        hi: c + Vec2::new(diam, diam),
        weight_opts: WeightOptions { tol: popts.tol_area, ..WeightOptions::default() },
        tol,
    };
    let mut x = Vec::new();
    params(plan, diam, &mut x);
    // A warm fit either converges in a few LM steps or is far from any
    // solution; the budget keeps failures cheap.
    let mut count = Counter::new(popts.max_evals.min(40 * (x.len() + 1)));
    let s0 = sample(&mut prob, x, &mut count).ok_or_else(|| Error::DegenerateConfig("plan gives a degenerate partition".into()))?;
    let best = lm_polished(&mut prob, s0, popts.max_iter, diam, &mut count);
    let spread = relative_spread(&best.extra.values);
    if spread <= tol {
        let y = best.extra.values.iter().sum::<f64>() / m as f64;
        Ok(Solved { y, plan: best.extra.plan })
    } else {
        Err(Error::TreeNotConverged { reason: format!("joint fit stalled at spread {spread:.3e}"), partial: None })
    }
}
