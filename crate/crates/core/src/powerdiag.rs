//! Power (weighted Voronoi) diagrams restricted to a convex body.
//!
//! Cell `i` is `{x in K : |x - x_i|^2 - w_i <= |x - x_j|^2 - w_j for all j}`,
//! computed by clipping `K` against the `m - 1` power bisectors. The other
//! sites are visited in an order that depends only on their coordinates and
//! weights, so permuting the input permutes the output bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom2d::{clip_tagged, Clip, ConvexPolygon, Density, Vec2, EPS_GEOM};

/// Sites and power weights. Weights are kept at zero mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteConfig {
    pub sites: Vec<Vec2>,
    pub weights: Vec<f64>,
}

impl SiteConfig {
    pub fn new(sites: Vec<Vec2>, weights: Vec<f64>) -> Result<Self> {
        if sites.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} sites but {} weights",
                sites.len(),
                weights.len()
            )));
        }
        if sites.is_empty() {
            return Err(Error::InvalidArgument("no sites".into()));
        }
        if sites.iter().any(|s| !s.is_finite()) || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("non-finite site or weight".into()));
        }
        let mut cfg = Self { sites, weights };
        cfg.normalize_gauge();
        Ok(cfg)
    }

    /// Sites with all weights zero (an ordinary Voronoi diagram).
    pub fn unweighted(sites: Vec<Vec2>) -> Result<Self> {
        let m = sites.len();
        Self::new(sites, vec![0.0; m])
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Subtract the mean weight; the diagram does not change.
    pub fn normalize_gauge(&mut self) {
        let mean = self.weights.iter().sum::<f64>() / self.weights.len() as f64;
        self.weights.iter_mut().for_each(|w| *w -= mean);
    }

    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.sites.len() {
            for j in i + 1..self.sites.len() {
                best = best.min(self.sites[i].dist(self.sites[j]));
            }
        }
        best
    }

    /// Sites must be pairwise farther apart than `EPS_GEOM * scale`.
    pub fn check_distinct(&self, scale: f64) -> Result<()> {
        if self.sites.len() > 1 && self.min_separation() <= EPS_GEOM * scale {
            return Err(Error::DegenerateConfig(format!(
                "two sites closer than {:.3e}",
                EPS_GEOM * scale
            )));
        }
        Ok(())
    }

    /// Apply the same permutation to sites and weights: entry `k` of the
    /// result is entry `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> SiteConfig {
        SiteConfig {
            sites: perm.iter().map(|&k| self.sites[k]).collect(),
            weights: perm.iter().map(|&k| self.weights[k]).collect(),
        }
    }
}

/// Which constraint produced an edge of a power cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeOwner {
    Boundary,
    Site(usize),
}

/// A power cell with the owner of each edge `v[k] -> v[k+1]`.
#[derive(Clone, Debug)]
pub struct TaggedCell {
    pub polygon: ConvexPolygon,
    pub owners: Vec<EdgeOwner>,
}

/// All cells of a restricted power diagram and their masses.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellSet {
    pub cells: Vec<Option<ConvexPolygon>>,
    pub masses: Vec<f64>,
}

impl CellSet {
    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn empty_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_none()).count()
    }
}

/// Half-plane `normal . x <= offset` of points closer (in power distance) to
/// site `i` than to site `j`.
#[inline]
pub fn bisector(cfg: &SiteConfig, i: usize, j: usize) -> (Vec2, f64) {
    let (xi, xj) = (cfg.sites[i], cfg.sites[j]);
    let d = xj - xi;
    let mid = (xi + xj) * 0.5;
    (d, d.dot(mid) + 0.5 * (cfg.weights[i] - cfg.weights[j]))
}

/// Other sites in canonical clipping order: nearest first, ties broken by
/// coordinates and weight.
fn clip_order(cfg: &SiteConfig, i: usize) -> Vec<usize> {
    let xi = cfg.sites[i];
    let mut others: Vec<usize> = (0..cfg.len()).filter(|&j| j != i).collect();
    let key = |j: usize| {
        let s = cfg.sites[j];
        ((s - xi).norm_sq(), s.x, s.y, cfg.weights[j])
    };
    others.sort_by(|&a, &b| {
        let (ka, kb) = (key(a), key(b));
        ka.0.total_cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(ka.2.total_cmp(&kb.2))
            .then(ka.3.total_cmp(&kb.3))
    });
    others
}

pub fn power_cell_tagged(body: &ConvexPolygon, cfg: &SiteConfig, i: usize) -> Option<TaggedCell> {
    let scale = body.diameter();
    let mut verts = body.vertices().to_vec();
    let mut owners = vec![EdgeOwner::Boundary; verts.len()];
    for j in clip_order(cfg, i) {
        let (normal, offset) = bisector(cfg, i, j);
        match clip_tagged(&verts, &owners, scale, normal, offset, EdgeOwner::Site(j)) {
            Clip::Unchanged => {}
            Clip::Empty => return None,
            Clip::Clipped(v, t) => {
                verts = v;
                owners = t;
            }
        }
    }
    let polygon = ConvexPolygon::from_clip(verts)?;
    Some(TaggedCell { polygon, owners })
}

/// Cell `i` of the power diagram of `cfg`, restricted to `body`.
pub fn power_cell(body: &ConvexPolygon, cfg: &SiteConfig, i: usize) -> Option<ConvexPolygon> {
    power_cell_tagged(body, cfg, i).map(|c| c.polygon)
}

pub fn cell_set(body: &ConvexPolygon, cfg: &SiteConfig, density: &Density) -> CellSet {
    let cells: Vec<Option<ConvexPolygon>> = (0..cfg.len()).map(|i| power_cell(body, cfg, i)).collect();
    let masses = cells.iter().map(|c| c.as_ref().map_or(0.0, |p| density.mass(p))).collect();
    CellSet { cells, masses }
}
