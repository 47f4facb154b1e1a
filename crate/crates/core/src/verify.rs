//! Independent partition checker. Everything is recomputed from the raw
//! vertex lists; no solver state is consulted.

use serde::{Deserialize, Serialize};

use crate::functional::Functional;
use crate::geom2d::{signed_area, ConvexPolygon, Density, Vec2};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub cells: usize,
    pub body_mass: f64,
    /// `|μ(K) - Σ μ(cell_i)|`.
    pub coverage_gap: f64,
    pub max_overlap_area: f64,
    /// Largest distance of a cell vertex outside the body.
    pub max_outside_distance: f64,
    /// `max_i |μ_i - mean| / mean`.
    pub max_mass_deviation: f64,
    /// `max_i |f_i - mean| / |mean|`.
    pub max_f_deviation: f64,
    pub masses: Vec<f64>,
    pub values: Vec<f64>,
    pub convex: Vec<bool>,
    pub tol_area: f64,
    pub tol_f: f64,
    pub pass: bool,
    pub failures: Vec<String>,
}

/// Check that `cells` tile `body` into parts of equal mass and equal `f`.
///
/// Cells are given as raw vertex lists so that malformed input can be
/// reported instead of rejected. Coverage and overlap are judged against
/// `tol_area` relative to the body mass and area respectively.
pub fn check_partition(
    body: &ConvexPolygon,
    cells: &[Vec<Vec2>],
    density: &Density,
    f: &Functional,
    tol_area: f64,
    tol_f: f64,
) -> Report {
    let mut failures = Vec::new();
    let polys: Vec<Option<ConvexPolygon>> = cells.iter().map(|v| ConvexPolygon::new(v.clone()).ok()).collect();
    let convex: Vec<bool> = polys.iter().map(Option::is_some).collect();
    for (i, ok) in convex.iter().enumerate() {
        if !ok {
            failures.push(format!("cell {i} is not a nondegenerate convex polygon"));
        }
    }
    let body_mass = density.mass(body);
    let masses: Vec<f64> = polys.iter().map(|p| p.as_ref().map_or(0.0, |q| density.mass(q))).collect();
    let values: Vec<f64> = polys.iter().map(|p| p.as_ref().map_or(f64::NAN, |q| f.eval(q))).collect();

    let covered: f64 = masses.iter().sum();
    let coverage_gap = (body_mass - covered).abs();
    if !(coverage_gap <= tol_area * body_mass) {
        failures.push(format!("coverage gap {coverage_gap:.3e}"));
    }

    let mut max_overlap_area: f64 = 0.0;
    for i in 0..polys.len() {
        for j in i + 1..polys.len() {
            if let (Some(a), Some(b)) = (&polys[i], &polys[j]) {
                if let Some(x) = a.intersection(b) {
                    max_overlap_area = max_overlap_area.max(x.area());
                }
            }
        }
    }
    if !(max_overlap_area <= tol_area * body.area()) {
        failures.push(format!("overlap area {max_overlap_area:.3e}"));
    }

    let max_outside_distance = cells
        .iter()
        .flatten()
        .map(|&v| body.distance_to(v))
        .fold(0.0, f64::max);
    if !(max_outside_distance <= tol_area * body.diameter()) {
        failures.push(format!("cell vertex {max_outside_distance:.3e} outside the body"));
    }

    let max_mass_deviation = relative_spread(&masses);
    if !(max_mass_deviation <= tol_area) {
        failures.push(format!("mass deviation {max_mass_deviation:.3e}"));
    }
    let max_f_deviation = relative_spread(&values);
    if !(max_f_deviation <= tol_f) {
        failures.push(format!("functional deviation {max_f_deviation:.3e}"));
    }
    if cells.is_empty() {
        failures.push("no cells".into());
    }

    Report {
        cells: cells.len(),
        body_mass,
        coverage_gap,
        max_overlap_area,
        max_outside_distance,
        max_mass_deviation,
        max_f_deviation,
        masses,
        values,
        convex,
        tol_area,
        tol_f,
        pass: failures.is_empty(),
        failures,
    }
}

/// `max |v_i - mean| / |mean|`; NaN propagates to a failing comparison.
fn relative_spread(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let dev = v.iter().fold(0.0f64, |a, x| if x.is_nan() { f64::NAN } else { a.max((x - mean).abs()) });
    if mean == 0.0 {
        dev
    } else {
        dev / mean.abs()
    }
}

/// Signed area of a raw vertex list; negative for clockwise input.
pub fn raw_area(v: &[Vec2]) -> f64 {
    signed_area(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Vec2> {
        vec![Vec2::new(x0, y0), Vec2::new(x1, y0), Vec2::new(x1, y1), Vec2::new(x0, y1)]
    }

    #[test]
    fn four_quarters_pass() {
        let cells = [rect(0.0, 0.0, 0.5, 0.5), rect(0.5, 0.0, 1.0, 0.5), rect(0.0, 0.5, 0.5, 1.0), rect(0.5, 0.5, 1.0, 1.0)];
        let r = check_partition(&ConvexPolygon::unit_square(), &cells, &Density::Uniform, &Functional::perimeter(), 1e-6, 1e-5);
        assert!(r.pass, "{:?}", r.failures);
        assert!(r.coverage_gap < 1e-12 && r.max_overlap_area < 1e-12);
        assert!(r.max_mass_deviation < 1e-12 && r.max_f_deviation < 1e-12);
    }

    #[test]
    fn ninety_percent_cover_fails() {
        let cells = [rect(0.0, 0.0, 0.3, 1.0), rect(0.3, 0.0, 0.6, 1.0), rect(0.6, 0.0, 0.9, 1.0)];
        let r = check_partition(&ConvexPolygon::unit_square(), &cells, &Density::Uniform, &Functional::perimeter(), 1e-6, 1e-5);
        assert!(!r.pass);
        assert!((r.coverage_gap - 0.1).abs() < 1e-12);
    }

    #[test]
    fn whole_body_passes() {
        let sq = ConvexPolygon::unit_square();
        let r = check_partition(&sq, &[sq.vertices().to_vec()], &Density::Uniform, &Functional::perimeter(), 1e-6, 1e-5);
        assert!(r.pass);
    }

    #[test]
    fn overlap_and_malformed_cells_fail() {
        let sq = ConvexPolygon::unit_square();
        let f = Functional::perimeter();
        let overlapping = [rect(0.0, 0.0, 0.6, 1.0), rect(0.4, 0.0, 1.0, 1.0)];
        let r = check_partition(&sq, &overlapping, &Density::Uniform, &f, 1e-6, 1e-5);
        assert!(!r.pass && (r.max_overlap_area - 0.2).abs() < 1e-12);

        let mut cw = rect(0.0, 0.0, 0.5, 1.0);
        cw.reverse();
        let r = check_partition(&sq, &[cw, rect(0.5, 0.0, 1.0, 1.0)], &Density::Uniform, &f, 1e-6, 1e-5);
        assert!(!r.pass && r.convex == vec![false, true]);
    }
}
