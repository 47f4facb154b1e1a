use std::f64::consts::{PI, TAU};

use equipart::equalize_area::{equal_capacities, solve_weights};
use equipart::equalize_fn::{discrepancy, initial_sites, solve_from, solve_partition, FunctionalValues, Init, PartitionOptions};
use equipart::geom2d::{random_convex_polygon, regular_polygon};
use equipart::verify::check_partition;
use equipart::{ConvexPolygon, Density, Functional, SiteConfig, Vec2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn triangle() -> ConvexPolygon {
    ConvexPolygon::new(vec![Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(0.0, 1.0)]).unwrap()
}

/// Regular 256-gon with perimeter 2π centred at (1, 1).
fn disk() -> ConvexPolygon {
    let r = PI / (256.0 * (PI / 256.0).sin());
    regular_polygon(256, Vec2::new(1.0, 1.0), r, 0.0).unwrap()
}

fn opts_with(inits: Vec<Init>) -> PartitionOptions {
    PartitionOptions { inits, ..PartitionOptions::default() }
}

/// Largest distance from a cell to its best match in the other list.
fn set_distance(a: &[ConvexPolygon], b: &[ConvexPolygon]) -> f64 {
    a.iter().map(|p| b.iter().map(|q| p.hausdorff(q)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
}

#[test]
fn discrepancy_of_symmetric_configurations() {
    let sq = ConvexPolygon::unit_square();
    let per = Functional::perimeter();
    let quarters = SiteConfig::unweighted(vec![
        Vec2::new(0.25, 0.25),
        Vec2::new(0.75, 0.25),
        Vec2::new(0.25, 0.75),
        Vec2::new(0.75, 0.75),
    ])
    .unwrap();
    assert!(discrepancy(&sq, &quarters, &per).unwrap().max_abs() < 1e-15);

    // Isosceles triangle symmetric about x = 0; the sites mirror each other.
    let iso = ConvexPolygon::new(vec![Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 2.0)]).unwrap();
    let mirrored = SiteConfig::unweighted(vec![Vec2::new(-0.3, 0.6), Vec2::new(0.3, 0.6)]).unwrap();
    assert!(discrepancy(&iso, &mirrored, &per).unwrap().max_abs() < 1e-14);

    let sites = [Vec2::new(0.2, 0.5), Vec2::new(0.8, 0.5)];
    let sol = solve_weights(&sq, &sites, &[0.5, 0.5], &Density::Uniform, 1e-12).unwrap();
    let left = equipart::powerdiag::power_cell(&sq, &sol.config, 0).unwrap();
    assert!(left.hausdorff(&ConvexPolygon::rectangle(0.0, 0.0, 0.5, 1.0).unwrap()) < 1e-12);
    assert!(discrepancy(&sq, &sol.config, &per).unwrap().max_abs() < 1e-12);
}

#[test]
fn square_three_strips() {
    let sol = solve_partition(&ConvexPolygon::unit_square(), 3, &Functional::perimeter(), &Density::Uniform, &opts_with(vec![Init::Strips]))
        .unwrap();
    assert!((sol.value - 8.0 / 3.0).abs() < 1e-6, "{}", sol.value);
}

#[test]
fn disk_gives_sectors() {
    let d = disk();
    for m in [3, 5] {
        let sol = solve_partition(&d, m, &Functional::perimeter(), &Density::Uniform, &opts_with(vec![Init::Ring])).unwrap();
        let sector = 2.0 + TAU / m as f64;
        assert!((sol.value - sector).abs() < 1e-4, "m = {m}: {} vs {sector}", sol.value);
    }
}

/// Halves of `body` by the line of direction `t`, offset found by bisection
/// on the clipped area.
fn oracle_halves(body: &ConvexPolygon, t: f64) -> (ConvexPolygon, ConvexPolygon) {
    let n = Vec2::polar(t).perp();
    let (mut lo, mut hi) = body.support_range(n);
    let half = 0.5 * body.area();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if body.clip_halfplane(n, mid).map_or(0.0, |p| p.area()) < half {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    (body.clip_halfplane(n, s).unwrap(), body.clip_halfplane(-n, -s).unwrap())
}

fn perimeter_gap(body: &ConvexPolygon, t: f64) -> f64 {
    let (a, b) = oracle_halves(body, t);
    a.perimeter() - b.perimeter()
}

/// Every equal-area, equal-perimeter bisecting line, by a sign-change scan
/// over directions and bisection in the angle.
fn oracle_bisections(body: &ConvexPolygon) -> Vec<(ConvexPolygon, ConvexPolygon)> {
    let n = 720;
    let ts: Vec<f64> = (0..=n).map(|k| PI * k as f64 / n as f64).collect();
    let ds: Vec<f64> = ts.iter().map(|&t| perimeter_gap(body, t)).collect();
    let mut out = Vec::new();
    for k in 0..n {
        if ds[k] == 0.0 || ds[k].signum() != ds[k + 1].signum() {
            let (mut a, mut b, da) = (ts[k], ts[k + 1], ds[k]);
            for _ in 0..100 {
                let mid = 0.5 * (a + b);
                if perimeter_gap(body, mid).signum() == da.signum() {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            out.push(oracle_halves(body, 0.5 * (a + b)));
        }
    }
    out
}

#[test]
fn triangle_halving_matches_the_line_oracle() {
    let tri = triangle();
    let sol = solve_partition(&tri, 2, &Functional::perimeter(), &Density::Uniform, &PartitionOptions::default()).unwrap();
    let roots = oracle_bisections(&tri);
    assert!(!roots.is_empty());
    let best = roots
        .iter()
        .map(|(a, b)| set_distance(&sol.cells, &[a.clone(), b.clone()]))
        .fold(f64::INFINITY, f64::min);
    assert!(best < 1e-6, "closest oracle line is {best:.3e} away");
}

#[test]
fn permuted_starts_give_permuted_solutions() {
    let body = random_convex_polygon(9, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let per = Functional::perimeter();
    let opts = PartitionOptions::default();
    let sites = initial_sites(&body, 4, Init::Lattice, &mut ChaCha8Rng::seed_from_u64(0));
    let a = solve_from(&body, &sites, &mut FunctionalValues(per.clone()), &Density::Uniform, &opts).unwrap();
    let perm = [2, 0, 3, 1];
    let permuted: Vec<Vec2> = perm.iter().map(|&k| sites[k]).collect();
    let b = solve_from(&body, &permuted, &mut FunctionalValues(per), &Density::Uniform, &opts).unwrap();
    for (k, &j) in perm.iter().enumerate() {
        assert!(b.cells[k].hausdorff(&a.cells[j]) < 1e-6, "cell {k}");
    }
}

#[test]
fn centrally_symmetric_halves_are_congruent() {
    let hex = ConvexPolygon::new(vec![
        Vec2::new(0.0, 0.0),
        Vec2::new(2.0, 0.3),
        Vec2::new(3.0, 1.5),
        Vec2::new(3.0, 2.0),
        Vec2::new(1.0, 1.7),
        Vec2::new(0.0, 0.5),
    ])
    .unwrap();
    let c = hex.vertex_mean();
    let sol = solve_partition(&hex, 2, &Functional::perimeter(), &Density::Uniform, &PartitionOptions::default()).unwrap();
    let reflected = sol.cells[0].transformed(PI, Vec2::ZERO).transformed(0.0, c * 2.0);
    assert!(reflected.hausdorff(&sol.cells[1]) < 1e-9 * hex.diameter());
}

#[test]
fn solutions_pass_verify() {
    let bodies = [ConvexPolygon::unit_square(), triangle(), random_convex_polygon(9, &mut ChaCha8Rng::seed_from_u64(9)).unwrap()];
    for f in [Functional::perimeter(), Functional::diameter(), Functional::width()] {
        for body in &bodies {
            for m in [2, 3] {
                let sol = solve_partition(body, m, &f, &Density::Uniform, &PartitionOptions::default()).unwrap();
                let cells: Vec<Vec<Vec2>> = sol.cells.iter().map(|c| c.vertices().to_vec()).collect();
                let report = check_partition(body, &cells, &Density::Uniform, &f, 1e-9, 1e-7);
                assert!(report.pass, "{} m = {m}: {:?}", f.name(), report.failures);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn discrepancy_sums_to_zero(n in 3usize..10, m in 2usize..8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let body = random_convex_polygon(n, &mut rng).unwrap();
        let sites = initial_sites(&body, m, Init::Random, &mut rng);
        let caps = equal_capacities(&body, &Density::Uniform, m);
        let w = solve_weights(&body, &sites, &caps, &Density::Uniform, 1e-10).unwrap();
        for f in [Functional::perimeter(), Functional::diameter()] {
            if let Ok(d) = discrepancy(&body, &w.config, &f) {
                let sum: f64 = d.components().iter().sum();
                prop_assert!(sum.abs() <= 1e-14 * body.perimeter() * m as f64);
            }
        }
    }
}
