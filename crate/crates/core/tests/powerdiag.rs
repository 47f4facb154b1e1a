use equipart::geom2d::random_convex_polygon;
use equipart::powerdiag::{cell_set, power_cell};
use equipart::{ConvexPolygon, Density, SiteConfig, Vec2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pair(w: f64) -> SiteConfig {
    SiteConfig::new(vec![Vec2::new(0.25, 0.5), Vec2::new(0.75, 0.5)], vec![w, -w]).unwrap()
}

/// Power distance `|x - s|^2 - w`.
fn power(cfg: &SiteConfig, i: usize, x: Vec2) -> f64 {
    (x - cfg.sites[i]).norm_sq() - cfg.weights[i]
}

/// Boundary of two sites on the line y = 0.5, from equating power
/// distances: `x = (|s1|^2 - |s0|^2 + w0 - w1) / (2 (s1 - s0).x)`.
fn analytic_boundary(cfg: &SiteConfig) -> f64 {
    let (s0, s1) = (cfg.sites[0], cfg.sites[1]);
    (s1.norm_sq() - s0.norm_sq() + cfg.weights[0] - cfg.weights[1]) / (2.0 * (s1.x - s0.x))
}

#[test]
fn weighted_pair_boundary() {
    let sq = ConvexPolygon::unit_square();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for w in [0.125, 0.25] {
        let cfg = pair(w);
        let x = analytic_boundary(&cfg);
        let cell = power_cell(&sq, &cfg, 0).unwrap();
        let (_, hi) = cell.bounding_box();
        assert!((hi.x - x.min(1.0)).abs() < 1e-12, "w = {w}: {} vs {x}", hi.x);
        for _ in 0..2000 {
            let p = Vec2::new(rng.random(), rng.random());
            let closer = power(&cfg, 0, p) < power(&cfg, 1, p);
            if (p.x - x).abs() > 1e-9 {
                assert_eq!(cell.contains(p), closer, "w = {w}, {p}");
            }
        }
    }
    assert!((analytic_boundary(&pair(0.125)) - 0.75).abs() < 1e-15);
    assert!((analytic_boundary(&pair(0.25)) - 1.0).abs() < 1e-15);
}

#[test]
fn random_five_sites_cover_the_square() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sites: Vec<Vec2> = (0..5).map(|_| Vec2::new(rng.random(), rng.random())).collect();
    let cs = cell_set(&ConvexPolygon::unit_square(), &SiteConfig::unweighted(sites).unwrap(), &Density::Uniform);
    assert!((cs.total_mass() - 1.0).abs() < 1e-9);
}

fn arb_body() -> impl Strategy<Value = ConvexPolygon> {
    (3usize..10, any::<u64>()).prop_map(|(n, seed)| random_convex_polygon(n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap())
}

/// Sites in the bounding box of the body, weights on the scale of its area.
fn arb_config(m: std::ops::Range<usize>) -> impl Strategy<Value = SiteConfig> {
    (m, any::<u64>()).prop_map(|(m, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sites = (0..m).map(|_| Vec2::new(rng.random(), rng.random())).collect();
        let weights = (0..m).map(|_| 0.1 * (rng.random::<f64>() - 0.5)).collect();
        SiteConfig::new(sites, weights).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn cells_tile_the_body(body in arb_body(), cfg in arb_config(1..12)) {
        let cs = cell_set(&body, &cfg, &Density::Uniform);
        let area: f64 = cs.cells.iter().flatten().map(|c| c.area()).sum();
        prop_assert!((area - body.area()).abs() <= 1e-9 * body.area());
    }

    #[test]
    fn permuting_sites_permutes_cells(body in arb_body(), cfg in arb_config(2..10), seed in any::<u64>()) {
        let mut perm: Vec<usize> = (0..cfg.len()).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(seed));
        let a = cell_set(&body, &cfg, &Density::Uniform);
        let b = cell_set(&body, &cfg.permuted(&perm), &Density::Uniform);
        for (k, &j) in perm.iter().enumerate() {
            prop_assert_eq!(&b.cells[k], &a.cells[j]);
            prop_assert_eq!(b.masses[k], a.masses[j]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn raising_a_weight_never_shrinks_its_cell(body in arb_body(), cfg in arb_config(2..8), i in 0usize..8, dw in 0.0..0.05f64) {
        let i = i % cfg.len();
        let before = cell_set(&body, &cfg, &Density::Uniform).masses[i];
        let mut up = cfg.clone();
        up.weights[i] += dw;
        let after = cell_set(&body, &up, &Density::Uniform).masses[i];
        prop_assert!(after >= before - 1e-14 * body.area(), "{before} -> {after}");
    }

    #[test]
    fn translation_moves_every_cell(body in arb_body(), cfg in arb_config(1..8), dx in -3.0..3.0f64, dy in -3.0..3.0f64) {
        let d = Vec2::new(dx, dy);
        let moved_body = body.transformed(0.0, d);
        let moved_cfg = SiteConfig { sites: cfg.sites.iter().map(|&s| s + d).collect(), weights: cfg.weights.clone() };
        let a = cell_set(&body, &cfg, &Density::Uniform);
        let b = cell_set(&moved_body, &moved_cfg, &Density::Uniform);
        for (p, q) in a.cells.iter().zip(&b.cells) {
            match (p, q) {
                (Some(p), Some(q)) => {
                    prop_assert_eq!(p.len(), q.len());
                    for (u, v) in p.vertices().iter().zip(q.vertices()) {
                        prop_assert!((*u + d).dist(*v) <= 1e-9 * body.diameter());
                    }
                }
                (None, None) => {}
                // A sliver at the emptiness threshold may flip under roundoff.
                (Some(c), None) | (None, Some(c)) => prop_assert!(c.area() <= 1e-9 * body.area()),
            }
        }
    }
}
