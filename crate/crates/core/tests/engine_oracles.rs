use std::sync::Arc;

use fpp_core::engine::{omega_ball, omega_distance, SearchLimits, Window};
use fpp_core::{CayleyLattice, OmegaField, Point, WeightLaw};
use proptest::prelude::*;

fn p(c: &[i64]) -> Point {
    Point::from_slice(c)
}

fn uniform_field(seed: u64) -> OmegaField {
    OmegaField::new(Arc::new(CayleyLattice::standard(2)), WeightLaw::uniform(1.0, 2.0), seed).unwrap()
}

/// Minimum ω-length over simple paths from `x` to `y` inside the window.
/// With `prune`, partial paths already at least as long as the best are cut,
/// which never changes the minimum for nonnegative weights.
fn simple_path_minimum(field: &OmegaField, w: &Window, x: &Point, y: &Point, prune: bool) -> f64 {
    fn go(
        field: &OmegaField,
        w: &Window,
        cur: Point,
        y: &Point,
        len: f64,
        seen: &mut Vec<Point>,
        best: &mut f64,
        prune: bool,
    ) {
        if cur == *y {
            *best = best.min(len);
            return;
        }
        if prune && len >= *best {
            return;
        }
        for g in field.lattice().generators() {
            let nxt = cur.checked_add(g).unwrap();
            if !w.contains(&nxt) || seen.contains(&nxt) {
                continue;
            }
            seen.push(nxt);
            go(field, w, nxt, y, len + field.weight_between(cur, nxt), seen, best, prune);
            seen.pop();
        }
    }
    let mut best = f64::INFINITY;
    go(field, w, *x, y, 0.0, &mut vec![*x], &mut best, prune);
    best
}

#[test]
fn seven_by_seven_window_matches_path_enumeration() {
    let f = uniform_field(1);
    let w = Window::around(&p(&[1, 0]), 3);
    let limits = SearchLimits::default().with_window(w);
    let (x, y) = (p(&[0, 0]), p(&[2, 1]));
    let (d, path) = omega_distance(&f, &x, &y, &limits).unwrap();
    let oracle = simple_path_minimum(&f, &w, &x, &y, true);
    assert!((d - oracle).abs() <= 1e-12, "{d} vs {oracle}");
    // A geodesic of length at most 6 has at most 6 hops, so it cannot reach
    // the window boundary in a way that a larger window would improve.
    let (free, _) = omega_distance(&f, &x, &y, &SearchLimits::default()).unwrap();
    assert_eq!(free, d);
    assert!(path.is_simple());
}

#[test]
fn ball_matches_bellman_ford_on_the_word_ball() {
    let f = uniform_field(7);
    let o = Point::origin(2);
    let ball = omega_ball(&f, &o, 4.0, &SearchLimits::default()).unwrap();
    let region = f.lattice().word_ball(&o, 4, 1000).unwrap();
    let pts = region.points();
    let mut dist: Vec<f64> = pts.iter().map(|q| if *q == o { 0.0 } else { f64::INFINITY }).collect();
    for _ in 0..pts.len() {
        for (i, u) in pts.iter().enumerate() {
            for (j, v) in pts.iter().enumerate() {
                if f.lattice().graph_distance(u, v) == 1 {
                    let c = dist[i] + f.weight_between(*u, *v);
                    if c < dist[j] {
                        dist[j] = c;
                    }
                }
            }
        }
    }
    let expected: Vec<(Point, f64)> =
        pts.iter().zip(&dist).filter(|(_, d)| **d <= 4.0).map(|(q, d)| (*q, *d)).collect();
    assert_eq!(ball.entries.len(), expected.len());
    for ((a, da), (b, db)) in ball.entries.iter().zip(&expected) {
        assert_eq!(a, b);
        assert!((da - db).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn five_by_five_windows_match_exhaustive_search(
        seed in any::<u64>(),
        cx in -20i64..20, cy in -20i64..20,
        a in 0usize..25, b in 0usize..25,
    ) {
        let f = uniform_field(seed);
        let w = Window::around(&p(&[cx, cy]), 2);
        let pts = w.points();
        let (x, y) = (pts[a], pts[b]);
        let (d, _) = omega_distance(&f, &x, &y, &SearchLimits::default().with_window(w)).unwrap();
        let oracle = simple_path_minimum(&f, &w, &x, &y, false);
        prop_assert!((d - oracle).abs() <= 1e-12);
    }

    #[test]
    fn metric_axioms_and_geodesic_consistency(
        seed in any::<u64>(),
        pts in proptest::collection::vec((-8i64..8, -8i64..8), 3),
    ) {
        let f = uniform_field(seed);
        let l = SearchLimits::default();
        let (x, y, z) = (p(&[pts[0].0, pts[0].1]), p(&[pts[1].0, pts[1].1]), p(&[pts[2].0, pts[2].1]));
        let (dxy, path) = omega_distance(&f, &x, &y, &l).unwrap();
        let (dyx, _) = omega_distance(&f, &y, &x, &l).unwrap();
        let (dxz, _) = omega_distance(&f, &x, &z, &l).unwrap();
        let (dzy, _) = omega_distance(&f, &z, &y, &l).unwrap();
        prop_assert_eq!(dxy, dyx);
        prop_assert!(dxy <= dxz + dzy);
        for v in &path.vertices {
            let (a, _) = omega_distance(&f, &x, v, &l).unwrap();
            let (b, _) = omega_distance(&f, v, &y, &l).unwrap();
            prop_assert!((a + b - dxy).abs() <= 1e-12);
        }
    }

    #[test]
    fn constant_law_is_the_word_metric(
        gens in prop_oneof![Just(0usize), Just(1usize)],
        x in (-30i64..30, -30i64..30),
        y in (-30i64..30, -30i64..30),
    ) {
        let lat = Arc::new(if gens == 0 { CayleyLattice::standard(2) } else { CayleyLattice::king(2) });
        let f = OmegaField::new(lat.clone(), WeightLaw::constant(1.0), 3).unwrap();
        let (x, y) = (p(&[x.0, x.1]), p(&[y.0, y.1]));
        let (d, _) = omega_distance(&f, &x, &y, &SearchLimits::default()).unwrap();
        prop_assert_eq!(d, lat.graph_distance(&x, &y) as f64);
    }
}
