use std::sync::Arc;

use fpp_core::average::Ensemble;
use fpp_core::geodesicity::{
    dyadic_subdivision, monotone_ball_check, rounded_interpolation, sag_sequence, sagstar_deficiency,
    segment_rounding_sequence, AverageOracle, CheckStatus, DoublingProfile, MetricOracle, NormKind, NormOracle,
    SagProfile, WordOracle,
};
use fpp_core::{CayleyLattice, Point, WeightLaw};
use proptest::prelude::*;

fn p(c: &[i64]) -> Point {
    Point::from_slice(c)
}

fn word(lat: CayleyLattice) -> WordOracle {
    WordOracle::new(Arc::new(lat))
}

fn dist(o: &dyn MetricOracle, a: &Point, b: &Point) -> f64 {
    o.distance(a, b).unwrap().value
}

/// Best `max_i |m δ(x_i, x_{i+1}) / δ(x, y) − 1|` over interior points
/// chosen independently from word balls of radius `r` around the rounded
/// equally spaced points.
fn brute_force_equipartition(o: &dyn MetricOracle, x: &Point, y: &Point, m: usize, r: u64) -> f64 {
    let total = dist(o, x, y);
    let windows: Vec<Vec<Point>> = (1..m)
        .map(|i| {
            let c = rounded_interpolation(x, y, i as f64 / m as f64);
            o.lattice().word_ball(&c, r, 10_000).unwrap().points().to_vec()
        })
        .collect();
    let mut best = f64::INFINITY;
    let mut idx = vec![0usize; m - 1];
    loop {
        let mut pts = vec![*x];
        pts.extend(idx.iter().zip(&windows).map(|(i, w)| w[*i]));
        pts.push(*y);
        let def = pts
            .windows(2)
            .map(|w| (dist(o, &w[0], &w[1]) * m as f64 / total - 1.0).abs())
            .fold(0.0, f64::max);
        best = best.min(def);
        let mut k = 0;
        loop {
            if k == idx.len() {
                return best;
            }
            idx[k] += 1;
            if idx[k] < windows[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

#[test]
fn dyadic_four_parts_against_brute_force() {
    let w = word(CayleyLattice::standard(2));
    let (x, y) = (p(&[0, 0]), p(&[9, 3]));
    let r = dyadic_subdivision(&w, &x, &y, 2, 3, 1.0, 10_000).unwrap();
    let oracle = brute_force_equipartition(&w, &x, &y, 4, 2);
    let per_level: f64 = r.levels.iter().map(|l| l.a_upper.max(l.a_lower) - 1.0).sum();
    assert!(r.deficiency <= oracle + per_level + 1e-12, "{} vs {oracle} + {per_level}", r.deficiency);
    assert_eq!(r.points.len(), 5);
}

#[test]
fn sag_sequence_three_parts_against_brute_force() {
    let w = word(CayleyLattice::standard(2));
    let r = sag_sequence(&w, &p(&[0, 0]), &p(&[12, 0]), 3, 3, 1.0, 10_000).unwrap();
    assert_eq!(r.deficiency, brute_force_equipartition(&w, &p(&[0, 0]), &p(&[12, 0]), 3, 3));
    let mut seed = 0x1234_5678u64;
    let mut seen = std::collections::BTreeSet::new();
    while seen.len() < 20 {
        seed = fpp_core::weights::mix64(seed, &[1]);
        // Word distance in [48, 120], above the scale where the dyadic grid
        // is coarser than the lattice.
        let a = (seed % 41) as i64 + 48;
        let b = ((seed >> 20) % 61) as i64 - 30;
        let b = b.signum() * b.abs().min(120 - a);
        if !seen.insert((a, b)) {
            continue;
        }
        let y = p(&[a, b]);
        let r = sag_sequence(&w, &p(&[0, 0]), &y, 3, 3, 1.0, 10_000).unwrap();
        let oracle = brute_force_equipartition(&w, &p(&[0, 0]), &y, 3, 3);
        let grid = dyadic_subdivision(&w, &p(&[0, 0]), &y, 4, 3, 1.0, 10_000).unwrap();
        let tol: f64 = grid.levels.iter().map(|l| l.a_upper.max(l.a_lower) - 1.0).sum();
        // The construction can lose one lattice unit on a single part.
        let unit = 3.0 / dist(&w, &p(&[0, 0]), &y);
        assert!(r.deficiency <= oracle + unit + 1e-12, "y = {y}: {} vs {oracle}", r.deficiency);
        assert!(r.deficiency <= oracle + tol + 1e-12);
    }
}

#[test]
fn dyadic_ratio_law_on_word_metrics() {
    for lat in [CayleyLattice::standard(1), CayleyLattice::standard(2), CayleyLattice::king(2)] {
        let dim = lat.dim();
        let w = word(lat);
        let y = if dim == 1 { p(&[63]) } else { p(&[45, 18]) };
        let r = dyadic_subdivision(&w, &Point::origin(dim), &y, 4, 3, 1.0, 10_000).unwrap();
        let c = r.ratio_law_constant.unwrap();
        assert!(c.is_finite());
        let mut prev = 1.0;
        for l in &r.levels {
            assert!(l.a_upper <= prev * (1.0 + c * (-(l.level as f64) / 3.0).exp2()) + 1e-12);
            prev = l.a_upper;
        }
        assert!(r.ratio_bound.unwrap() >= 1.0);
    }
    let z1 = word(CayleyLattice::standard(1));
    for k in 1..6 {
        let r = dyadic_subdivision(&z1, &p(&[0]), &p(&[1 << (k + 2)]), k, 3, 1.0, 10_000).unwrap();
        assert_eq!(r.deficiency, 0.0);
    }
}

#[test]
fn segment_rounding_rate_on_l1() {
    let l1 = NormOracle::new(Arc::new(CayleyLattice::standard(2)), NormKind::L1);
    let k = NormKind::L1.covering_radius(2);
    let phi = DoublingProfile::default();
    let m = 3u64;
    let mut prev = f64::INFINITY;
    for alpha in [8i64, 16, 32] {
        // ‖y‖₁ = α m, and the segment points are off the lattice.
        let y = p(&[17 * alpha / 8, 7 * alpha / 8]);
        let r = segment_rounding_sequence(&l1, &Point::origin(2), &y, m, &phi, 4.0).unwrap();
        let len = l1.norm_of(&y);
        assert!(r.result.deficiency <= 4.0 * k * m as f64 / len + 1e-12);
        assert!(r.result.deficiency <= prev);
        assert!(r.sandwich_holds);
        prev = r.result.deficiency;
    }
    let r = segment_rounding_sequence(&l1, &Point::origin(2), &p(&[7, 3]), 3, &phi, 2.0).unwrap();
    for (i, q) in r.result.points.iter().enumerate() {
        let z = [7.0 * i as f64 / 3.0, i as f64];
        assert!(NormKind::Linf.eval(&[q.get(0) as f64 - z[0], q.get(1) as f64 - z[1]]) <= 1.0);
    }
}

#[test]
fn monotone_check_on_the_average_metric() {
    let ens = Ensemble::new(Arc::new(CayleyLattice::standard(2)), WeightLaw::uniform(1.0, 2.0), 5, 40).unwrap();
    let o = AverageOracle::new(ens);
    let c = monotone_ball_check(&o, &Point::origin(2), 16.0, &SagProfile::average_metric(1.0), 100_000).unwrap();
    assert_eq!(c.status, CheckStatus::Holds, "{c:?}");
    assert!(c.worst_defect.is_finite() && c.outer_points >= c.inner_points);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn sagstar_symmetry_for_exact_oracles(
        x in (-10i64..10, -10i64..10),
        y in (-10i64..10, -10i64..10),
        lam in 0.0f64..=1.0,
        which in 0usize..3,
    ) {
        prop_assume!(x != y);
        let lat = Arc::new(CayleyLattice::standard(2));
        let o: Box<dyn MetricOracle> = match which {
            0 => Box::new(WordOracle::new(lat)),
            1 => Box::new(NormOracle::new(lat, NormKind::L2)),
            _ => Box::new(WordOracle::new(Arc::new(CayleyLattice::king(2)))),
        };
        let (x, y) = (p(&[x.0, x.1]), p(&[y.0, y.1]));
        let a = sagstar_deficiency(o.as_ref(), &x, &y, lam, 3, 10_000).unwrap();
        let b = sagstar_deficiency(o.as_ref(), &y, &x, 1.0 - lam, 3, 10_000).unwrap();
        prop_assert!((a.eps - b.eps).abs() <= 1e-12, "{} vs {}", a.eps, b.eps);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn sagstar_is_exact_over_its_search_region(
        y in (-10i64..=10, -10i64..=10),
        lam in 0.0f64..=1.0,
        radius in 0i64..4,
    ) {
        let (x, y) = (p(&[0, 0]), p(&[y.0, y.1]));
        prop_assume!(x != y);
        let w = word(CayleyLattice::standard(2));
        let r = sagstar_deficiency(&w, &x, &y, lam, radius, 10_000).unwrap();
        let d = dist(&w, &x, &y);
        let center = rounded_interpolation(&x, &y, lam);
        let best = w
            .lattice()
            .word_ball(&center, radius as u64, 10_000)
            .unwrap()
            .points()
            .iter()
            .map(|z| (dist(&w, &x, z) - lam * d).abs().max((dist(&w, z, &y) - (1.0 - lam) * d).abs()))
            .fold(f64::INFINITY, f64::min);
        prop_assert_eq!(r.eps, best / d);
        let s = (dist(&w, &x, &r.z) - lam * d).abs().max((dist(&w, &r.z, &y) - (1.0 - lam) * d).abs());
        prop_assert_eq!(s, best);
    }
}
