use std::sync::Arc;

use fpp_core::average::{
    fluctuation_sup, fluctuation_table, mean_distance, Ensemble, PairSampling,
};
use fpp_core::bounds::lower_bound_certificate;
use fpp_core::engine::{omega_distance, SearchLimits, Window};
use fpp_core::{CayleyLattice, Point, WeightLaw};

fn p(c: &[i64]) -> Point {
    Point::from_slice(c)
}

fn uniform(seed: u64, replicas: usize) -> Ensemble {
    Ensemble::new(Arc::new(CayleyLattice::standard(2)), WeightLaw::uniform(1.0, 2.0), seed, replicas).unwrap()
}

/// `E min(S1, S2)` for independent sums of two U(1,2) weights, by dense
/// quadrature of `2 + ∫_2^4 P(S > t)^2 dt` with `P(S > t)` itself
/// integrated numerically from the uniform density.
fn two_path_minimum_expectation() -> f64 {
    let n = 4000;
    let tail = |t: f64| -> f64 {
        // P(U1 + U2 > t) = ∫_1^2 P(U2 > t − u) du.
        let m = 2000;
        (0..m)
            .map(|k| {
                let u = 1.0 + (k as f64 + 0.5) / m as f64;
                (2.0 - (t - u)).clamp(0.0, 1.0)
            })
            .sum::<f64>()
            / m as f64
    };
    let h = 2.0 / n as f64;
    2.0 + (0..n).map(|k| tail(2.0 + (k as f64 + 0.5) * h).powi(2) * h).sum::<f64>()
}

#[test]
fn short_pairs_match_quadrature() {
    // Every competing path has at least 4 edges, hence length at least 4,
    // which the direct routes never exceed.
    let ens = uniform(41, 4000);
    let e = mean_distance(&ens, &p(&[0, 0]), &p(&[2, 0]), false).unwrap();
    assert!((e.mean - 3.0).abs() <= 3.0 * e.std_error, "{e:?}");
    let oracle = two_path_minimum_expectation();
    assert!((oracle - 2.7666666).abs() < 1e-4);
    let e = mean_distance(&ens, &p(&[0, 0]), &p(&[1, 1]), false).unwrap();
    assert!((e.mean - oracle).abs() <= 3.0 * e.std_error, "{e:?} vs {oracle}");
    let windowed = ens.clone().with_limits(SearchLimits::default().with_window(Window::around(&p(&[1, 0]), 1)));
    let w = mean_distance(&windowed, &p(&[0, 0]), &p(&[1, 1]), false).unwrap();
    assert_eq!(w.mean, e.mean);
}

#[test]
fn unit_radius_sup_matches_exhaustive_pairs() {
    let ens = uniform(5, 64);
    let o = Point::origin(2);
    let s = fluctuation_sup(&ens, &o, 1, &PairSampling::default(), 1000).unwrap();
    let ball = ens.lattice.word_ball(&o, 1, 100).unwrap();
    let pts = ball.points();
    assert_eq!(s.pairs, pts.len() * pts.len());
    let per: Vec<Vec<f64>> = (0..ens.replicas)
        .map(|i| {
            let f = ens.field(i);
            pts.iter()
                .flat_map(|x| pts.iter().map(move |y| (*x, *y)))
                .map(|(x, y)| omega_distance(&f, &x, &y, &ens.limits).unwrap().0)
                .collect()
        })
        .collect();
    let n = per[0].len();
    let means: Vec<f64> = (0..n).map(|j| per.iter().map(|r| r[j]).sum::<f64>() / per.len() as f64).collect();
    let sup = per
        .iter()
        .map(|r| r.iter().zip(&means).map(|(v, m)| (v - m).abs()).fold(0.0, f64::max))
        .sum::<f64>()
        / per.len() as f64;
    assert!((s.mean_sup - sup).abs() < 1e-12, "{} vs {sup}", s.mean_sup);
}

#[test]
fn average_metric_axioms() {
    let ens = uniform(9, 400);
    let (x, y, z) = (p(&[0, 0]), p(&[6, 2]), p(&[3, -3]));
    let dxy = mean_distance(&ens, &x, &y, false).unwrap();
    let dyx = mean_distance(&ens, &y, &x, false).unwrap();
    assert_eq!(dxy.mean, dyx.mean);
    let dxz = mean_distance(&ens, &x, &z, false).unwrap();
    let dzy = mean_distance(&ens, &z, &y, false).unwrap();
    let joint = (dxy.std_error.powi(2) + dxz.std_error.powi(2) + dzy.std_error.powi(2)).sqrt();
    assert!(dxy.mean <= dxz.mean + dzy.mean + 3.0 * joint);

    let w = p(&[17, -40]);
    let other = ens.with_seed(1234);
    let shifted = mean_distance(&other, &w, &y.checked_add(&w).unwrap(), false).unwrap();
    let j = (dxy.std_error.powi(2) + shifted.std_error.powi(2)).sqrt();
    assert!((dxy.mean - shifted.mean).abs() <= 3.0 * j);
}

#[test]
fn bi_lipschitz_sandwich() {
    let law = WeightLaw::atom_mixture(0.1, 0.0, WeightLaw::uniform(0.5, 1.5));
    let lat = Arc::new(CayleyLattice::standard(2));
    let cert = lower_bound_certificate(&law, lat.degree()).unwrap();
    let ens = Ensemble::new(lat, law.clone(), 77, 300).unwrap();
    for y in [p(&[4, 0]), p(&[5, 5]), p(&[-7, 2])] {
        let e = mean_distance(&ens, &Point::origin(2), &y, false).unwrap();
        let d = ens.lattice.graph_distance(&Point::origin(2), &y) as f64;
        assert!(e.mean + 3.0 * e.std_error >= cert.a_doubleprime * d);
        assert!(e.mean - 3.0 * e.std_error <= law.mean() * d);
    }
}

#[test]
fn fitted_envelope_dominates_frequencies() {
    let ens = uniform(3, 500);
    let pairs: Vec<(Point, Point)> =
        [p(&[4, 0]), p(&[8, 0]), p(&[6, 6]), p(&[16, 0])].iter().map(|y| (Point::origin(2), *y)).collect();
    let t = fluctuation_table(&ens, &pairs, &[0.25, 0.5, 1.0, 1.5, 2.0, 3.0]).unwrap();
    assert!(t.fit.is_some());
    for (i, row) in t.rows.iter().enumerate() {
        for (j, f) in row.frequencies.iter().enumerate() {
            let env = t.envelope(i, j).unwrap();
            if env >= 5.0 / ens.replicas as f64 {
                assert!(*f <= env + 1e-12, "row {i} threshold {j}: {f} > {env}");
            }
        }
    }
}
