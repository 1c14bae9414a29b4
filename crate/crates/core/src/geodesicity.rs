//! How geodesic a metric on `Z^d` is at finite scale.
//!
//! A metric is queried through [`MetricOracle`]: the word metric, one fixed
//! weight field, the Monte Carlo average distance, or a norm restricted to
//! the lattice. On top of it this module measures near-λ-points (the SAG*
//! deficiency), builds near-equipartitions of a pair by dyadic refinement
//! and by rounding a straight segment, and checks the annulus absorption
//! `B(0, (1 + 1/N(r)) r) ⊂ [B(0, r)]_{6r/N(r)}`.

use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::average::{mean_and_stderr, Ensemble, Measured};
use crate::engine::{distances_to, geodesic_waypoint, omega_distance, SearchLimits};
use crate::error::{FppError, Result};
use crate::geometry::{PointCloud, SupportBody};
use crate::lattice::{CayleyLattice, Point};
use crate::weights::{mix64, OmegaField};

/// A queryable invariant metric `δ` on the lattice.
pub trait MetricOracle: Sync {
    fn lattice(&self) -> &CayleyLattice;

    /// Whether returned distances carry no estimation error.
    fn is_exact(&self) -> bool;

    /// `δ(x, t)` for every target.
    fn distances_from(&self, x: &Point, targets: &[Point]) -> Result<Vec<Measured>>;

    fn distance(&self, x: &Point, y: &Point) -> Result<Measured> {
        Ok(self.distances_from(x, &[*y])?[0])
    }

    /// `G` with `δ(x, y) ≤ G · d(x, y)` for the word metric `d`.
    fn upper_lipschitz(&self) -> f64;

    /// `a > 0` with `δ(x, y) ≥ a · d(x, y)`.
    fn lower_lipschitz(&self) -> f64;
}

/// The word metric of the lattice.
#[derive(Clone, Debug)]
pub struct WordOracle {
    lattice: Arc<CayleyLattice>,
}

impl WordOracle {
    pub fn new(lattice: Arc<CayleyLattice>) -> Self {
        WordOracle { lattice }
    }
}

impl MetricOracle for WordOracle {
    fn lattice(&self) -> &CayleyLattice {
        &self.lattice
    }

    fn is_exact(&self) -> bool {
        true
    }

    fn distances_from(&self, x: &Point, targets: &[Point]) -> Result<Vec<Measured>> {
        Ok(targets.iter().map(|t| Measured::exact(self.lattice.graph_distance(x, t) as f64)).collect())
    }

    fn upper_lipschitz(&self) -> f64 {
        1.0
    }

    fn lower_lipschitz(&self) -> f64 {
        1.0
    }
}

/// `d_ω` for one fixed weight field.
#[derive(Clone, Debug)]
pub struct OmegaOracle {
    field: OmegaField,
    limits: SearchLimits,
}

impl OmegaOracle {
    pub fn new(field: OmegaField, limits: SearchLimits) -> Self {
        OmegaOracle { field, limits }
    }
}

impl MetricOracle for OmegaOracle {
    fn lattice(&self) -> &CayleyLattice {
        self.field.lattice()
    }

    fn is_exact(&self) -> bool {
        true
    }

    fn distances_from(&self, x: &Point, targets: &[Point]) -> Result<Vec<Measured>> {
        Ok(distances_to(&self.field, x, targets, &self.limits)?.into_iter().map(Measured::exact).collect())
    }

    fn upper_lipschitz(&self) -> f64 {
        self.field.law().ess_sup().unwrap_or(f64::INFINITY)
    }

    fn lower_lipschitz(&self) -> f64 {
        self.field.law().ess_inf()
    }
}

/// Monte Carlo estimate of the average distance. Every query runs one
/// search per replica; the number of searches is charged against an
/// optional budget behind a single lock.
#[derive(Debug)]
pub struct AverageOracle {
    ensemble: Ensemble,
    budget: Option<u64>,
    spent: Mutex<u64>,
}

impl AverageOracle {
    pub fn new(ensemble: Ensemble) -> Self {
        AverageOracle { ensemble, budget: None, spent: Mutex::new(0) }
    }

    pub fn with_budget(mut self, searches: u64) -> Self {
        self.budget = Some(searches);
        self
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn searches_spent(&self) -> u64 {
        *self.spent.lock().expect("accounting lock")
    }

    fn charge(&self, searches: u64) -> Result<()> {
        let mut spent = self.spent.lock().expect("accounting lock");
        if let Some(b) = self.budget {
            if *spent + searches > b {
                return Err(FppError::ResourceLimit(format!("replica search budget {b} exhausted")));
            }
        }
        *spent += searches;
        Ok(())
    }

    /// Per-replica distances, `[replica][target]`.
    pub fn replica_distances(&self, x: &Point, targets: &[Point]) -> Result<Vec<Vec<f64>>> {
        self.charge(self.ensemble.replicas as u64)?;
        self.ensemble.replica_distances(x, targets)
    }
}

impl MetricOracle for AverageOracle {
    fn lattice(&self) -> &CayleyLattice {
        &self.ensemble.lattice
    }

    fn is_exact(&self) -> bool {
        self.ensemble.law.is_deterministic()
    }

    fn distances_from(&self, x: &Point, targets: &[Point]) -> Result<Vec<Measured>> {
        let v = self.replica_distances(x, targets)?;
        Ok((0..targets.len()).map(|j| mean_and_stderr(&v.iter().map(|r| r[j]).collect::<Vec<_>>())).collect())
    }

    fn upper_lipschitz(&self) -> f64 {
        self.ensemble.law.mean()
    }

    fn lower_lipschitz(&self) -> f64 {
        self.ensemble.law.ess_inf()
    }
}

/// A norm on `R^d`.
#[derive(Clone, Debug, PartialEq)]
pub enum NormKind {
    L1,
    L2,
    Linf,
    Gauge(Arc<SupportBody>),
}

impl NormKind {
    pub fn eval(&self, v: &[f64]) -> f64 {
        match self {
            NormKind::L1 => v.iter().map(|x| x.abs()).sum(),
            NormKind::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            NormKind::Linf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            NormKind::Gauge(b) => b.gauge(v),
        }
    }

    /// Largest `c` with `‖v‖ ≥ c ‖v‖_∞`.
    pub fn linf_lower_constant(&self) -> f64 {
        match self {
            NormKind::Gauge(b) => b.linf_lower_constant(),
            _ => 1.0,
        }
    }

    /// Covering radius `sup_z inf_{v ∈ Z^d} ‖v − z‖`, attained at the
    /// centers of the unit cubes for the lp norms and bounded by the
    /// largest corner of the half cube for a gauge.
    pub fn covering_radius(&self, dim: usize) -> f64 {
        match self {
            NormKind::L1 => dim as f64 / 2.0,
            NormKind::L2 => (dim as f64).sqrt() / 2.0,
            NormKind::Linf => 0.5,
            NormKind::Gauge(b) => (0..1usize << dim)
                .map(|mask| {
                    let v: Vec<f64> = (0..dim).map(|i| if mask >> i & 1 == 1 { 0.5 } else { -0.5 }).collect();
                    b.gauge(&v)
                })
                .fold(0.0, f64::max),
        }
    }
}

/// A norm restricted to the lattice, `δ(x, y) = ‖x − y‖`.
#[derive(Clone, Debug)]
pub struct NormOracle {
    lattice: Arc<CayleyLattice>,
    norm: NormKind,
}

impl NormOracle {
    pub fn new(lattice: Arc<CayleyLattice>, norm: NormKind) -> Self {
        NormOracle { lattice, norm }
    }

    pub fn norm(&self) -> &NormKind {
        &self.norm
    }

    pub fn norm_of(&self, v: &Point) -> f64 {
        self.norm.eval(&v.to_f64())
    }
}

impl MetricOracle for NormOracle {
    fn lattice(&self) -> &CayleyLattice {
        &self.lattice
    }

    fn is_exact(&self) -> bool {
        true
    }

    fn distances_from(&self, x: &Point, targets: &[Point]) -> Result<Vec<Measured>> {
        targets.iter().map(|t| Ok(Measured::exact(self.norm_of(&t.checked_sub(x)?)))).collect()
    }

    fn upper_lipschitz(&self) -> f64 {
        self.lattice.generators().iter().map(|g| self.norm_of(g)).fold(0.0, f64::max)
    }

    fn lower_lipschitz(&self) -> f64 {
        // word(v) ≤ d · max_i word(e_i) · ‖v‖_∞ ≤ d · max_i word(e_i) · ‖v‖ / c.
        let d = self.lattice.dim();
        let w = (0..d).map(|i| self.lattice.word_norm(&Point::unit(d, i))).max().unwrap_or(1) as f64;
        self.norm.linf_lower_constant() / (d as f64 * w)
    }
}

/// `{x : δ(o, x) ≤ r}` together with the distances on the surrounding word
/// ball that was scanned to find it.
#[derive(Clone, Debug)]
pub struct MetricBall {
    pub center: Point,
    pub radius: f64,
    pub inside: PointCloud,
    /// Every scanned point with its distance from the center, sorted by
    /// point.
    pub region: Vec<(Point, Measured)>,
    pub region_radius: u64,
}

/// Scans the word ball of radius `⌈r / a⌉ + margin` (with `δ ≥ a·d`),
/// which contains the whole δ-ball.
pub fn metric_ball(oracle: &dyn MetricOracle, o: &Point, r: f64, margin: u64, budget: usize) -> Result<MetricBall> {
    if !(r >= 0.0) {
        return Err(FppError::DomainError(format!("negative radius {r}")));
    }
    let a = oracle.lower_lipschitz();
    if !(a > 0.0) {
        return Err(FppError::Unsupported("ball scan needs a positive lower Lipschitz constant".into()));
    }
    let region_radius = (r / a).floor() as u64 + margin;
    let region = oracle.lattice().word_ball(o, region_radius, budget)?;
    let dist = oracle.distances_from(o, region.points())?;
    let inside: Vec<Point> =
        region.points().iter().zip(&dist).filter(|(_, d)| d.value <= r).map(|(p, _)| *p).collect();
    Ok(MetricBall {
        center: *o,
        radius: r,
        inside: PointCloud::from_points(o.dim(), inside),
        region: region.points().iter().copied().zip(dist).collect(),
        region_radius,
    })
}

/// `N(α) = c α^u (log α)^v` above a threshold `α₀`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SagProfile {
    pub c: f64,
    pub u: f64,
    pub v: f64,
    pub alpha0: f64,
}

impl SagProfile {
    pub const DEFAULT_ALPHA0: f64 = 8.0;

    /// `N(α) = c (α / log α)^{1/2}`.
    pub fn average_metric(c: f64) -> Self {
        SagProfile { c, u: 0.5, v: -0.5, alpha0: Self::DEFAULT_ALPHA0 }
    }

    pub fn with_alpha0(mut self, alpha0: f64) -> Self {
        self.alpha0 = alpha0;
        self
    }

    pub fn n(&self, alpha: f64) -> f64 {
        self.c * alpha.powf(self.u) * alpha.ln().powf(self.v)
    }

    /// Checks that `N` is positive and increasing on a log grid above `α₀`.
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.u > 0.0 && self.alpha0 > 1.0) {
            return Err(FppError::DomainError("profile needs c > 0, u > 0 and alpha0 > 1".into()));
        }
        let mut prev = 0.0;
        for k in 0..200 {
            let a = self.alpha0 * (1.0 + k as f64 * 0.1).exp2();
            let n = self.n(a);
            if !(n > prev) {
                return Err(FppError::DomainError(format!("N is not increasing near alpha = {a}")));
            }
            prev = n;
        }
        Ok(())
    }
}

/// Lattice point nearest to `x + λ (y − x)`, rounding halves away from
/// zero.
pub fn rounded_interpolation(x: &Point, y: &Point, lambda: f64) -> Point {
    let c: Vec<i64> = (0..x.dim())
        .map(|i| {
            let (a, b) = (x.get(i) as f64, y.get(i) as f64);
            (a + lambda * (b - a)).round() as i64
        })
        .collect();
    Point::from_slice(&c)
}

fn interpolation_offset2(x: &Point, y: &Point, lambda: f64, z: &Point) -> f64 {
    (0..x.dim())
        .map(|i| {
            let (a, b) = (x.get(i) as f64, y.get(i) as f64);
            let t = a + lambda * (b - a);
            (z.get(i) as f64 - t).powi(2)
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SagStarResult {
    pub x: Point,
    pub y: Point,
    pub lambda: f64,
    pub z: Point,
    pub distance_xy: Measured,
    /// `max(|δ(x,z) − λ δ(x,y)|, |δ(z,y) − (1−λ) δ(x,y)|)`.
    pub defect: Measured,
    /// `defect / δ(x, y)`.
    pub eps: f64,
    pub eps_stderr: f64,
    pub candidates: usize,
}

/// Best λ-point in the word ball of radius `search_radius` around the
/// rounded interpolation point. Ties go to the candidate closest to the
/// straight segment, then to the lexicographically smallest one.
pub fn sagstar_deficiency(
    oracle: &dyn MetricOracle,
    x: &Point,
    y: &Point,
    lambda: f64,
    search_radius: i64,
    budget: usize,
) -> Result<SagStarResult> {
    if search_radius < 0 {
        return Err(FppError::EmptySearchRegion(search_radius));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(FppError::DomainError(format!("lambda = {lambda} outside [0, 1]")));
    }
    let center = rounded_interpolation(x, y, lambda);
    let cands = oracle.lattice().word_ball(&center, search_radius as u64, budget)?;
    let mut from_x_targets = cands.points().to_vec();
    from_x_targets.push(*y);
    let dx = oracle.distances_from(x, &from_x_targets)?;
    let dxy = dx[dx.len() - 1];
    if !(dxy.value > 0.0) {
        return Err(FppError::DomainError(format!("δ({x}, {y}) = {} is not positive", dxy.value)));
    }
    let dy = oracle.distances_from(y, cands.points())?;
    let mut best: Option<(f64, f64, usize)> = None;
    for (k, z) in cands.points().iter().enumerate() {
        let s = (dx[k].value - lambda * dxy.value).abs().max((dy[k].value - (1.0 - lambda) * dxy.value).abs());
        let off = interpolation_offset2(x, y, lambda, z);
        let better = match best {
            None => true,
            Some((bs, bo, _)) => s < bs || (s == bs && off < bo),
        };
        if better {
            best = Some((s, off, k));
        }
    }
    let (score, _, k) = best.expect("search region contains its center");
    let ex = (dx[k].value - lambda * dxy.value).abs();
    let ey = (dy[k].value - (1.0 - lambda) * dxy.value).abs();
    let se = if ex >= ey {
        dx[k].stderr.hypot(lambda * dxy.stderr)
    } else {
        dy[k].stderr.hypot((1.0 - lambda) * dxy.stderr)
    };
    Ok(SagStarResult {
        x: *x,
        y: *y,
        lambda,
        z: cands.points()[k],
        distance_xy: dxy,
        defect: Measured { value: score, stderr: se },
        eps: score / dxy.value,
        eps_stderr: se / dxy.value,
        candidates: cands.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSagStar {
    pub x: Point,
    pub y: Point,
    pub lambda: f64,
    /// Waypoint on the ω-geodesic of each construction replica.
    pub waypoints: Vec<Point>,
    pub best_z: Point,
    pub distance_xy: Measured,
    pub dist_xz: Measured,
    pub dist_zy: Measured,
    /// Deficiency of `best_z` relative to `d̄(x, y)`.
    pub eps: f64,
    pub eps_stderr: f64,
    /// `⌈32 b d(x, y) / a⌉`, the ball that must contain every waypoint.
    pub region_radius: u64,
    pub eval_replicas: usize,
}

/// Near-λ-points for the average distance built from ω-geodesics.
///
/// Pass one takes the ω-geodesic from `x` to `y` in each replica of
/// `construct` and records its λ-waypoint. Pass two evaluates every
/// distinct waypoint on an independent seed stream with `eval_replicas`
/// replicas, using the same replicas for `d̄(x, z)`, `d̄(z, y)` and
/// `d̄(x, y)` so the deficiency is estimated from paired differences.
/// The reported point is the one with the smallest estimated deficiency.
pub fn empirical_sagstar_via_geodesics(
    construct: &Ensemble,
    x: &Point,
    y: &Point,
    lambda: f64,
    eval_replicas: usize,
) -> Result<EmpiricalSagStar> {
    use rayon::prelude::*;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(FppError::DomainError(format!("lambda = {lambda} outside [0, 1]")));
    }
    if eval_replicas < 2 {
        return Err(FppError::DomainError("need at least 2 evaluation replicas".into()));
    }
    let waypoints: Vec<Point> = (0..construct.replicas)
        .into_par_iter()
        .map(|i| {
            let f = construct.field(i);
            let (_, path) = omega_distance(&f, x, y, &construct.limits)?;
            Ok(geodesic_waypoint(&path, lambda)?.0)
        })
        .collect::<Result<_>>()?;
    let mut cands = waypoints.clone();
    cands.sort();
    cands.dedup();
    let d = construct.lattice.graph_distance(x, y) as f64;
    let (a, b) = (construct.law.ess_inf(), construct.law.mean());
    let region_radius = if a > 0.0 { (32.0 * b * d / a).ceil() as u64 } else { u64::MAX };
    for z in &cands {
        let rz = construct.lattice.graph_distance(x, z);
        if rz > region_radius {
            return Err(FppError::Degenerate(format!("waypoint {z} escaped the ball of radius {region_radius}")));
        }
    }
    let eval = Ensemble {
        base_seed: mix64(construct.base_seed, &[0x5a65_7661_6c00]),
        replicas: eval_replicas,
        ..construct.clone()
    };
    let mut tx = cands.clone();
    tx.push(*y);
    let from_x = eval.replica_distances(x, &tx)?;
    let from_y = eval.replica_distances(y, &cands)?;
    let n = cands.len();
    let dxy: Vec<f64> = from_x.iter().map(|r| r[n]).collect();
    let dxy_m = mean_and_stderr(&dxy);
    let mut best: Option<(f64, f64, usize, Measured, Measured)> = None;
    for k in 0..n {
        let ta: Vec<f64> = from_x.iter().map(|r| r[k] - lambda * r[n]).collect();
        let tb: Vec<f64> = from_y.iter().zip(&from_x).map(|(ry, rx)| ry[k] - (1.0 - lambda) * rx[n]).collect();
        let ma = mean_and_stderr(&ta);
        let mb = mean_and_stderr(&tb);
        let (score, se) = if ma.value.abs() >= mb.value.abs() {
            (ma.value.abs(), ma.stderr)
        } else {
            (mb.value.abs(), mb.stderr)
        };
        if best.as_ref().map_or(true, |bst| score < bst.0) {
            best = Some((score, se, k, ma, mb));
        }
    }
    let (score, se, k, _, _) = best.expect("at least one waypoint");
    let xz = mean_and_stderr(&from_x.iter().map(|r| r[k]).collect::<Vec<_>>());
    let zy = mean_and_stderr(&from_y.iter().map(|r| r[k]).collect::<Vec<_>>());
    Ok(EmpiricalSagStar {
        x: *x,
        y: *y,
        lambda,
        waypoints,
        best_z: cands[k],
        distance_xy: dxy_m,
        dist_xz: xz,
        dist_zy: zy,
        eps: score / dxy_m.value,
        eps_stderr: se / dxy_m.value,
        region_radius,
        eval_replicas,
    })
}

/// Segment-length extremes after one level of dyadic refinement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelStat {
    pub level: u32,
    /// Longest segment `r_k`.
    pub r_max: f64,
    /// Shortest segment `r'_k`.
    pub r_min: f64,
    /// `A_k = 2^k r_k / r_0`.
    pub a_upper: f64,
    /// `2^{-k} r_0 / r'_k`.
    pub a_lower: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubdivisionResult {
    pub points: Vec<Point>,
    pub step_distances: Vec<Measured>,
    pub distance_xy: Measured,
    /// `max_i |δ(x_i, x_{i+1}) m / δ(x, y) − 1|`.
    pub deficiency: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<LevelStat>,
    /// Smallest `A` with `A⁻¹ 2^{-k} r_0 ≤ r'_k ≤ r_k ≤ A 2^{-k} r_0` on
    /// every level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_bound: Option<f64>,
    /// Smallest `C ≥ 0` with `A_k ≤ A_{k−1} (1 + C 2^{−k/3})` on every
    /// level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_law_constant: Option<f64>,
}

impl SubdivisionResult {
    fn assemble(
        oracle: &dyn MetricOracle,
        points: Vec<Point>,
        distance_xy: Option<Measured>,
    ) -> Result<SubdivisionResult> {
        let step_distances = points
            .windows(2)
            .map(|w| oracle.distance(&w[0], &w[1]))
            .collect::<Result<Vec<_>>>()?;
        let distance_xy = match distance_xy {
            Some(d) => d,
            None => oracle.distance(&points[0], points.last().expect("nonempty"))?,
        };
        let deficiency = deficiency_of(&step_distances, distance_xy.value);
        Ok(SubdivisionResult {
            points,
            step_distances,
            distance_xy,
            deficiency,
            levels: vec![],
            ratio_bound: None,
            ratio_law_constant: None,
        })
    }

    pub fn parts(&self) -> usize {
        self.points.len() - 1
    }
}

/// `max_i |s_i · m / total − 1|`.
pub fn deficiency_of(steps: &[Measured], total: f64) -> f64 {
    let m = steps.len() as f64;
    steps.iter().map(|s| (s.value * m / total - 1.0).abs()).fold(0.0, f64::max)
}

fn check_threshold(value: f64, alpha0: f64) -> Result<()> {
    if value < alpha0 {
        return Err(FppError::ThresholdViolation { value, alpha0 });
    }
    Ok(())
}

fn dyadic_points(
    oracle: &dyn MetricOracle,
    x: &Point,
    y: &Point,
    k: u32,
    search_radius: i64,
    budget: usize,
    r0: f64,
) -> Result<(Vec<Point>, Vec<LevelStat>)> {
    let mut pts = vec![*x, *y];
    let mut levels = vec![];
    for level in 1..=k {
        let mut next = Vec::with_capacity(2 * pts.len() - 1);
        let mut seg = vec![];
        for w in pts.windows(2) {
            let s = sagstar_deficiency(oracle, &w[0], &w[1], 0.5, search_radius, budget)?;
            next.push(w[0]);
            next.push(s.z);
            seg.push(oracle.distance(&w[0], &s.z)?.value);
            seg.push(oracle.distance(&s.z, &w[1])?.value);
        }
        next.push(*y);
        pts = next;
        let r_max = seg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let r_min = seg.iter().copied().fold(f64::INFINITY, f64::min);
        let scale = (level as f64).exp2();
        levels.push(LevelStat { level, r_max, r_min, a_upper: scale * r_max / r0, a_lower: r0 / (scale * r_min) });
    }
    Ok((pts, levels))
}

/// `2^k + 1` points from `x` to `y` by repeated near-midpoints.
pub fn dyadic_subdivision(
    oracle: &dyn MetricOracle,
    x: &Point,
    y: &Point,
    k: u32,
    search_radius: i64,
    alpha0: f64,
    budget: usize,
) -> Result<SubdivisionResult> {
    let dxy = oracle.distance(x, y)?;
    check_threshold(dxy.value / (k as f64).exp2(), alpha0)?;
    let (pts, levels) = dyadic_points(oracle, x, y, k, search_radius, budget, dxy.value)?;
    let mut out = SubdivisionResult::assemble(oracle, pts, Some(dxy))?;
    if !levels.is_empty() {
        out.ratio_bound = Some(levels.iter().map(|l| l.a_upper.max(l.a_lower)).fold(1.0, f64::max));
        let mut c: f64 = 0.0;
        let mut prev = 1.0;
        for l in &levels {
            c = c.max((l.a_upper / prev - 1.0) * (l.level as f64 / 3.0).exp2());
            prev = l.a_upper;
        }
        out.ratio_law_constant = Some(c);
    }
    out.levels = levels;
    Ok(out)
}

/// Dyadic bracket `[lo, hi]` (in units of `2^{-k}`) around `λ = i/m` with
/// `λ = lo + t (hi − lo)`, `1/3 ≤ t ≤ 2/3`, or the exact grid index when
/// `λ` is on the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bracket {
    OnGrid(u64),
    Between { lo: u64, hi: u64 },
}

pub fn dyadic_bracket(i: u64, m: u64, k: u32) -> Bracket {
    let num = i << k;
    let j = num / m;
    let rem = num % m;
    if rem == 0 {
        Bracket::OnGrid(j)
    } else if 3 * rem <= m {
        Bracket::Between { lo: j - 1, hi: j + 1 }
    } else if 3 * rem >= 2 * m {
        Bracket::Between { lo: j, hi: j + 2 }
    } else {
        Bracket::Between { lo: j, hi: j + 1 }
    }
}

/// `m + 1` points from `x` to `y` with nearly equal steps: a dyadic
/// sequence with `4m ≤ 2^k < 8m` followed by one near-λ-point query per
/// interior point, on a dyadic bracket placing `i/m` in its middle third.
pub fn sag_sequence(
    oracle: &dyn MetricOracle,
    x: &Point,
    y: &Point,
    m: u64,
    search_radius: i64,
    alpha0: f64,
    budget: usize,
) -> Result<SubdivisionResult> {
    if m == 0 {
        return Err(FppError::DomainError("m must be positive".into()));
    }
    let dxy = oracle.distance(x, y)?;
    check_threshold(dxy.value / m as f64, alpha0)?;
    if m == 1 {
        return SubdivisionResult::assemble(oracle, vec![*x, *y], Some(dxy));
    }
    if m.is_power_of_two() {
        return dyadic_subdivision(oracle, x, y, m.trailing_zeros(), search_radius, alpha0, budget);
    }
    let k_start = (4 * m).next_power_of_two().trailing_zeros();
    let mut last_err = None;
    for k in (1..=k_start).rev() {
        match sag_sequence_at(oracle, x, y, m, k, search_radius, budget, dxy) {
            Ok(r) => return Ok(r),
            Err(e @ FppError::ResourceLimit(_)) => return Err(e),
            Err(e) => {
                log::warn!("sag_sequence with 2^{k} dyadic parts failed ({e}); halving");
                last_err = Some(e);
            }
        }
    }
    Err(last_err.expect("at least one attempt"))
}

#[allow(clippy::too_many_arguments)]
fn sag_sequence_at(
    oracle: &dyn MetricOracle,
    x: &Point,
    y: &Point,
    m: u64,
    k: u32,
    search_radius: i64,
    budget: usize,
    dxy: Measured,
) -> Result<SubdivisionResult> {
    let (grid, _) = dyadic_points(oracle, x, y, k, search_radius, budget, dxy.value)?;
    let h = 1u64 << k;
    let mut pts = vec![*x];
    for i in 1..m {
        match dyadic_bracket(i, m, k) {
            Bracket::OnGrid(j) => pts.push(grid[j as usize]),
            Bracket::Between { lo, hi } => {
                if hi > h {
                    return Err(FppError::Degenerate(format!("bracket [{lo}, {hi}] leaves the grid")));
                }
                let t = (i as f64 / m as f64 - lo as f64 / h as f64) * h as f64 / (hi - lo) as f64;
                let s = sagstar_deficiency(oracle, &grid[lo as usize], &grid[hi as usize], t, search_radius, budget)?;
                pts.push(s.z);
            }
        }
    }
    pts.push(*y);
    SubdivisionResult::assemble(oracle, pts, Some(dxy))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Holds,
    Fails,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCheck {
    pub status: CheckStatus,
    pub radius: f64,
    pub n: f64,
    /// `6 r / N(r)`.
    pub allowed: f64,
    /// Largest `G · w(y)` over the enlarged ball, with `w(y)` the word
    /// distance from `y` to the smaller ball.
    pub worst_defect: f64,
    pub inner_points: usize,
    pub outer_points: usize,
}

/// Checks `B(o, (1 + 1/N(r)) r) ⊂ [B(o, r)]_{6r/N(r)}`, measuring the
/// neighborhood in the word metric scaled by the oracle's upper Lipschitz
/// constant.
pub fn monotone_ball_check(
    oracle: &dyn MetricOracle,
    o: &Point,
    r: f64,
    profile: &SagProfile,
    budget: usize,
) -> Result<MonotoneCheck> {
    let skipped = |n: f64| MonotoneCheck {
        status: CheckStatus::Skipped,
        radius: r,
        n,
        allowed: f64::NAN,
        worst_defect: f64::NAN,
        inner_points: 0,
        outer_points: 0,
    };
    if r < profile.alpha0 {
        return Ok(skipped(f64::NAN));
    }
    let n = profile.n(r);
    let outer_r = (1.0 + 1.0 / n) * r;
    let outer = metric_ball(oracle, o, outer_r, 0, budget)?;
    let inner = PointCloud::from_points(
        o.dim(),
        outer.region.iter().filter(|(_, d)| d.value <= r).map(|(p, _)| *p).collect(),
    );
    if inner.is_empty() {
        return Err(FppError::Degenerate("inner ball is empty".into()));
    }
    let g = oracle.upper_lipschitz();
    let allowed = 6.0 * r / n;
    let reach = (allowed / g).floor() as u64 + 1;
    let field = oracle.lattice().word_distance_field(inner.points(), reach, budget.saturating_mul(4))?;
    let mut worst: f64 = 0.0;
    for p in outer.inside.points() {
        let w = field.get(p).map_or(f64::INFINITY, |w| *w as f64);
        worst = worst.max(g * w);
    }
    let status = if worst <= allowed * (1.0 + 1e-12) { CheckStatus::Holds } else { CheckStatus::Fails };
    Ok(MonotoneCheck {
        status,
        radius: r,
        n,
        allowed,
        worst_defect: worst,
        inner_points: inner.len(),
        outer_points: outer.inside.len(),
    })
}

/// A sublinearly doubling rate: `φ(α) = (α / log α)^{1/2}` for `α ≥ e²`,
/// extended continuously by its value at `e²` below, together with a
/// doubling modulus `η(λ) = max(1, λ)^{1/2}` (`φ(λ r) ≤ η(λ) φ(r)`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingProfile {
    pub exponent: f64,
    pub log_exponent: f64,
}

impl Default for DoublingProfile {
    fn default() -> Self {
        DoublingProfile { exponent: 0.5, log_exponent: -0.5 }
    }
}

impl DoublingProfile {
    fn knee(&self) -> f64 {
        // Below this point α^u (log α)^v is not increasing when v < 0.
        if self.log_exponent < 0.0 {
            (-self.log_exponent / self.exponent).exp().max(std::f64::consts::E)
        } else {
            std::f64::consts::E
        }
    }

    pub fn phi(&self, alpha: f64) -> f64 {
        let a = alpha.max(self.knee());
        let raw = a.powf(self.exponent) * a.ln().powf(self.log_exponent);
        let k = self.knee();
        let base = k.powf(self.exponent) * k.ln().powf(self.log_exponent);
        raw / base
    }

    pub fn eta(&self, lambda: f64) -> f64 {
        lambda.max(1.0).powf(self.exponent.max(0.0) + self.log_exponent.max(0.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentRounding {
    pub result: SubdivisionResult,
    /// `‖y − x‖ / m`.
    pub alpha: f64,
    pub covering_radius: f64,
    pub lower_factor: f64,
    pub upper_factor: f64,
    pub sandwich_holds: bool,
    /// Largest `‖x_i − z_i‖`.
    pub max_rounding: f64,
}

/// Rounds the equally spaced points `z_i = x + i (y − x) / m` of the
/// straight segment to the lattice and checks
/// `(1 − 4C/φ(α)) δ(x,y)/m ≤ δ(x_i, x_{i+1}) ≤ (1 + 5C/φ(α)) δ(x,y)/m`.
pub fn segment_rounding_sequence(
    oracle: &NormOracle,
    x: &Point,
    y: &Point,
    m: u64,
    phi: &DoublingProfile,
    c: f64,
) -> Result<SegmentRounding> {
    if m == 0 {
        return Err(FppError::DomainError("m must be positive".into()));
    }
    let dim = x.dim();
    let len = oracle.norm_of(&y.checked_sub(x)?);
    let alpha = len / m as f64;
    let k = oracle.norm().covering_radius(dim);
    let rate = c / phi.phi(alpha);
    if 2.0 * k / alpha > rate {
        return Err(FppError::ThresholdViolation { value: alpha, alpha0: 2.0 * k / rate });
    }
    let mut pts = vec![*x];
    let mut max_rounding: f64 = 0.0;
    for i in 1..m {
        let z: Vec<f64> = (0..dim)
            .map(|a| x.get(a) as f64 + (i as f64) * (y.get(a) - x.get(a)) as f64 / m as f64)
            .collect();
        let p = Point::from_slice(&z.iter().map(|v| v.round() as i64).collect::<Vec<_>>());
        let diff: Vec<f64> = (0..dim).map(|a| p.get(a) as f64 - z[a]).collect();
        let rnd = oracle.norm().eval(&diff);
        debug_assert!(rnd <= k + 1e-12);
        max_rounding = max_rounding.max(rnd);
        pts.push(p);
    }
    pts.push(*y);
    let result = SubdivisionResult::assemble(oracle, pts, None)?;
    let lower_factor = 1.0 - 4.0 * rate;
    let upper_factor = 1.0 + 5.0 * rate;
    let unit = result.distance_xy.value / m as f64;
    let sandwich_holds = result
        .step_distances
        .iter()
        .all(|s| s.value >= lower_factor * unit - 1e-12 && s.value <= upper_factor * unit + 1e-12);
    Ok(SegmentRounding { result, alpha, covering_radius: k, lower_factor, upper_factor, sandwich_holds, max_rounding })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightLaw;

    fn p(c: &[i64]) -> Point {
        Point::from_slice(c)
    }

    fn word2() -> WordOracle {
        WordOracle::new(Arc::new(CayleyLattice::standard(2)))
    }

    #[test]
    fn sagstar_examples() {
        let w = word2();
        let r = sagstar_deficiency(&w, &p(&[0, 0]), &p(&[4, 0]), 0.5, 3, 1000).unwrap();
        assert_eq!((r.z, r.eps), (p(&[2, 0]), 0.0));
        let r = sagstar_deficiency(&w, &p(&[0, 0]), &p(&[3, 0]), 0.5, 3, 1000).unwrap();
        assert!((r.eps - 1.0 / 6.0).abs() < 1e-15);
        let r = sagstar_deficiency(&w, &p(&[0, 0]), &p(&[5, 2]), 0.0, 3, 1000).unwrap();
        assert_eq!((r.z, r.eps), (p(&[0, 0]), 0.0));
        assert!(matches!(
            sagstar_deficiency(&w, &p(&[0, 0]), &p(&[5, 2]), 0.5, -1, 1000),
            Err(FppError::EmptySearchRegion(-1))
        ));
    }

    #[test]
    fn sagstar_is_exact_over_its_region() {
        let w = word2();
        for (x, y) in [([0, 0], [7, 3]), ([1, -2], [-6, 5]), ([0, 0], [0, 11])] {
            for lam in [0.125, 0.25, 0.375, 0.5, 0.875] {
                let (x, y) = (p(&x), p(&y));
                let r = sagstar_deficiency(&w, &x, &y, lam, 2, 1000).unwrap();
                let c = rounded_interpolation(&x, &y, lam);
                let dxy = w.lattice().graph_distance(&x, &y) as f64;
                let mut best = f64::INFINITY;
                for z in w.lattice().word_ball(&c, 2, 1000).unwrap().points() {
                    let s = (w.lattice().graph_distance(&x, z) as f64 - lam * dxy)
                        .abs()
                        .max((w.lattice().graph_distance(z, &y) as f64 - (1.0 - lam) * dxy).abs());
                    best = best.min(s);
                }
                assert_eq!(r.defect.value, best);
                let back = sagstar_deficiency(&w, &y, &x, 1.0 - lam, 2, 1000).unwrap();
                assert_eq!(back.eps, r.eps);
            }
        }
    }

    #[test]
    fn dyadic_examples() {
        let z1 = WordOracle::new(Arc::new(CayleyLattice::standard(1)));
        let r = dyadic_subdivision(&z1, &p(&[0]), &p(&[8]), 3, 3, 1.0, 1000).unwrap();
        assert_eq!(r.points, (0..=8).map(|i| p(&[i])).collect::<Vec<_>>());
        assert_eq!(r.deficiency, 0.0);
        assert_eq!(r.ratio_bound, Some(1.0));
        let r = dyadic_subdivision(&z1, &p(&[0]), &p(&[8]), 0, 3, 1.0, 1000).unwrap();
        assert_eq!(r.points, vec![p(&[0]), p(&[8])]);
        assert_eq!(r.deficiency, 0.0);
        assert!(matches!(
            dyadic_subdivision(&z1, &p(&[0]), &p(&[8]), 3, 3, 8.0, 1000),
            Err(FppError::ThresholdViolation { .. })
        ));
    }

    #[test]
    fn brackets_place_lambda_in_the_middle_third() {
        for m in 2..40u64 {
            let k = (4 * m).next_power_of_two().trailing_zeros();
            let h = 1u64 << k;
            for i in 1..m {
                let lam = i as f64 / m as f64;
                match dyadic_bracket(i, m, k) {
                    Bracket::OnGrid(j) => assert_eq!(j * m, i * h),
                    Bracket::Between { lo, hi } => {
                        assert!(hi <= h);
                        let t = (lam - lo as f64 / h as f64) * h as f64 / (hi - lo) as f64;
                        assert!((1.0 / 3.0 - 1e-12..=2.0 / 3.0 + 1e-12).contains(&t), "m={m} i={i} t={t}");
                    }
                }
            }
        }
    }

    #[test]
    fn sag_sequence_examples() {
        let w = word2();
        let r = sag_sequence(&w, &p(&[0, 0]), &p(&[5, 1]), 1, 3, 1.0, 1000).unwrap();
        assert_eq!(r.points, vec![p(&[0, 0]), p(&[5, 1])]);
        let a = sag_sequence(&w, &p(&[0, 0]), &p(&[16, 4]), 4, 3, 1.0, 1000).unwrap();
        let b = dyadic_subdivision(&w, &p(&[0, 0]), &p(&[16, 4]), 2, 3, 1.0, 1000).unwrap();
        assert_eq!(a.points, b.points);
        let r = sag_sequence(&w, &p(&[0, 0]), &p(&[12, 0]), 3, 3, 1.0, 1000).unwrap();
        assert_eq!(r.points, vec![p(&[0, 0]), p(&[4, 0]), p(&[8, 0]), p(&[12, 0])]);
        assert_eq!(r.deficiency, 0.0);
    }

    #[test]
    fn monotone_check_examples() {
        let w = word2();
        let prof = SagProfile::average_metric(1.0);
        for r in [8.0, 13.0, 20.0] {
            let c = monotone_ball_check(&w, &p(&[0, 0]), r, &prof, 100_000).unwrap();
            assert_eq!(c.status, CheckStatus::Holds);
        }
        let c = monotone_ball_check(&w, &p(&[0, 0]), 4.0, &prof, 100_000).unwrap();
        assert_eq!(c.status, CheckStatus::Skipped);
    }

    #[test]
    fn segment_rounding_examples() {
        let l1 = NormOracle::new(Arc::new(CayleyLattice::standard(2)), NormKind::L1);
        let phi = DoublingProfile::default();
        let r = segment_rounding_sequence(&l1, &p(&[0, 0]), &p(&[8, 0]), 4, &phi, 1.0).unwrap();
        assert_eq!(r.result.points, vec![p(&[0, 0]), p(&[2, 0]), p(&[4, 0]), p(&[6, 0]), p(&[8, 0])]);
        assert_eq!(r.max_rounding, 0.0);
        let r = segment_rounding_sequence(&l1, &p(&[0, 0]), &p(&[7, 3]), 1, &phi, 1.0).unwrap();
        assert_eq!(r.result.points, vec![p(&[0, 0]), p(&[7, 3])]);
        let r = segment_rounding_sequence(&l1, &p(&[0, 0]), &p(&[7, 3]), 3, &phi, 2.0).unwrap();
        let linf = NormKind::Linf;
        for (i, q) in r.result.points.iter().enumerate() {
            let z = [7.0 * i as f64 / 3.0, 3.0 * i as f64 / 3.0];
            assert!(linf.eval(&[q.get(0) as f64 - z[0], q.get(1) as f64 - z[1]]) <= 1.0);
        }
        assert!(r.sandwich_holds);
        assert!(matches!(
            segment_rounding_sequence(&l1, &p(&[0, 0]), &p(&[3, 0]), 3, &phi, 0.1),
            Err(FppError::ThresholdViolation { .. })
        ));
    }

    #[test]
    fn covering_radii() {
        assert_eq!(NormKind::L1.covering_radius(2), 1.0);
        assert_eq!(NormKind::Linf.covering_radius(3), 0.5);
        assert!((NormKind::L2.covering_radius(2) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn profiles() {
        let prof = SagProfile::average_metric(0.7);
        prof.validate().unwrap();
        assert!((prof.n(16.0) - 0.7 * (16.0 / 16f64.ln()).sqrt()).abs() < 1e-12);
        let phi = DoublingProfile::default();
        let mut prev = 0.0;
        for k in 0..400 {
            let r = 1.0 + k as f64 * 0.5;
            let v = phi.phi(r);
            assert!(v >= 1.0 && v >= prev);
            prev = v;
            for lam in [1.5, 2.0, 10.0, 100.0] {
                assert!(phi.phi(lam * r) <= phi.eta(lam) * v * (1.0 + 1e-12));
            }
        }
        for j in 1..30 {
            let lam = (j as f64).exp2();
            assert!(phi.eta(lam * 2.0) / (lam * 2.0) < phi.eta(lam) / lam);
        }
    }

    #[test]
    fn constant_law_geodesic_waypoints() {
        let ens = Ensemble::new(Arc::new(CayleyLattice::standard(2)), WeightLaw::constant(1.0), 3, 4).unwrap();
        let r = empirical_sagstar_via_geodesics(&ens, &p(&[0, 0]), &p(&[7, 2]), 0.5, 4).unwrap();
        assert!(r.eps <= 1.0 / 9.0 + 1e-12);
        assert_eq!(r.eps_stderr, 0.0);
        let r = empirical_sagstar_via_geodesics(&ens, &p(&[0, 0]), &p(&[7, 2]), 1.0, 4).unwrap();
        assert_eq!((r.best_z, r.eps), (p(&[7, 2]), 0.0));
    }

    #[test]
    fn average_oracle_budget() {
        let ens = Ensemble::new(Arc::new(CayleyLattice::standard(2)), WeightLaw::uniform(1.0, 2.0), 3, 10).unwrap();
        let o = AverageOracle::new(ens).with_budget(25);
        assert!(o.distance(&p(&[0, 0]), &p(&[2, 0])).is_ok());
        assert!(o.distance(&p(&[0, 0]), &p(&[2, 0])).is_ok());
        assert!(matches!(o.distance(&p(&[0, 0]), &p(&[2, 0])), Err(FppError::ResourceLimit(_))));
        assert_eq!(o.searches_spent(), 20);
    }
}
