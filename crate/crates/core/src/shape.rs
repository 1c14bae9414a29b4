//! Shapes of balls: the hull identity for sumsets, ball powers, the
//! convergence of rescaled balls and their distance to a limit norm ball.
//!
//! Distances come from a [`DistanceSource`]: any exact [`MetricOracle`],
//! or an ensemble of weight fields whose replica-averaged distance is the
//! metric and whose replicas are split into batches for error bars.

use serde::{Deserialize, Serialize};

use crate::average::{sample_std, Ensemble, Measured};
use crate::error::{FppError, Result};
use crate::geodesicity::{MetricOracle, NormKind};
use crate::geometry::{
    cloud_to_hull_linf, convex_hull, hausdorff_distance, hausdorff_scaled, minkowski_power, minkowski_sum,
    polygon_contains, polygon_to_cloud_linf, AuxNorm, DirectionSet, PointCloud, Polytope, SupportBody,
};
use crate::lattice::{CayleyLattice, Point};
use crate::scalar::Rational;

pub use crate::geodesicity::DoublingProfile;

/// Where ball distances come from.
#[derive(Clone, Copy)]
pub enum DistanceSource<'a> {
    Exact(&'a dyn MetricOracle),
    /// Replica average of an ensemble, with `batches` contiguous replica
    /// blocks used for batch-means error bars.
    Average { ensemble: &'a Ensemble, batches: usize },
}

impl<'a> DistanceSource<'a> {
    pub fn lattice(&self) -> &CayleyLattice {
        match self {
            DistanceSource::Exact(o) => o.lattice(),
            DistanceSource::Average { ensemble, .. } => &ensemble.lattice,
        }
    }

    fn lower_lipschitz(&self) -> f64 {
        match self {
            DistanceSource::Exact(o) => o.lower_lipschitz(),
            DistanceSource::Average { ensemble, .. } => ensemble.law.ess_inf(),
        }
    }

    /// Distances from `o` to every point of the word ball of radius
    /// `radius`.
    pub fn region(&self, o: &Point, radius: u64, budget: usize) -> Result<RegionDistances> {
        let points = self.lattice().word_ball(o, radius, budget)?.points().to_vec();
        match self {
            DistanceSource::Exact(oracle) => {
                let full = oracle.distances_from(o, &points)?.into_iter().map(|m| m.value).collect();
                Ok(RegionDistances { center: *o, radius, points, full, batches: vec![] })
            }
            DistanceSource::Average { ensemble, batches } => {
                // Replicas are summed in index order a few at a time, so
                // memory stays at a chunk of rows whatever the replica count.
                const CHUNK: usize = 16;
                let r = ensemble.replicas;
                let nb = if *batches >= 2 { (*batches).min(r) } else { 1 };
                let size = r / nb;
                let mut full = vec![0.0; points.len()];
                let mut batch_means = Vec::with_capacity(nb);
                let add_range = |lo: usize, hi: usize, acc: &mut Vec<f64>| -> Result<()> {
                    let mut i = lo;
                    while i < hi {
                        let j = (i + CHUNK).min(hi);
                        for row in ensemble.replica_distances_in(i..j, o, &points)? {
                            for (a, v) in acc.iter_mut().zip(&row) {
                                *a += v;
                            }
                        }
                        i = j;
                    }
                    Ok(())
                };
                for b in 0..nb {
                    let mut acc = vec![0.0; points.len()];
                    add_range(b * size, (b + 1) * size, &mut acc)?;
                    for (f, a) in full.iter_mut().zip(&acc) {
                        *f += a;
                    }
                    batch_means.push(acc.iter().map(|a| a / size as f64).collect::<Vec<_>>());
                }
                add_range(nb * size, r, &mut full)?;
                let full = full.iter().map(|a| a / r as f64).collect();
                let batches = if nb >= 2 { batch_means } else { vec![] };
                Ok(RegionDistances { center: *o, radius, points, full, batches })
            }
        }
    }
}

/// Distances from a center to a scanned word ball, for the full metric and
/// for each replica batch.
#[derive(Clone, Debug)]
pub struct RegionDistances {
    pub center: Point,
    pub radius: u64,
    pub points: Vec<Point>,
    pub full: Vec<f64>,
    pub batches: Vec<Vec<f64>>,
}

impl RegionDistances {
    pub fn ball(&self, dist: &[f64], r: f64) -> PointCloud {
        let pts = self.points.iter().zip(dist).filter(|(_, d)| **d <= r).map(|(p, _)| *p).collect();
        PointCloud::from_points(self.center.dim(), pts)
    }

    /// Evaluates a statistic on the full metric and on every batch; the
    /// error is the batch standard deviation over `√batches`.
    pub fn measure<F>(&self, f: F) -> Result<Measured>
    where
        F: Fn(&[f64]) -> Result<f64>,
    {
        let value = f(&self.full)?;
        if self.batches.len() < 2 {
            return Ok(Measured::exact(value));
        }
        let b = self.batches.iter().map(|d| f(d)).collect::<Result<Vec<_>>>()?;
        Ok(Measured { value, stderr: sample_std(&b) / (b.len() as f64).sqrt() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HullIdentityReport {
    pub n: u32,
    pub dim: usize,
    /// `max_θ |n h_K(θ) − h_{K^{n−d}}(θ) − d h_K(θ)|`.
    pub support_max_diff: f64,
    pub support_identity: bool,
    /// Points of the `1/4` grid in `n K̂` that were checked to lie in
    /// `K^{n−d} + d K̂`.
    pub raster_points: usize,
    pub containment: bool,
    /// `d_H(Kⁿ, K̂ⁿ)` in L∞.
    pub lhs: f64,
    /// `d · d_H(K, K̂)` in L∞.
    pub rhs: f64,
    pub lhs_exact: String,
    pub rhs_exact: String,
    pub inequality: bool,
}

impl HullIdentityReport {
    pub fn passed(&self) -> bool {
        self.support_identity && self.containment && self.inequality
    }
}

fn embed_planar(k: &PointCloud) -> PointCloud {
    PointCloud::from_points(2, k.points().iter().map(|p| Point::from_slice(&[p.get(0), 0])).collect())
}

fn rational_string(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Checks `K̂ⁿ = K^{n−d} K̂^d` for a finite symmetric `K` in dimension at
/// most 2 (a line is embedded in the plane), together with the
/// consequence `d_H(Kⁿ, K̂ⁿ) ≤ d · d_H(K, K̂)` computed exactly in L∞.
///
/// Equality of support functions is immediate from additivity, so the
/// substantive check is the containment of `n K̂` in the union of
/// translates `p + d K̂`, `p ∈ K^{n−d}`, on a grid of step `1/4`.
pub fn hull_identity_check(k: &PointCloud, n: u32, budget: usize) -> Result<HullIdentityReport> {
    let d = k.dim();
    if k.is_empty() {
        return Err(FppError::Degenerate("empty set".into()));
    }
    if !k.is_symmetric() {
        return Err(FppError::DomainError("set must be symmetric".into()));
    }
    if (n as usize) < d {
        return Err(FppError::DomainError(format!("n = {n} below the dimension {d}")));
    }
    let planar = match d {
        1 => embed_planar(k),
        2 => k.clone(),
        _ => return Err(FppError::Unsupported("hull identity check beyond the plane".into())),
    };
    let dd = d as u32;
    let rest = minkowski_power(&planar, (n - dd).max(1), budget)?;
    let rest = if n == dd { PointCloud::singleton(Point::origin(2)) } else { rest };

    let dirs = DirectionSet::standard(2);
    let support_max_diff = dirs
        .directions()
        .iter()
        .map(|t| {
            let h = planar.support(t);
            (n as f64 * h - rest.support(t) - dd as f64 * h).abs()
        })
        .fold(0.0, f64::max);

    let hull_n = convex_hull(&planar.dilated(n as i64)?)?;
    let hull_d = convex_hull(&planar.dilated(dd as i64)?)?;
    let vn = hull_n.planar_vertices()?;
    let vd = hull_d.planar_vertices()?;
    let (dx_lo, dx_hi) = (vd.iter().map(|v| v[0]).min().unwrap(), vd.iter().map(|v| v[0]).max().unwrap());
    let (dy_lo, dy_hi) = (vd.iter().map(|v| v[1]).min().unwrap(), vd.iter().map(|v| v[1]).max().unwrap());
    let rest_pts: Vec<[i128; 2]> = rest.points().iter().map(|p| [p.get(0) as i128, p.get(1) as i128]).collect();
    let (xlo, xhi) = (vn.iter().map(|v| v[0]).min().unwrap(), vn.iter().map(|v| v[0]).max().unwrap());
    let (ylo, yhi) = (vn.iter().map(|v| v[1]).min().unwrap(), vn.iter().map(|v| v[1]).max().unwrap());
    let mut raster_points = 0;
    let mut containment = true;
    'grid: for gx in 4 * xlo..=4 * xhi {
        for gy in 4 * ylo..=4 * yhi {
            if !polygon_contains(&vn, [gx, gy], 4) {
                continue;
            }
            raster_points += 1;
            let covered = rest_pts.iter().any(|p| {
                let q = [gx - 4 * p[0], gy - 4 * p[1]];
                q[0] >= 4 * dx_lo
                    && q[0] <= 4 * dx_hi
                    && q[1] >= 4 * dy_lo
                    && q[1] <= 4 * dy_hi
                    && polygon_contains(&vd, q, 4)
            });
            if !covered {
                containment = false;
                break 'grid;
            }
        }
    }

    let kn = minkowski_power(&planar, n, budget)?;
    let lhs = polygon_to_cloud_linf(&hull_n, &kn)?;
    let rhs = cloud_to_hull_linf(&planar, &convex_hull(&planar)?)? * Rational::from_integer(d as i128);
    let f = |r: &Rational| *r.numer() as f64 / *r.denom() as f64;
    Ok(HullIdentityReport {
        n,
        dim: d,
        support_max_diff,
        support_identity: support_max_diff <= 1e-9,
        raster_points,
        containment,
        lhs: f(&lhs),
        rhs: f(&rhs),
        lhs_exact: rational_string(&lhs),
        rhs_exact: rational_string(&rhs),
        inequality: lhs <= rhs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub r: f64,
    pub m: u32,
    pub power_points: usize,
    pub ball_points: usize,
    /// `B(0, r/M)^M ⊂ B(0, r)`.
    pub left_inclusion: bool,
    /// `max δ(0, x) − r` over `x ∈ B(0, r/M)^M`.
    pub left_excess: f64,
    /// Smallest `ε ≥ 0` (over attained distances) with
    /// `B(0, r) ⊂ B(0, (1 + ε) r / M)^M`.
    pub eps_needed: f64,
    /// `d_H((1/r) B(0, r/M)^M, (1/r) B(0, r))` in L∞.
    pub defect: f64,
    /// `defect · φ(r/M)`, the constant the defect implies.
    pub implied_constant: f64,
}

/// Compares the ball of radius `r` with the `M`-fold sumset of the ball of
/// radius `r/M`.
pub fn ball_power_sandwich(
    oracle: &dyn MetricOracle,
    o: &Point,
    r: f64,
    m: u32,
    phi: &DoublingProfile,
    budget: usize,
) -> Result<SandwichReport> {
    if m == 0 || !(r > 0.0) {
        return Err(FppError::DomainError("need r > 0 and M ≥ 1".into()));
    }
    let a = oracle.lower_lipschitz();
    if !(a > 0.0) {
        return Err(FppError::Unsupported("ball scan needs a positive lower Lipschitz constant".into()));
    }
    let src = DistanceSource::Exact(oracle);
    let reg = src.region(o, (r / a).floor() as u64, budget)?;
    let centered = |c: &PointCloud| c.translated(&o.neg());
    let ball = centered(&reg.ball(&reg.full, r))?;
    let inner = centered(&reg.ball(&reg.full, r / m as f64))?;
    let power = minkowski_power(&inner, m, budget)?;
    let shifted: Vec<Point> = power.points().iter().map(|p| p.checked_add(o)).collect::<Result<_>>()?;
    let pd = oracle.distances_from(o, &shifted)?;
    let left_excess = pd.iter().map(|d| d.value - r).fold(f64::NEG_INFINITY, f64::max);
    let left_inclusion = power.is_subset_of(&ball);

    let mut cands: Vec<f64> = reg.full.iter().copied().filter(|d| *d >= r / m as f64 && *d <= r).collect();
    cands.push(r / m as f64);
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    let covers = |s: f64| -> Result<bool> {
        let b = centered(&reg.ball(&reg.full, s))?;
        Ok(ball.is_subset_of(&minkowski_power(&b, m, budget)?))
    };
    let (mut lo, mut hi) = (0usize, cands.len() - 1);
    if !covers(cands[hi])? {
        return Err(FppError::Degenerate("B(0, r) is not covered by the M-fold power of itself".into()));
    }
    while lo < hi {
        let mid = (lo + hi) / 2;
        if covers(cands[mid])? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let eps_needed = cands[lo] * m as f64 / r - 1.0;
    let defect = hausdorff_distance(&power, &ball, AuxNorm::Linf)? / r;
    Ok(SandwichReport {
        r,
        m,
        power_points: power.len(),
        ball_points: ball.len(),
        left_inclusion,
        left_excess,
        eps_needed,
        defect,
        implied_constant: defect * phi.phi(r / m as f64),
    })
}

/// `d_H((1/r1) B(o, r1), (1/r2) B(o, r2))` in the auxiliary norm.
pub fn cauchy_defect(
    src: &DistanceSource,
    o: &Point,
    r1: u64,
    r2: u64,
    norm: AuxNorm,
    budget: usize,
) -> Result<Measured> {
    if r1 == 0 || r2 == 0 {
        return Err(FppError::DomainError("radii must be positive".into()));
    }
    let a = src.lower_lipschitz();
    if !(a > 0.0) {
        return Err(FppError::Unsupported("ball scan needs a positive lower Lipschitz constant".into()));
    }
    let reg = src.region(o, (r1.max(r2) as f64 / a).floor() as u64, budget)?;
    cauchy_defect_in(&reg, r1, r2, norm)
}

/// Cauchy defect between two radii inside an already scanned region.
pub fn cauchy_defect_in(reg: &RegionDistances, r1: u64, r2: u64, norm: AuxNorm) -> Result<Measured> {
    let o = reg.center.neg();
    reg.measure(|dist| {
        let b1 = reg.ball(dist, r1 as f64).translated(&o)?;
        let b2 = reg.ball(dist, r2 as f64).translated(&o)?;
        hausdorff_scaled(&b1, r1 as i64, &b2, r2 as i64, norm)
    })
}

/// Support function of `(1/r) B(o, r)` on a direction set, symmetrized as
/// `(h(θ) + h(−θ)) / 2`.
pub fn limit_norm_estimate(
    src: &DistanceSource,
    o: &Point,
    r_max: u64,
    directions: &DirectionSet,
    budget: usize,
) -> Result<SupportBody> {
    let a = src.lower_lipschitz();
    if !(a > 0.0) {
        return Err(FppError::Unsupported("ball scan needs a positive lower Lipschitz constant".into()));
    }
    let reg = src.region(o, (r_max as f64 / a).floor() as u64, budget)?;
    limit_norm_in(&reg, r_max, directions)
}

fn limit_norm_in(reg: &RegionDistances, r_max: u64, directions: &DirectionSet) -> Result<SupportBody> {
    let ball = reg.ball(&reg.full, r_max as f64).translated(&reg.center.neg())?;
    let h = directions
        .directions()
        .iter()
        .map(|t| {
            let neg: Vec<f64> = t.iter().map(|x| -x).collect();
            (ball.support(t) + ball.support(&neg)) / (2.0 * r_max as f64)
        })
        .collect();
    SupportBody::new(directions.clone(), h)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeRow {
    pub n: u64,
    /// Smallest `δ` with `B(0, n) ⊂ B_‖·‖(0, n + δ)`.
    pub delta_out: Measured,
    /// Smallest `δ` with `B_‖·‖(0, n − δ) ∩ Z^d ⊂ B(0, n)`, up to the
    /// boundary: `n − min{‖x‖ : x ∉ B(0, n)}`, clamped at 0.
    pub delta_in: Measured,
    pub ball_points: usize,
    /// Cauchy defect against the previous radius.
    pub cauchy_to_previous: Option<Measured>,
}

impl ShapeRow {
    /// `max(δ_in, δ_out)` with the error of the larger side.
    pub fn delta(&self) -> Measured {
        if self.delta_out.value >= self.delta_in.value {
            self.delta_out
        } else {
            self.delta_in
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// `C` minimizing `Σ (δ − C √(n log n))²`.
    pub constant: f64,
    pub rms_residual: f64,
    /// Slope of `log δ` against `log n` over the positive defects.
    pub exploratory_exponent: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeSeries {
    pub rows: Vec<ShapeRow>,
    /// Radius of the ball the norm was estimated from, if it was.
    pub norm_radius: Option<u64>,
    pub region_radius: u64,
    pub fit_out: RateFit,
    pub fit_in: RateFit,
}

/// `√(n log n)`.
pub fn rate_scale(n: f64) -> f64 {
    (n * n.ln()).sqrt()
}

pub fn fit_rate(points: &[(f64, f64)]) -> RateFit {
    let s2: f64 = points.iter().map(|(n, _)| rate_scale(*n).powi(2)).sum();
    let sd: f64 = points.iter().map(|(n, d)| rate_scale(*n) * d).sum();
    let constant = if s2 > 0.0 { sd / s2 } else { 0.0 };
    let rms_residual = if points.is_empty() {
        0.0
    } else {
        (points.iter().map(|(n, d)| (d - constant * rate_scale(*n)).powi(2)).sum::<f64>() / points.len() as f64)
            .sqrt()
    };
    let pos: Vec<(f64, f64)> = points.iter().filter(|(_, d)| *d > 0.0).map(|(n, d)| (n.ln(), d.ln())).collect();
    let exploratory_exponent = (pos.len() >= 2).then(|| {
        let k = pos.len() as f64;
        let mx = pos.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pos.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pos.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pos.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    RateFit { constant, rms_residual, exploratory_exponent }
}

fn norm_lower_lipschitz(norm: &NormKind, lattice: &CayleyLattice) -> f64 {
    let d = lattice.dim();
    let w = (0..d).map(|i| lattice.word_norm(&Point::unit(d, i))).max().unwrap_or(1) as f64;
    norm.linf_lower_constant() / (d as f64 * w)
}

/// Norm the balls are compared with.
#[derive(Clone, Debug, PartialEq)]
pub enum ShapeNorm {
    Given(NormKind),
    /// Estimated from the ball of this radius on the same data.
    Estimated { radius: u64 },
}

impl ShapeNorm {
    pub const RADIUS_FACTOR: u64 = 8;

    /// Estimate from the ball of radius `RADIUS_FACTOR` times the largest
    /// one in the series.
    pub fn estimated_for(radii: &[u64]) -> ShapeNorm {
        ShapeNorm::Estimated { radius: Self::RADIUS_FACTOR * radii.iter().copied().max().unwrap_or(1) }
    }
}

/// Inner and outer defects of `B(o, n)` against the norm ball of radius
/// `n` for ascending radii.
pub fn shape_error_series(
    src: &DistanceSource,
    o: &Point,
    radii: &[u64],
    norm: ShapeNorm,
    budget: usize,
) -> Result<ShapeSeries> {
    if radii.is_empty() || radii.windows(2).any(|w| w[0] >= w[1]) || radii[0] == 0 {
        return Err(FppError::DomainError("radii must be positive and strictly ascending".into()));
    }
    let a = src.lower_lipschitz();
    if !(a > 0.0) {
        return Err(FppError::Unsupported("ball scan needs a positive lower Lipschitz constant".into()));
    }
    let n_max = *radii.last().unwrap();
    let norm_radius = match norm {
        ShapeNorm::Estimated { radius } => Some(radius),
        ShapeNorm::Given(_) => None,
    };
    let mut region_radius = (n_max.max(norm_radius.unwrap_or(0)) as f64 / a).ceil() as u64;
    if let ShapeNorm::Given(nk) = &norm {
        region_radius = region_radius.max((n_max as f64 / norm_lower_lipschitz(nk, src.lattice())).ceil() as u64);
    }
    let reg = src.region(o, region_radius, budget)?;
    let norm = match norm {
        ShapeNorm::Given(n) => n,
        ShapeNorm::Estimated { radius } => {
            let dirs = DirectionSet::standard(o.dim());
            NormKind::Gauge(std::sync::Arc::new(limit_norm_in(&reg, radius, &dirs)?))
        }
    };
    // The scan must contain every lattice point of norm at most n_max.
    let needed = (n_max as f64 / norm_lower_lipschitz(&norm, src.lattice())).ceil() as u64;
    if needed > region_radius {
        return Err(FppError::Degenerate(format!(
            "norm ball of radius {n_max} leaves the scanned word ball of radius {region_radius}"
        )));
    }
    let norms: Vec<f64> =
        reg.points.iter().map(|p| norm.eval(&p.checked_sub(o).expect("in range").to_f64())).collect();
    let mut rows: Vec<ShapeRow> = Vec::with_capacity(radii.len());
    for (j, &n) in radii.iter().enumerate() {
        let nf = n as f64;
        let delta_out = reg.measure(|dist| {
            Ok(dist.iter().zip(&norms).filter(|(d, _)| **d <= nf).map(|(_, q)| q - nf).fold(0.0, f64::max))
        })?;
        let delta_in = reg.measure(|dist| {
            let m = dist.iter().zip(&norms).filter(|(d, _)| **d > nf).map(|(_, q)| *q).fold(f64::INFINITY, f64::min);
            Ok((nf - m).max(0.0))
        })?;
        let ball_points = reg.full.iter().filter(|d| **d <= nf).count();
        let cauchy_to_previous =
            if j > 0 { Some(cauchy_defect_in(&reg, radii[j - 1], n, AuxNorm::Linf)?) } else { None };
        rows.push(ShapeRow { n, delta_out, delta_in, ball_points, cauchy_to_previous });
    }
    let fit_out = fit_rate(&rows.iter().map(|r| (r.n as f64, r.delta_out.value)).collect::<Vec<_>>());
    let fit_in = fit_rate(&rows.iter().map(|r| (r.n as f64, r.delta_in.value)).collect::<Vec<_>>());
    Ok(ShapeSeries { rows, norm_radius, region_radius, fit_out, fit_in })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InductionLevel {
    pub r1: u64,
    pub r2: u64,
    pub defect: f64,
    /// `2 C / φ(r1)`.
    pub bound: f64,
    pub holds: bool,
}

/// Constants of the scale induction that turns geodesicity into a rate,
/// and the per-level inequality evaluated on measured Cauchy defects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InductionTrace {
    /// Upper Lipschitz constant used; estimated for the average distance.
    pub g: f64,
    pub g_estimated: bool,
    /// Geodesicity constant `c` of `N(α) = c φ(α)`.
    pub c: f64,
    /// `C′ = 6G / c`.
    pub c_prime: f64,
    /// Smallest power of two with `d η(L) / L ≤ 1/4`.
    pub l: u64,
    /// `C″ = L C′`.
    pub c_doubleprime: f64,
    pub c0: f64,
    /// `C = max(C₀, C″/4)`.
    pub c_final: f64,
    pub levels: Vec<InductionLevel>,
}

pub fn induction_trace(
    g: f64,
    g_estimated: bool,
    c: f64,
    dim: usize,
    phi: &DoublingProfile,
    c0: f64,
    measured: &[(u64, u64, f64)],
) -> Result<InductionTrace> {
    if !(g > 0.0 && c > 0.0) {
        return Err(FppError::DomainError("G and c must be positive".into()));
    }
    let c_prime = 6.0 * g / c;
    let mut l = 2u64;
    while dim as f64 * phi.eta(l as f64) / l as f64 > 0.25 {
        l = l.checked_mul(2).ok_or(FppError::Overflow)?;
    }
    let c_doubleprime = l as f64 * c_prime;
    let c_final = c0.max(c_doubleprime / 4.0);
    let levels = measured
        .iter()
        .map(|&(r1, r2, defect)| {
            let bound = 2.0 * c_final / phi.phi(r1 as f64);
            InductionLevel { r1, r2, defect, bound, holds: defect <= bound }
        })
        .collect();
    Ok(InductionTrace { g, g_estimated, c, c_prime, l, c_doubleprime, c0, c_final, levels })
}

/// Minkowski sum of two clouds with hulls compared through support
/// functions: `max_θ |h_{conv(A+B)} − h_{conv A} − h_{conv B}|`.
pub fn hull_sum_defect(a: &PointCloud, b: &PointCloud, dirs: &DirectionSet, budget: usize) -> Result<f64> {
    let s = minkowski_sum(a, b, budget)?;
    let hs = convex_hull(&s)?.support_on(dirs)?;
    let ha = convex_hull(a)?.support_on(dirs)?;
    let hb = convex_hull(b)?.support_on(dirs)?;
    Ok(hs.iter().zip(ha.iter().zip(&hb)).map(|(s, (a, b))| (s - a - b).abs()).fold(0.0, f64::max))
}

/// Exact planar check of `conv(A + B) = conv A + conv B`: the vertices of
/// the left side are exactly the sums of matching extreme points, so the
/// two vertex lists coincide with the hull of all vertex sums.
pub fn hull_commutes_with_sum(a: &PointCloud, b: &PointCloud, budget: usize) -> Result<bool> {
    let lhs = convex_hull(&minkowski_sum(a, b, budget)?)?;
    let va = PointCloud::from_points(a.dim(), convex_hull(a)?.vertices().unwrap_or_default().to_vec());
    let vb = PointCloud::from_points(b.dim(), convex_hull(b)?.vertices().unwrap_or_default().to_vec());
    if va.is_empty() || vb.is_empty() {
        return Err(FppError::Unsupported("exact hulls only up to dimension 3".into()));
    }
    let rhs = convex_hull(&minkowski_sum(&va, &vb, budget)?)?;
    Ok(matches!((&lhs, &rhs), (Polytope::Vertices { vertices: x, .. }, Polytope::Vertices { vertices: y, .. }) if x == y))
}
