//! Finite lattice point sets and their convex geometry.
//!
//! Everything on integer data is computed exactly: sumsets, hull vertices
//! (dimension ≤ 3) and Hausdorff distances between rescaled clouds. Floating
//! point only appears in support-function sampling.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::error::{FppError, Result};
use crate::lattice::{Point, MAX_DIM};
use crate::scalar::{Rational, Scalar};

/// Norm used to measure Hausdorff distances.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AuxNorm {
    L1,
    L2,
    #[default]
    Linf,
}

impl AuxNorm {
    pub fn of(&self, v: &[f64]) -> f64 {
        match self {
            AuxNorm::L1 => v.iter().map(|x| x.abs()).sum(),
            AuxNorm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            AuxNorm::Linf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    /// Norm of the dual space, used to normalize support-function gaps.
    pub fn dual(&self) -> AuxNorm {
        match self {
            AuxNorm::L1 => AuxNorm::Linf,
            AuxNorm::L2 => AuxNorm::L2,
            AuxNorm::Linf => AuxNorm::L1,
        }
    }

    /// Integer "norm key" that is monotone in the norm: the norm itself for
    /// L1 and L∞, its square for L2.
    fn key(&self, v: &[i128]) -> i128 {
        match self {
            AuxNorm::L1 => v.iter().map(|x| x.abs()).sum(),
            AuxNorm::L2 => v.iter().map(|x| x * x).sum(),
            AuxNorm::Linf => v.iter().fold(0, |m, x| m.max(x.abs())),
        }
    }

    fn key_to_f64(&self, k: i128) -> f64 {
        match self {
            AuxNorm::L2 => (k as f64).sqrt(),
            _ => k as f64,
        }
    }

    /// Key of a lower bound `lb` on the L∞ norm.
    fn key_of_linf_lower_bound(&self, lb: i128) -> i128 {
        match self {
            AuxNorm::L2 => lb * lb,
            _ => lb,
        }
    }
}

/// Sorted, deduplicated set of lattice points.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PointCloud {
    dim: usize,
    points: Vec<Point>,
}

impl std::fmt::Debug for PointCloud {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PointCloud(d={}, {:?})", self.dim, self.points)
    }
}

impl PointCloud {
    pub fn from_points(dim: usize, mut points: Vec<Point>) -> Self {
        debug_assert!(points.iter().all(|p| p.dim() == dim));
        points.sort_unstable();
        points.dedup();
        PointCloud { dim, points }
    }

    pub(crate) fn from_sorted_unique(dim: usize, points: Vec<Point>) -> Self {
        debug_assert!(points.windows(2).all(|w| w[0] < w[1]));
        PointCloud { dim, points }
    }

    pub fn from_coords(dim: usize, coords: &[Vec<i64>]) -> Result<Self> {
        let pts = coords
            .iter()
            .map(|c| {
                if c.len() != dim {
                    Err(FppError::DimensionMismatch { expected: dim, got: c.len() })
                } else {
                    Point::new(c)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PointCloud::from_points(dim, pts))
    }

    pub fn singleton(p: Point) -> Self {
        PointCloud { dim: p.dim(), points: vec![p] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point> {
        self.points.iter()
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.points.binary_search(p).is_ok()
    }

    pub fn is_subset_of(&self, other: &PointCloud) -> bool {
        self.points.iter().all(|p| other.contains(p))
    }

    pub fn negated(&self) -> PointCloud {
        PointCloud::from_points(self.dim, self.points.iter().map(|p| p.neg()).collect())
    }

    pub fn is_symmetric(&self) -> bool {
        self.points.iter().all(|p| self.contains(&p.neg()))
    }

    /// `tA = {t a}`.
    pub fn dilated(&self, t: i64) -> Result<PointCloud> {
        let pts = self.points.iter().map(|p| p.checked_scale(t)).collect::<Result<Vec<_>>>()?;
        Ok(PointCloud::from_points(self.dim, pts))
    }

    pub fn translated(&self, v: &Point) -> Result<PointCloud> {
        let pts = self.points.iter().map(|p| p.checked_add(v)).collect::<Result<Vec<_>>>()?;
        Ok(PointCloud::from_points(self.dim, pts))
    }

    pub fn union(&self, other: &PointCloud) -> PointCloud {
        let mut pts = self.points.clone();
        pts.extend_from_slice(&other.points);
        PointCloud::from_points(self.dim, pts)
    }

    pub fn linf_radius(&self) -> i64 {
        self.points.iter().map(|p| p.linf()).max().unwrap_or(0)
    }

    pub fn support(&self, dir: &[f64]) -> f64 {
        self.points.iter().map(|p| dot(p, dir)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub(crate) fn hash_set(&self) -> FxHashSet<Point> {
        self.points.iter().copied().collect()
    }
}

fn dot(p: &Point, dir: &[f64]) -> f64 {
    p.coords().iter().zip(dir).map(|(a, b)| *a as f64 * b).sum()
}

/// Exact sumset `A + B`.
pub fn minkowski_sum(a: &PointCloud, b: &PointCloud, budget: usize) -> Result<PointCloud> {
    if a.dim != b.dim {
        return Err(FppError::DimensionMismatch { expected: a.dim, got: b.dim });
    }
    let mut set: FxHashSet<Point> = FxHashSet::default();
    for p in &a.points {
        for q in &b.points {
            set.insert(p.checked_add(q)?);
        }
        if set.len() > budget {
            return Err(FppError::ResourceLimit(format!("sumset exceeds point budget {budget}")));
        }
    }
    Ok(PointCloud::from_points(a.dim, set.into_iter().collect()))
}

/// `Aⁿ = A + … + A` (n summands) by repeated squaring.
pub fn minkowski_power(a: &PointCloud, n: u32, budget: usize) -> Result<PointCloud> {
    if n == 0 {
        return Err(FppError::DomainError("Minkowski power needs n >= 1".into()));
    }
    let mut result: Option<PointCloud> = None;
    let mut base = a.clone();
    let mut k = n;
    loop {
        if k & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => minkowski_sum(&r, &base, budget)?,
            });
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        base = minkowski_sum(&base, &base, budget)?;
    }
    Ok(result.expect("n >= 1"))
}

/// Fixed set of unit directions for support-function sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionSet {
    dim: usize,
    dirs: Arc<Vec<Vec<f64>>>,
}

impl DirectionSet {
    pub const PLANAR_COUNT: usize = 256;
    pub const GENERAL_COUNT: usize = 4096;
    const GENERAL_SEED: u64 = 0x5eed_d1ec;

    /// 256 equally spaced angles in the plane, the axis directions plus a
    /// seeded quasi-uniform set of 4096 unit vectors otherwise.
    pub fn standard(dim: usize) -> DirectionSet {
        match dim {
            2 => DirectionSet::planar(Self::PLANAR_COUNT),
            _ => DirectionSet::seeded(dim, Self::GENERAL_COUNT, Self::GENERAL_SEED),
        }
    }

    pub fn planar(n: usize) -> DirectionSet {
        let dirs = (0..n)
            .map(|j| {
                if (4 * j) % n == 0 {
                    // Exact axis directions.
                    return [vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]][4 * j / n].clone();
                }
                let t = std::f64::consts::TAU * j as f64 / n as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
        DirectionSet { dim: 2, dirs: Arc::new(dirs) }
    }

    pub fn seeded(dim: usize, n: usize, seed: u64) -> DirectionSet {
        if dim == 1 {
            return DirectionSet { dim, dirs: Arc::new(vec![vec![1.0], vec![-1.0]]) };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dirs = Vec::with_capacity(n + 2 * dim);
        // Axis directions bound the body inside a box, which gauge
        // computations rely on.
        for i in 0..dim {
            for sign in [1.0, -1.0] {
                let mut e = vec![0.0; dim];
                e[i] = sign;
                dirs.push(e);
            }
        }
        while dirs.len() < n + 2 * dim {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r = AuxNorm::L2.of(&v);
            if r > 1e-3 && r <= 1.0 {
                dirs.push(v.iter().map(|x| x / r).collect());
            }
        }
        DirectionSet { dim, dirs: Arc::new(dirs) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.dirs
    }
}

/// Convex hull of a finite lattice set.
#[derive(Clone, Debug, PartialEq)]
pub enum Polytope {
    /// Exact extreme points. In the plane they are listed counterclockwise
    /// starting from the lexicographically smallest one.
    Vertices { dim: usize, vertices: Vec<Point> },
    /// Support function sampled on a direction set (dimension > 3).
    Sampled { directions: DirectionSet, support: Vec<f64> },
}

impl Polytope {
    pub fn dim(&self) -> usize {
        match self {
            Polytope::Vertices { dim, .. } => *dim,
            Polytope::Sampled { directions, .. } => directions.dim(),
        }
    }

    pub fn vertices(&self) -> Option<&[Point]> {
        match self {
            Polytope::Vertices { vertices, .. } => Some(vertices),
            Polytope::Sampled { .. } => None,
        }
    }

    /// Support function on a direction set.
    pub fn support_on(&self, dirs: &DirectionSet) -> Result<Vec<f64>> {
        match self {
            Polytope::Vertices { vertices, .. } => Ok(dirs
                .directions()
                .iter()
                .map(|d| vertices.iter().map(|v| dot(v, d)).fold(f64::NEG_INFINITY, f64::max))
                .collect()),
            Polytope::Sampled { directions, support } => {
                if directions == dirs {
                    Ok(support.clone())
                } else {
                    Err(FppError::Unsupported("sampled polytope on a foreign direction set".into()))
                }
            }
        }
    }

    /// Whether the rational point `num / den` lies in a planar polytope.
    pub fn contains_rational_2d(&self, num: [i128; 2], den: i128) -> Result<bool> {
        let v = self.planar_vertices()?;
        Ok(polygon_contains(&v, num, den))
    }

    pub(crate) fn planar_vertices(&self) -> Result<Vec<[i128; 2]>> {
        match self {
            Polytope::Vertices { dim: 2, vertices } => {
                Ok(vertices.iter().map(|p| [p.get(0) as i128, p.get(1) as i128]).collect())
            }
            _ => Err(FppError::Unsupported("planar operation on a non-planar polytope".into())),
        }
    }
}

fn cross<T: Scalar>(o: &[T; 2], a: &[T; 2], b: &[T; 2]) -> T {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Monotone-chain hull of planar points, counterclockwise from the
/// lexicographically smallest vertex. Collinear boundary points are dropped.
pub fn hull_2d<T: Scalar>(pts: &[[T; 2]]) -> Vec<[T; 2]> {
    let mut p = pts.to_vec();
    p.sort_by(|a, b| {
        a[0].partial_cmp(&b[0]).expect("ordered").then(a[1].partial_cmp(&b[1]).expect("ordered"))
    });
    p.dedup();
    if p.len() <= 2 {
        return p;
    }
    let mut lower: Vec<[T; 2]> = Vec::new();
    for q in &p {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], q) <= T::zero() {
            lower.pop();
        }
        lower.push(*q);
    }
    let mut upper: Vec<[T; 2]> = Vec::new();
    for q in p.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], q) <= T::zero() {
            upper.pop();
        }
        upper.push(*q);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Convex hull. Exact for dimension ≤ 3, support-sampled above.
pub fn convex_hull(a: &PointCloud) -> Result<Polytope> {
    if a.is_empty() {
        return Err(FppError::Degenerate("convex hull of an empty set".into()));
    }
    let dim = a.dim();
    let vertices = match dim {
        1 => {
            let lo = a.points[0];
            let hi = *a.points.last().expect("nonempty");
            if lo == hi {
                vec![lo]
            } else {
                vec![lo, hi]
            }
        }
        2 => {
            let pts: Vec<[i128; 2]> = a.points.iter().map(|p| [p.get(0) as i128, p.get(1) as i128]).collect();
            hull_2d(&pts).iter().map(|v| Point::from_slice(&[v[0] as i64, v[1] as i64])).collect()
        }
        3 => hull_3d_vertices(&a.points),
        _ => {
            let directions = DirectionSet::standard(dim);
            let support = directions.directions().iter().map(|d| a.support(d)).collect();
            return Ok(Polytope::Sampled { directions, support });
        }
    };
    Ok(Polytope::Vertices { dim, vertices })
}

/// Extreme points in dimension 3 by enumerating supporting planes through
/// triples. Quartic, intended for small clouds.
fn hull_3d_vertices(pts: &[Point]) -> Vec<Point> {
    let v: Vec<[i128; 3]> = pts.iter().map(|p| [p.get(0) as i128, p.get(1) as i128, p.get(2) as i128]).collect();
    let n = v.len();
    let sub = |a: &[i128; 3], b: &[i128; 3]| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    let cr = |a: &[i128; 3], b: &[i128; 3]| {
        [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
    };
    let dt = |a: &[i128; 3], b: &[i128; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    // Affine rank decides the degenerate cases.
    let origin = v[0];
    let mut basis: Vec<[i128; 3]> = vec![];
    for p in &v[1..] {
        let d = sub(p, &origin);
        let independent = match basis.len() {
            0 => d != [0, 0, 0],
            1 => cr(&basis[0], &d) != [0, 0, 0],
            2 => dt(&cr(&basis[0], &basis[1]), &d) != 0,
            _ => false,
        };
        if independent {
            basis.push(d);
        }
    }
    match basis.len() {
        0 => return vec![pts[0]],
        1 | 2 => return lower_rank_extremes(pts, &v, &basis, origin),
        _ => {}
    }
    let mut normals_at: Vec<Vec<[i128; 3]>> = vec![vec![]; n];
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let nrm = cr(&sub(&v[j], &v[i]), &sub(&v[k], &v[i]));
                if nrm == [0, 0, 0] {
                    continue;
                }
                let off = dt(&nrm, &v[i]);
                let (mut above, mut below) = (false, false);
                for p in &v {
                    let s = dt(&nrm, p) - off;
                    above |= s > 0;
                    below |= s < 0;
                }
                if above && below {
                    continue;
                }
                for (idx, p) in v.iter().enumerate() {
                    if dt(&nrm, p) == off {
                        normals_at[idx].push(nrm);
                    }
                }
            }
        }
    }
    let mut out = vec![];
    for (idx, normals) in normals_at.iter().enumerate() {
        let mut full_rank = false;
        'outer: for a in 0..normals.len() {
            for b in a + 1..normals.len() {
                let c = cr(&normals[a], &normals[b]);
                if c == [0, 0, 0] {
                    continue;
                }
                if normals[b + 1..].iter().any(|w| dt(&c, w) != 0) {
                    full_rank = true;
                    break 'outer;
                }
            }
        }
        if full_rank {
            out.push(pts[idx]);
        }
    }
    out
}

/// Extreme points of a collinear or coplanar 3D cloud.
fn lower_rank_extremes(pts: &[Point], v: &[[i128; 3]], basis: &[[i128; 3]], origin: [i128; 3]) -> Vec<Point> {
    let coord = |p: &[i128; 3], b: &[i128; 3]| {
        (p[0] - origin[0]) * b[0] + (p[1] - origin[1]) * b[1] + (p[2] - origin[2]) * b[2]
    };
    if basis.len() == 1 {
        let t: Vec<i128> = v.iter().map(|p| coord(p, &basis[0])).collect();
        let lo = (0..v.len()).min_by_key(|&i| t[i]).expect("nonempty");
        let hi = (0..v.len()).max_by_key(|&i| t[i]).expect("nonempty");
        let mut out = vec![pts[lo], pts[hi]];
        out.sort();
        return out;
    }
    // Project onto the plane using the two basis vectors; the projection is
    // an affine bijection on the plane, so extreme points correspond.
    let e1 = basis[0];
    let e2 = basis[1];
    let g11 = e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2];
    let g12 = e1[0] * e2[0] + e1[1] * e2[1] + e1[2] * e2[2];
    let g22 = e2[0] * e2[0] + e2[1] * e2[1] + e2[2] * e2[2];
    // Coordinates scaled by the Gram determinant stay integral.
    let proj: Vec<[i128; 2]> = v
        .iter()
        .map(|p| {
            let a = coord(p, &e1);
            let b = coord(p, &e2);
            [a * g22 - b * g12, b * g11 - a * g12]
        })
        .collect();
    let hull = hull_2d(&proj);
    let mut out: Vec<Point> = hull
        .iter()
        .map(|h| pts[proj.iter().position(|q| q == h).expect("hull point is an input")])
        .collect();
    out.sort();
    out
}

/// Whether `num / den` lies in the convex polygon with integer vertices
/// `v` (counterclockwise; degenerate segments and points allowed).
pub(crate) fn polygon_contains(v: &[[i128; 2]], num: [i128; 2], den: i128) -> bool {
    match v.len() {
        0 => false,
        1 => num[0] == den * v[0][0] && num[1] == den * v[0][1],
        2 => {
            let (p, q) = (v[0], v[1]);
            let c = (q[0] - p[0]) * (num[1] - den * p[1]) - (q[1] - p[1]) * (num[0] - den * p[0]);
            if c != 0 {
                return false;
            }
            let t = (q[0] - p[0]) * (num[0] - den * p[0]) + (q[1] - p[1]) * (num[1] - den * p[1]);
            let len2 = (q[0] - p[0]).pow(2) + (q[1] - p[1]).pow(2);
            t >= 0 && t <= den * len2
        }
        n => (0..n).all(|i| {
            let p = v[i];
            let q = v[(i + 1) % n];
            (q[0] - p[0]) * (num[1] - den * p[1]) - (q[1] - p[1]) * (num[0] - den * p[0]) >= 0
        }),
    }
}

/// Nearest-point search in a lattice set for the rational point
/// `num / den`, returning the norm key of `num − den·b` minimized over b.
///
/// Searches L∞ shells around the rounded point and stops once the shell
/// lower bound exceeds the best found. Falls back to a full scan when the
/// shells would outgrow the set.
fn nearest_key(num: &[i128], den: i128, set: &FxHashSet<Point>, pts: &[Point], norm: AuxNorm) -> i128 {
    let dim = num.len();
    let mut center = [0i64; MAX_DIM];
    let mut off = 0i128;
    for i in 0..dim {
        let c = round_div(num[i], den);
        center[i] = c as i64;
        off = off.max((num[i] - den * c).abs());
    }
    let key_of = |b: &Point| {
        let mut diff = [0i128; MAX_DIM];
        for i in 0..dim {
            diff[i] = num[i] - den * b.get(i) as i128;
        }
        norm.key(&diff[..dim])
    };
    let mut best: Option<i128> = None;
    let mut k: i64 = 0;
    loop {
        let shell = (2 * k + 1).pow(dim as u32) as usize;
        if shell > 4 * pts.len() + 16 {
            return pts.iter().map(key_of).min().expect("nonempty set");
        }
        let lb = (den * k as i128 - off).max(0);
        if let Some(b) = best {
            if norm.key_of_linf_lower_bound(lb) > b {
                return b;
            }
        }
        for_each_shell_point(dim, &center, k, |p| {
            if set.contains(&p) {
                let key = key_of(&p);
                best = Some(best.map_or(key, |b| b.min(key)));
            }
        });
        k += 1;
    }
}

fn round_div(a: i128, b: i128) -> i128 {
    debug_assert!(b > 0);
    (2 * a + b).div_euclid(2 * b)
}

fn for_each_shell_point(dim: usize, center: &[i64; MAX_DIM], k: i64, mut f: impl FnMut(Point)) {
    let mut cur = [-k; MAX_DIM];
    loop {
        if cur[..dim].iter().any(|c| c.abs() == k) {
            let mut c = [0i64; MAX_DIM];
            for i in 0..dim {
                c[i] = center[i] + cur[i];
            }
            f(Point::from_slice(&c[..dim]));
        }
        let mut axis = 0;
        loop {
            if axis == dim {
                return;
            }
            if cur[axis] < k {
                cur[axis] += 1;
                break;
            }
            cur[axis] = -k;
            axis += 1;
        }
    }
}

fn directed_scaled_key(a: &PointCloud, sa: i64, b: &PointCloud, sb: i64, norm: AuxNorm) -> i128 {
    let set = b.hash_set();
    let dim = a.dim();
    a.points
        .iter()
        .map(|p| {
            let num: Vec<i128> = (0..dim).map(|i| p.get(i) as i128 * sb as i128).collect();
            nearest_key(&num, sa as i128, &set, &b.points, norm)
        })
        .max()
        .unwrap_or(0)
}

/// Exact `d_H(A/sa, B/sb)` for L1 and L∞.
pub fn hausdorff_scaled_exact(a: &PointCloud, sa: i64, b: &PointCloud, sb: i64, norm: AuxNorm) -> Result<Rational> {
    check_pair(a, b, sa, sb)?;
    if norm == AuxNorm::L2 {
        return Err(FppError::Unsupported("exact L2 Hausdorff distance is irrational".into()));
    }
    let k = directed_scaled_key(a, sa, b, sb, norm).max(directed_scaled_key(b, sb, a, sa, norm));
    Ok(Rational::new(k, sa as i128 * sb as i128))
}

/// `d_H(A/sa, B/sb)` in the given norm.
pub fn hausdorff_scaled(a: &PointCloud, sa: i64, b: &PointCloud, sb: i64, norm: AuxNorm) -> Result<f64> {
    check_pair(a, b, sa, sb)?;
    let k = directed_scaled_key(a, sa, b, sb, norm).max(directed_scaled_key(b, sb, a, sa, norm));
    Ok(norm.key_to_f64(k) / (sa as f64 * sb as f64))
}

/// `d_H(A, B)`.
pub fn hausdorff_distance(a: &PointCloud, b: &PointCloud, norm: AuxNorm) -> Result<f64> {
    hausdorff_scaled(a, 1, b, 1, norm)
}

fn check_pair(a: &PointCloud, b: &PointCloud, sa: i64, sb: i64) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(FppError::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    if a.is_empty() || b.is_empty() {
        return Err(FppError::Degenerate("Hausdorff distance of an empty set".into()));
    }
    if sa <= 0 || sb <= 0 {
        return Err(FppError::DomainError("scales must be positive".into()));
    }
    Ok(())
}

/// Quadratic L∞ Hausdorff distance between point lists over any scalar.
pub fn hausdorff_linf_naive<T: Scalar>(a: &[Vec<T>], b: &[Vec<T>]) -> T {
    let dist = |p: &[T], q: &[T]| p.iter().zip(q).fold(T::zero(), |m, (x, y)| m.max_of((*x - *y).abs()));
    let directed = |a: &[Vec<T>], b: &[Vec<T>]| {
        a.iter().fold(T::zero(), |m, p| {
            let near = b.iter().map(|q| dist(p, q)).fold(None, |acc: Option<T>, d| {
                Some(acc.map_or(d, |x| x.min_of(d)))
            });
            m.max_of(near.expect("nonempty"))
        })
    };
    directed(a, b).max_of(directed(b, a))
}

/// Exact `sup_{y ∈ P} dist_∞(y, B)` for a planar polytope `P` with integer
/// vertices and a lattice set `B`.
///
/// The function `y ↦ dist_∞(y, B)` is linear on each cell of the
/// arrangement of lines `x = h/2`, `y = h/2`, `x ± y = c` (h, c integers),
/// so its maximum over `P` sits at a vertex of that arrangement clipped to
/// `P`: half-integer points, intersections of the lines with the edges of
/// `P`, or vertices of `P`.
pub fn polygon_to_cloud_linf(poly: &Polytope, b: &PointCloud) -> Result<Rational> {
    let v = poly.planar_vertices()?;
    if b.is_empty() || b.dim() != 2 {
        return Err(FppError::Degenerate("target cloud must be a nonempty planar set".into()));
    }
    let set = b.hash_set();
    let mut best = Rational::new(0, 1);
    let mut eval = |num: [i128; 2], den: i128| {
        let k = nearest_key(&num, den, &set, &b.points, AuxNorm::Linf);
        let r = Rational::new(k, den);
        if r > best {
            best = r;
        }
    };
    for p in &v {
        eval(*p, 1);
    }
    let (xmin, xmax) = (v.iter().map(|p| p[0]).min().unwrap(), v.iter().map(|p| p[0]).max().unwrap());
    let (ymin, ymax) = (v.iter().map(|p| p[1]).min().unwrap(), v.iter().map(|p| p[1]).max().unwrap());
    for hx in 2 * xmin..=2 * xmax {
        for hy in 2 * ymin..=2 * ymax {
            if polygon_contains(&v, [hx, hy], 2) {
                eval([hx, hy], 2);
            }
        }
    }
    let n = v.len();
    let edges: Vec<([i128; 2], [i128; 2])> = match n {
        1 => vec![],
        2 => vec![(v[0], v[1])],
        _ => (0..n).map(|i| (v[i], v[(i + 1) % n])).collect(),
    };
    for (p, q) in edges {
        let d = [q[0] - p[0], q[1] - p[1]];
        // Linear functionals whose level sets form the arrangement, with
        // the scale 2 making every level an integer.
        for (fx, fy) in [(2, 0), (0, 2), (1, 1), (1, -1)] {
            let fp = fx * p[0] + fy * p[1];
            let fd = fx * d[0] + fy * d[1];
            if fd == 0 {
                continue;
            }
            let (f0, f1) = (fp.min(fp + fd), fp.max(fp + fd));
            for level in f0..=f1 {
                // p + t d with t = (level − fp) / fd.
                let (tn, td) = if fd > 0 { (level - fp, fd) } else { (fp - level, -fd) };
                eval([p[0] * td + d[0] * tn, p[1] * td + d[1] * tn], td);
            }
        }
    }
    Ok(best)
}

/// Exact L∞ Hausdorff distance between a planar lattice set and a convex
/// polygon that contains it.
pub fn cloud_to_hull_linf(cloud: &PointCloud, hull: &Polytope) -> Result<Rational> {
    let v = hull.planar_vertices()?;
    if !cloud.points.iter().all(|p| polygon_contains(&v, [p.get(0) as i128, p.get(1) as i128], 1)) {
        return Err(FppError::DomainError("cloud is not contained in the polygon".into()));
    }
    polygon_to_cloud_linf(hull, cloud)
}

/// Convex body `{x : ⟨x, θ⟩ ≤ h(θ) for every sampled θ}` given by its
/// support function on a direction set containing the axis directions.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportBody {
    directions: DirectionSet,
    support: Vec<f64>,
}

impl SupportBody {
    pub fn new(directions: DirectionSet, support: Vec<f64>) -> Result<Self> {
        if support.len() != directions.len() {
            return Err(FppError::DimensionMismatch { expected: directions.len(), got: support.len() });
        }
        if support.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
            return Err(FppError::Degenerate("support function must be positive and finite".into()));
        }
        Ok(SupportBody { directions, support })
    }

    pub fn dim(&self) -> usize {
        self.directions.dim()
    }

    pub fn directions(&self) -> &DirectionSet {
        &self.directions
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    /// Gauge (Minkowski functional) of the body: `max_θ ⟨x, θ⟩ / h(θ)`.
    pub fn gauge(&self, x: &[f64]) -> f64 {
        self.directions
            .directions()
            .iter()
            .zip(&self.support)
            .map(|(d, h)| d.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / h)
            .fold(0.0, f64::max)
    }

    /// Largest `c` with `gauge(x) ≥ c ‖x‖_∞`.
    pub fn linf_lower_constant(&self) -> f64 {
        let mut hmax: f64 = 0.0;
        for (d, h) in self.directions.directions().iter().zip(&self.support) {
            if d.iter().filter(|c| **c != 0.0).count() == 1 && d.iter().any(|c| c.abs() == 1.0) {
                hmax = hmax.max(*h);
            }
        }
        if hmax > 0.0 {
            1.0 / hmax
        } else {
            0.0
        }
    }

    pub fn scaled(&self, t: f64) -> SupportBody {
        SupportBody { directions: self.directions.clone(), support: self.support.iter().map(|h| h * t).collect() }
    }
}

/// Support-function estimate of the Hausdorff distance between convex
/// bodies: `max_θ |h_A(θ) − h_B(θ)| / ‖θ‖_*`, a lower bound that is exact
/// when the maximizing direction is sampled.
pub fn support_hausdorff(ha: &[f64], hb: &[f64], dirs: &DirectionSet, norm: AuxNorm) -> f64 {
    let dual = norm.dual();
    ha.iter()
        .zip(hb)
        .zip(dirs.directions())
        .map(|((a, b), d)| (a - b).abs() / dual.of(d))
        .fold(0.0, f64::max)
}
