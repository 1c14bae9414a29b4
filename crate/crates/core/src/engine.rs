//! Exact first-passage distances `d_ω` on the implicit infinite lattice.
//!
//! Binary-heap Dijkstra over lazily generated neighbors. Nothing about the
//! lattice is preallocated; every query owns its own search state, so one
//! immutable [`OmegaField`] can serve any number of concurrent queries.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::{FppError, Result};
use crate::lattice::{CayleyLattice, Point};
use crate::scalar::Real;
use crate::geometry::PointCloud;
use crate::weights::OmegaField;

/// Box `[lo, hi]` (inclusive, coordinatewise) restricting the search to an
/// induced subgraph.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub lo: Point,
    pub hi: Point,
}

impl Window {
    /// Cube of L∞ radius `r` around `c`.
    pub fn around(c: &Point, r: i64) -> Window {
        let d = c.dim();
        let lo: Vec<i64> = c.coords().iter().map(|x| x - r).collect();
        let hi: Vec<i64> = c.coords().iter().map(|x| x + r).collect();
        debug_assert_eq!(lo.len(), d);
        Window { lo: Point::from_slice(&lo), hi: Point::from_slice(&hi) }
    }

    #[inline]
    pub fn contains(&self, p: &Point) -> bool {
        (0..p.dim()).all(|i| self.lo.get(i) <= p.get(i) && p.get(i) <= self.hi.get(i))
    }

    pub fn points(&self) -> Vec<Point> {
        let d = self.lo.dim();
        let mut out = vec![];
        let mut cur: Vec<i64> = self.lo.coords().to_vec();
        loop {
            out.push(Point::from_slice(&cur));
            let mut axis = 0;
            loop {
                if axis == d {
                    return out;
                }
                if cur[axis] < self.hi.get(axis) {
                    cur[axis] += 1;
                    break;
                }
                cur[axis] = self.lo.get(axis);
                axis += 1;
            }
        }
    }
}

/// Budgets that turn a runaway search into an error instead of a hang or a
/// silently wrong answer.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchLimits {
    /// Maximum number of settled vertices.
    pub max_vertices: usize,
    /// Word-radius clamp around the source. Settling a vertex beyond it is a
    /// `ResourceLimit` error. When unset and the law has essential infimum
    /// zero, [`SearchLimits::ZERO_INFIMUM_CLAMP`] applies.
    pub clamp_radius: Option<u64>,
    /// Restrict the search to an induced subgraph.
    pub window: Option<Window>,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits { max_vertices: 4_000_000, clamp_radius: None, window: None }
    }
}

impl SearchLimits {
    pub const ZERO_INFIMUM_CLAMP: u64 = 4096;
    pub fn with_window(mut self, w: Window) -> Self {
        self.window = Some(w);
        self
    }

    pub fn with_clamp(mut self, r: u64) -> Self {
        self.clamp_radius = Some(r);
        self
    }

    pub fn with_max_vertices(mut self, n: usize) -> Self {
        self.max_vertices = n;
        self
    }
}

/// A lattice path with its ω-length accumulated left to right.
#[derive(Clone, Debug, PartialEq)]
pub struct PathRecord<T = f64> {
    pub vertices: Vec<Point>,
    /// `cumulative[i]` is the ω-length of the prefix ending at `vertices[i]`.
    pub cumulative: Vec<T>,
    pub omega_length: T,
    pub hops: usize,
}

impl<T: Real> PathRecord<T> {
    /// Build a path from a vertex sequence, checking adjacency.
    pub fn from_vertices(field: &OmegaField<T>, vertices: Vec<Point>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(FppError::Degenerate("empty path".into()));
        }
        let mut cumulative = Vec::with_capacity(vertices.len());
        let mut acc = T::zero();
        cumulative.push(acc);
        for w in vertices.windows(2) {
            acc = acc + field.weight(&w[0], &w[1])?;
            cumulative.push(acc);
        }
        let hops = vertices.len() - 1;
        Ok(PathRecord { vertices, cumulative, omega_length: acc, hops })
    }

    pub fn start(&self) -> Point {
        self.vertices[0]
    }

    pub fn end(&self) -> Point {
        *self.vertices.last().expect("nonempty path")
    }

    pub fn is_simple(&self) -> bool {
        let mut seen = FxHashSet::default();
        self.vertices.iter().all(|v| seen.insert(*v))
    }

    pub fn max_edge_weight(&self) -> T {
        self.cumulative.windows(2).map(|w| w[1] - w[0]).fold(T::zero(), T::max)
    }
}

/// Vertex of a path whose cumulative ω-length is closest to
/// `λ · omega_length`, with the residual `|cum(z) − λ L|`. Ties go to the
/// earlier vertex.
pub fn geodesic_waypoint<T: Real>(path: &PathRecord<T>, lambda: T) -> Result<(Point, T)> {
    if !(lambda >= T::zero() && lambda <= T::one()) {
        return Err(FppError::DomainError(format!("lambda = {lambda} outside [0, 1]")));
    }
    if lambda == T::zero() {
        return Ok((path.start(), T::zero()));
    }
    if lambda == T::one() {
        return Ok((path.end(), T::zero()));
    }
    let target = lambda * path.omega_length;
    let mut best = (0usize, (path.cumulative[0] - target).abs());
    for (i, c) in path.cumulative.iter().enumerate().skip(1) {
        let r = (*c - target).abs();
        if r < best.1 {
            best = (i, r);
        }
    }
    Ok((path.vertices[best.0], best.1))
}

/// The settled part of a single-source search truncated at `radius`.
#[derive(Clone, Debug, PartialEq)]
pub struct OmegaBall<T = f64> {
    pub center: Point,
    pub radius: T,
    /// `(x, d_ω(center, x))`, sorted by point.
    pub entries: Vec<(Point, T)>,
}

impl<T: Real> OmegaBall<T> {
    pub fn points(&self) -> PointCloud {
        PointCloud::from_sorted_unique(
            self.center.dim(),
            self.entries.iter().map(|(p, _)| *p).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn distance(&self, p: &Point) -> Option<T> {
        self.entries.binary_search_by(|(q, _)| q.cmp(p)).ok().map(|i| self.entries[i].1)
    }
}

#[derive(Clone, Copy, Debug)]
struct Node<T> {
    dist: T,
    pred: Option<Point>,
    settled: bool,
}

#[derive(Clone, Copy, Debug)]
struct HeapEntry<T> {
    dist: T,
    point: Point,
}

impl<T: Real> PartialEq for HeapEntry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Real> Eq for HeapEntry<T> {}

impl<T: Real> PartialOrd for HeapEntry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Real> Ord for HeapEntry<T> {
    // Reversed so that BinaryHeap pops the smallest distance, then the
    // lexicographically smallest point.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .partial_cmp(&self.dist)
            .expect("distances are never NaN")
            .then_with(|| other.point.cmp(&self.point))
    }
}

/// Incremental Dijkstra state from one source.
pub struct DijkstraSearch<'a, T: Real> {
    field: &'a OmegaField<T>,
    lattice: &'a CayleyLattice,
    limits: &'a SearchLimits,
    clamp: Option<u64>,
    source: Point,
    nodes: FxHashMap<Point, Node<T>>,
    heap: BinaryHeap<HeapEntry<T>>,
    settled: usize,
}

impl<'a, T: Real> DijkstraSearch<'a, T> {
    pub fn new(field: &'a OmegaField<T>, source: Point, limits: &'a SearchLimits) -> Result<Self> {
        let lattice = field.lattice();
        if source.dim() != lattice.dim() {
            return Err(FppError::DimensionMismatch { expected: lattice.dim(), got: source.dim() });
        }
        if let Some(w) = &limits.window {
            if !w.contains(&source) {
                return Err(FppError::DomainError(format!("source {source} outside the window")));
            }
        }
        let mut nodes = FxHashMap::default();
        nodes.insert(source, Node { dist: T::zero(), pred: None, settled: false });
        let mut heap = BinaryHeap::new();
        heap.push(HeapEntry { dist: T::zero(), point: source });
        let clamp = limits.clamp_radius.or_else(|| {
            (field.law().ess_inf() <= T::zero()).then_some(SearchLimits::ZERO_INFIMUM_CLAMP)
        });
        Ok(DijkstraSearch { field, lattice, limits, clamp, source, nodes, heap, settled: 0 })
    }

    pub fn source(&self) -> Point {
        self.source
    }

    /// Distance label of the next vertex to be settled.
    pub fn peek_distance(&mut self) -> Option<T> {
        while let Some(top) = self.heap.peek() {
            let node = &self.nodes[&top.point];
            if node.settled || node.dist < top.dist {
                self.heap.pop();
            } else {
                return Some(top.dist);
            }
        }
        None
    }

    /// Settle the next vertex and relax its edges.
    pub fn settle_next(&mut self) -> Result<Option<(Point, T)>> {
        let Some(_) = self.peek_distance() else { return Ok(None) };
        let HeapEntry { dist, point } = self.heap.pop().expect("peeked");
        if let Some(r) = self.clamp {
            if self.lattice.graph_distance(&self.source, &point) > r {
                return Err(FppError::ResourceLimit(format!(
                    "search from {} left the clamp radius {r} at {point}",
                    self.source
                )));
            }
        }
        self.settled += 1;
        if self.settled > self.limits.max_vertices {
            return Err(FppError::ResourceLimit(format!(
                "search from {} settled more than {} vertices",
                self.source, self.limits.max_vertices
            )));
        }
        self.nodes.get_mut(&point).expect("queued vertex").settled = true;
        for g in self.lattice.generators() {
            let q = point.add_unchecked(g);
            if let Some(w) = &self.limits.window {
                if !w.contains(&q) {
                    continue;
                }
            }
            let nd = dist + self.field.weight_between(point, q);
            match self.nodes.entry(q) {
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(Node { dist: nd, pred: Some(point), settled: false });
                    self.heap.push(HeapEntry { dist: nd, point: q });
                }
                std::collections::hash_map::Entry::Occupied(mut e) => {
                    let n = e.get_mut();
                    if n.settled {
                        continue;
                    }
                    if nd < n.dist {
                        n.dist = nd;
                        n.pred = Some(point);
                        self.heap.push(HeapEntry { dist: nd, point: q });
                    } else if nd == n.dist && n.pred.is_some_and(|p| point < p) {
                        n.pred = Some(point);
                    }
                }
            }
        }
        Ok(Some((point, dist)))
    }

    pub fn is_settled(&self, p: &Point) -> bool {
        self.nodes.get(p).is_some_and(|n| n.settled)
    }

    pub fn settled_distance(&self, p: &Point) -> Option<T> {
        self.nodes.get(p).filter(|n| n.settled).map(|n| n.dist)
    }

    pub fn settled_count(&self) -> usize {
        self.settled
    }

    /// Run until `target` is settled.
    pub fn run_until(&mut self, target: &Point) -> Result<T> {
        loop {
            if let Some(d) = self.settled_distance(target) {
                return Ok(d);
            }
            if self.settle_next()?.is_none() {
                return Err(FppError::Degenerate(format!(
                    "{target} unreachable from {} inside the window",
                    self.source
                )));
            }
        }
    }

    /// Predecessor chain from the source to a settled `target`.
    pub fn path_to(&self, target: &Point) -> Result<PathRecord<T>> {
        if !self.is_settled(target) {
            return Err(FppError::Degenerate(format!("{target} is not settled")));
        }
        let mut rev = vec![*target];
        let mut cur = *target;
        while let Some(p) = self.nodes[&cur].pred {
            rev.push(p);
            cur = p;
        }
        rev.reverse();
        PathRecord::from_vertices(self.field, rev)
    }
}

/// `d_ω(x, y)` and one ω-geodesic realizing it. The path runs from `x`;
/// the length is summed from the lexicographically smaller endpoint.
pub fn omega_distance<T: Real>(
    field: &OmegaField<T>,
    x: &Point,
    y: &Point,
    limits: &SearchLimits,
) -> Result<(T, PathRecord<T>)> {
    let mut search = DijkstraSearch::new(field, *x, limits)?;
    let d = search.run_until(y)?;
    let path = search.path_to(y)?;
    debug_assert!(path.omega_length == d);
    check_confinement(field, &path);
    // Summing from the smaller endpoint makes d(x, y) = d(y, x) bit for bit
    // whenever both directions return the same geodesic.
    let d = if x <= y {
        path.omega_length
    } else {
        path.vertices.windows(2).rev().fold(T::zero(), |acc, w| acc + field.weight_between(w[1], w[0]))
    };
    Ok((d, path))
}

/// With every weight at least `a > 0`, a path of ω-length `L` has at most
/// `L / a` hops, so it stays in the word ball of that radius.
fn check_confinement<T: Real>(field: &OmegaField<T>, path: &PathRecord<T>) {
    let a = field.law().ess_inf();
    if a > T::zero() {
        let bound = path.omega_length / a;
        let slack = T::of(1e-9) * (T::one() + bound);
        assert!(
            T::of(path.hops as f64) <= bound + slack,
            "geodesic with {} hops escapes the confinement radius {bound}",
            path.hops
        );
    }
}

/// Distances from `source` to every target, running one search until all
/// of them are settled.
pub fn distances_to<T: Real>(
    field: &OmegaField<T>,
    source: &Point,
    targets: &[Point],
    limits: &SearchLimits,
) -> Result<Vec<T>> {
    let mut search = DijkstraSearch::new(field, *source, limits)?;
    let mut pending: FxHashSet<Point> = targets.iter().copied().collect();
    pending.retain(|t| !search.is_settled(t));
    while !pending.is_empty() {
        match search.settle_next()? {
            Some((p, _)) => {
                pending.remove(&p);
            }
            None => {
                return Err(FppError::Degenerate("target unreachable inside the window".into()));
            }
        }
    }
    Ok(targets.iter().map(|t| search.settled_distance(t).expect("settled")).collect())
}

/// `B_ω(o, r)`: every vertex at ω-distance at most `r` from `o`.
pub fn omega_ball<T: Real>(
    field: &OmegaField<T>,
    o: &Point,
    r: T,
    limits: &SearchLimits,
) -> Result<OmegaBall<T>> {
    if !(r >= T::zero()) {
        return Err(FppError::DomainError(format!("negative radius {r}")));
    }
    let mut search = DijkstraSearch::new(field, *o, limits)?;
    let mut entries = Vec::new();
    while let Some(d) = search.peek_distance() {
        if d > r {
            break;
        }
        let (p, d) = search.settle_next()?.expect("peeked");
        entries.push((p, d));
    }
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(OmegaBall { center: *o, radius: r, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightLaw;
    use std::sync::Arc;

    fn p(c: &[i64]) -> Point {
        Point::from_slice(c)
    }

    fn field(law: WeightLaw, seed: u64) -> OmegaField {
        OmegaField::new(Arc::new(CayleyLattice::standard(2)), law, seed).unwrap()
    }

    #[test]
    fn constant_law_reduces_to_word_metric() {
        let f = field(WeightLaw::constant(1.0), 1);
        let (d, path) = omega_distance(&f, &p(&[0, 0]), &p(&[3, 4]), &SearchLimits::default()).unwrap();
        assert_eq!(d, 7.0);
        assert_eq!(path.hops, 7);
        assert!(path.is_simple());
        let f = field(WeightLaw::constant(2.5), 1);
        let (d, _) = omega_distance(&f, &p(&[1, 1]), &p(&[-2, 3]), &SearchLimits::default()).unwrap();
        assert_eq!(d, 2.5 * 5.0);
    }

    #[test]
    fn geodesic_is_consistent() {
        let f = field(WeightLaw::uniform(1.0, 2.0), 5);
        let lim = SearchLimits::default();
        let (x, y) = (p(&[0, 0]), p(&[9, -4]));
        let (d, path) = omega_distance(&f, &x, &y, &lim).unwrap();
        assert!(path.is_simple());
        assert_eq!(path.start(), x);
        assert_eq!(path.end(), y);
        for z in &path.vertices {
            let (a, _) = omega_distance(&f, &x, z, &lim).unwrap();
            let (b, _) = omega_distance(&f, z, &y, &lim).unwrap();
            assert!((a + b - d).abs() <= 1e-12, "split at {z}: {a} + {b} != {d}");
        }
        let (back, _) = omega_distance(&f, &y, &x, &lim).unwrap();
        assert!((back - d).abs() <= 1e-12);
    }

    #[test]
    fn ball_examples() {
        let lim = SearchLimits::default();
        let f = field(WeightLaw::uniform(1.0, 2.0), 3);
        let b0 = omega_ball(&f, &p(&[2, 2]), 0.0, &lim).unwrap();
        assert_eq!(b0.entries, vec![(p(&[2, 2]), 0.0)]);
        let f1 = field(WeightLaw::constant(1.0), 3);
        let b = omega_ball(&f1, &p(&[0, 0]), 3.5, &lim).unwrap();
        let word = f1.lattice().word_ball(&p(&[0, 0]), 3, 1000).unwrap();
        assert_eq!(b.points(), word);
    }

    #[test]
    fn waypoint_examples() {
        let f = field(WeightLaw::constant(1.0), 0);
        let path = PathRecord::from_vertices(
            &f,
            vec![p(&[0, 0]), p(&[1, 0]), p(&[2, 0]), p(&[3, 0]), p(&[4, 0])],
        )
        .unwrap();
        assert_eq!(geodesic_waypoint(&path, 0.0).unwrap().0, p(&[0, 0]));
        assert_eq!(geodesic_waypoint(&path, 1.0).unwrap().0, p(&[4, 0]));
        assert_eq!(geodesic_waypoint(&path, 0.5).unwrap(), (p(&[2, 0]), 0.0));
        assert!(geodesic_waypoint(&path, 1.5).is_err());
    }

    #[test]
    fn waypoint_residual_bounded_by_max_edge() {
        let lim = SearchLimits::default();
        for seed in 0..20 {
            let f = field(WeightLaw::exponential(1.0), seed);
            let (_, path) = omega_distance(&f, &p(&[0, 0]), &p(&[12, 5]), &lim).unwrap();
            let wmax = path.max_edge_weight();
            for k in 0..=20 {
                let lambda = k as f64 / 20.0;
                let (z, res) = geodesic_waypoint(&path, lambda).unwrap();
                // Exhaustive scan of the path for the true minimum.
                let target = lambda * path.omega_length;
                let best = path.cumulative.iter().map(|c| (c - target).abs()).fold(f64::INFINITY, f64::min);
                assert_eq!(res, best);
                assert!(path.vertices.contains(&z));
                assert!(res <= wmax);
            }
        }
    }

    #[test]
    fn vertex_budget_is_enforced() {
        let f = field(WeightLaw::uniform(1.0, 2.0), 1);
        let lim = SearchLimits::default().with_max_vertices(50);
        let r = omega_distance(&f, &p(&[0, 0]), &p(&[30, 30]), &lim);
        assert!(matches!(r, Err(FppError::ResourceLimit(_))));
    }

    #[test]
    fn clamp_radius_is_enforced() {
        let f = field(WeightLaw::atom_mixture(0.2, 0.0, WeightLaw::constant(1.0)), 1);
        let lim = SearchLimits::default().with_clamp(3);
        let r = omega_distance(&f, &p(&[0, 0]), &p(&[10, 0]), &lim);
        assert!(matches!(r, Err(FppError::ResourceLimit(_))));
        let lim = SearchLimits::default().with_clamp(200);
        assert!(omega_distance(&f, &p(&[0, 0]), &p(&[10, 0]), &lim).is_ok());
    }

    #[test]
    fn window_restricts_the_graph() {
        let f = field(WeightLaw::constant(1.0), 1);
        let w = Window { lo: p(&[0, 0]), hi: p(&[3, 0]) };
        let lim = SearchLimits::default().with_window(w);
        let (d, path) = omega_distance(&f, &p(&[0, 0]), &p(&[3, 0]), &lim).unwrap();
        assert_eq!(d, 3.0);
        assert!(path.vertices.iter().all(|v| w.contains(v)));
        assert!(omega_distance(&f, &p(&[0, 0]), &p(&[0, 1]), &lim).is_err());
        assert_eq!(Window::around(&p(&[0, 0]), 1).points().len(), 9);
    }

    #[test]
    fn sanity_bound_along_monotone_word_path() {
        let lim = SearchLimits::default();
        for seed in 0..10 {
            let f = field(WeightLaw::uniform(1.0, 2.0), seed);
            let y = p(&[7, 3]);
            let mut verts = vec![p(&[0, 0])];
            for i in 1..=7 {
                verts.push(p(&[i, 0]));
            }
            for j in 1..=3 {
                verts.push(p(&[7, j]));
            }
            let mono = PathRecord::from_vertices(&f, verts).unwrap();
            let (d, _) = omega_distance(&f, &p(&[0, 0]), &y, &lim).unwrap();
            assert!(d <= mono.omega_length);
            assert!(d <= mono.max_edge_weight() * 10.0);
        }
    }

    #[test]
    fn f32_engine_agrees_with_f64() {
        let lat = Arc::new(CayleyLattice::standard(2));
        let f64f = OmegaField::new(lat.clone(), WeightLaw::uniform(1.0, 2.0), 11).unwrap();
        let f32f = OmegaField::new(lat, WeightLaw::<f32>::uniform(1.0, 2.0), 11).unwrap();
        let lim = SearchLimits::default();
        let (a, _) = omega_distance(&f64f, &p(&[0, 0]), &p(&[6, 6]), &lim).unwrap();
        let (b, _) = omega_distance(&f32f, &p(&[0, 0]), &p(&[6, 6]), &lim).unwrap();
        assert!((a - b as f64).abs() < 1e-4);
    }
}
