//! Cayley graphs of Z^d and their word metric.

use std::collections::VecDeque;
use std::fmt;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{FppError, Result};
use crate::geometry::PointCloud;

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 4;

/// A point of Z^d, `d <= MAX_DIM`. Unused trailing coordinates are zero.
///
/// The derived ordering is lexicographic on coordinates, which is what edge
/// canonicalization and tie-breaking rely on.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    dim: u8,
    coords: [i64; MAX_DIM],
}

impl Point {
    pub fn new(coords: &[i64]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(FppError::Unsupported(format!(
                "dimension {} (supported: 1..={MAX_DIM})",
                coords.len()
            )));
        }
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Point { dim: coords.len() as u8, coords: c })
    }

    /// Panicking constructor for literals in tests and examples.
    pub fn from_slice(coords: &[i64]) -> Self {
        Self::new(coords).expect("valid point literal")
    }

    pub fn origin(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "unsupported dimension {dim}");
        Point { dim: dim as u8, coords: [0; MAX_DIM] }
    }

    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut p = Self::origin(dim);
        p.coords[axis] = 1;
        p
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn get(&self, axis: usize) -> i64 {
        self.coords[axis]
    }

    pub fn checked_add(&self, other: &Point) -> Result<Point> {
        self.zip_checked(other, i64::checked_add)
    }

    pub fn checked_sub(&self, other: &Point) -> Result<Point> {
        self.zip_checked(other, i64::checked_sub)
    }

    pub fn checked_scale(&self, k: i64) -> Result<Point> {
        let mut out = *self;
        for c in out.coords.iter_mut().take(self.dim()) {
            *c = c.checked_mul(k).ok_or(FppError::Overflow)?;
        }
        Ok(out)
    }

    pub fn neg(&self) -> Point {
        let mut out = *self;
        for c in out.coords.iter_mut() {
            *c = -*c;
        }
        out
    }

    /// Unchecked addition for hot loops where coordinates are known to be
    /// far from the i64 range.
    #[inline]
    pub(crate) fn add_unchecked(&self, other: &Point) -> Point {
        let mut out = *self;
        for i in 0..MAX_DIM {
            out.coords[i] += other.coords[i];
        }
        out
    }

    #[inline]
    pub(crate) fn sub_unchecked(&self, other: &Point) -> Point {
        let mut out = *self;
        for i in 0..MAX_DIM {
            out.coords[i] -= other.coords[i];
        }
        out
    }

    fn zip_checked(&self, other: &Point, op: fn(i64, i64) -> Option<i64>) -> Result<Point> {
        if self.dim != other.dim {
            return Err(FppError::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        let mut out = *self;
        for i in 0..self.dim() {
            out.coords[i] = op(self.coords[i], other.coords[i]).ok_or(FppError::Overflow)?;
        }
        Ok(out)
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    pub fn l1(&self) -> i64 {
        self.coords().iter().map(|c| c.abs()).sum()
    }

    pub fn linf(&self) -> i64 {
        self.coords().iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coords().iter().map(|&c| c as f64).collect()
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<i64>::deserialize(d)?;
        Point::new(&v).map_err(serde::de::Error::custom)
    }
}

/// Canonical key of an undirected lattice edge: `base` is the
/// lexicographically smaller endpoint and `step = other - base`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeKey {
    pub base: Point,
    pub step: Point,
}

impl EdgeKey {
    /// Key for two endpoints already known to be adjacent.
    #[inline]
    pub fn between(u: Point, v: Point) -> EdgeKey {
        if u <= v {
            EdgeKey { base: u, step: v.sub_unchecked(&u) }
        } else {
            EdgeKey { base: v, step: u.sub_unchecked(&v) }
        }
    }

    pub fn endpoints(&self) -> (Point, Point) {
        (self.base, self.base.add_unchecked(&self.step))
    }
}

/// Shape of the generating set, used to pick closed-form word norms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum GeneratorKind {
    /// `{±e_i}`: the word norm is L1.
    Standard,
    /// `{-1,0,1}^d \ {0}`: the word norm is L∞.
    King,
    General,
}

/// Cayley graph of Z^d for a finite symmetric generating set.
#[derive(Clone, Debug, PartialEq)]
pub struct CayleyLattice {
    dim: usize,
    generators: Vec<Point>,
    kind: GeneratorKind,
}

impl CayleyLattice {
    /// Validates a generating set. The set must be symmetric, free of zero
    /// and duplicates, and must span Z^d as a group.
    pub fn new(dim: usize, generators: Vec<Point>) -> Result<Self> {
        Self::build(dim, generators, false)
    }

    /// Like [`CayleyLattice::new`] but adds missing negations first.
    pub fn symmetrized(dim: usize, generators: Vec<Point>) -> Result<Self> {
        Self::build(dim, generators, true)
    }

    pub fn from_vectors(dim: usize, gens: &[Vec<i64>], symmetrize: bool) -> Result<Self> {
        let pts = gens.iter().map(|g| Point::new(g)).collect::<Result<Vec<_>>>()?;
        Self::build(dim, pts, symmetrize)
    }

    /// Standard generators `{±e_1, …, ±e_d}`.
    pub fn standard(dim: usize) -> Self {
        let mut gens = Vec::with_capacity(2 * dim);
        for i in 0..dim {
            let e = Point::unit(dim, i);
            gens.push(e);
            gens.push(e.neg());
        }
        Self::new(dim, gens).expect("standard generators are valid")
    }

    /// King moves: every nonzero vector of `{-1,0,1}^d`.
    pub fn king(dim: usize) -> Self {
        let mut gens = Vec::new();
        let total = 3usize.pow(dim as u32);
        for code in 0..total {
            let mut c = [0i64; MAX_DIM];
            let mut k = code;
            for slot in c.iter_mut().take(dim) {
                *slot = (k % 3) as i64 - 1;
                k /= 3;
            }
            let p = Point::new(&c[..dim]).expect("dim checked");
            if !p.is_zero() {
                gens.push(p);
            }
        }
        Self::new(dim, gens).expect("king generators are valid")
    }

    fn build(dim: usize, mut generators: Vec<Point>, symmetrize: bool) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(FppError::Unsupported(format!("dimension {dim}")));
        }
        if generators.iter().any(|g| g.dim() != dim) {
            return Err(FppError::InvalidLattice("generator dimension mismatch".into()));
        }
        if generators.iter().any(Point::is_zero) {
            return Err(FppError::InvalidLattice("zero vector in generating set".into()));
        }
        let mut seen = FxHashSet::default();
        for g in &generators {
            if !seen.insert(*g) {
                return Err(FppError::InvalidLattice(format!("duplicate generator {g}")));
            }
        }
        if symmetrize {
            let missing: Vec<Point> =
                generators.iter().map(Point::neg).filter(|n| !seen.contains(n)).collect();
            for n in missing {
                if seen.insert(n) {
                    generators.push(n);
                }
            }
        } else if let Some(g) = generators.iter().find(|g| !seen.contains(&g.neg())) {
            return Err(FppError::InvalidLattice(format!("generating set not symmetric: -{g} missing")));
        }
        if !spans_integer_lattice(dim, &generators) {
            return Err(FppError::InvalidLattice("generators do not span Z^d".into()));
        }
        generators.sort();
        let kind = classify(dim, &generators);
        Ok(CayleyLattice { dim, generators, kind })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sorted generating set.
    pub fn generators(&self) -> &[Point] {
        &self.generators
    }

    /// Vertex degree q = |S|.
    pub fn degree(&self) -> usize {
        self.generators.len()
    }

    pub fn is_generator(&self, v: &Point) -> bool {
        self.generators.binary_search(v).is_ok()
    }

    pub fn origin(&self) -> Point {
        Point::origin(self.dim)
    }

    /// Growth constant `K = |B(0,1)| · 3^d` with `|B(0,r)| <= K r^d`.
    pub fn growth_constant(&self) -> f64 {
        (self.degree() + 1) as f64 * 3f64.powi(self.dim as i32)
    }

    /// Largest L∞ length of a generator.
    pub fn max_step_linf(&self) -> i64 {
        self.generators.iter().map(Point::linf).max().unwrap_or(1)
    }

    /// Neighbors of `p`, in generator order.
    #[inline]
    pub fn neighbors<'a>(&'a self, p: &'a Point) -> impl Iterator<Item = Point> + 'a {
        self.generators.iter().map(move |g| p.add_unchecked(g))
    }

    pub fn canonical_edge(&self, u: &Point, v: &Point) -> Result<EdgeKey> {
        let diff = v.checked_sub(u)?;
        if !self.is_generator(&diff) {
            return Err(FppError::NotAdjacent { from: u.to_string(), to: v.to_string() });
        }
        Ok(EdgeKey::between(*u, *v))
    }

    /// Word distance `d(x, y)`.
    pub fn graph_distance(&self, x: &Point, y: &Point) -> u64 {
        let v = y.sub_unchecked(x);
        self.word_norm(&v)
    }

    /// Word length of `v` (distance from the origin).
    pub fn word_norm(&self, v: &Point) -> u64 {
        match self.kind {
            GeneratorKind::Standard => v.l1() as u64,
            GeneratorKind::King => v.linf() as u64,
            GeneratorKind::General => self.bfs_word_norm(v),
        }
    }

    fn bfs_word_norm(&self, target: &Point) -> u64 {
        if target.is_zero() {
            return 0;
        }
        // Bidirectional breadth-first search; S is symmetric so both
        // frontiers expand with the same generators.
        let origin = self.origin();
        let mut dist_a: FxHashMap<Point, u64> = FxHashMap::default();
        let mut dist_b: FxHashMap<Point, u64> = FxHashMap::default();
        dist_a.insert(origin, 0);
        dist_b.insert(*target, 0);
        let mut front_a = vec![origin];
        let mut front_b = vec![*target];
        let (mut da, mut db) = (0u64, 0u64);
        loop {
            let expand_a = front_a.len() <= front_b.len();
            let (front, dist, other, depth) = if expand_a {
                (&mut front_a, &mut dist_a, &dist_b, &mut da)
            } else {
                (&mut front_b, &mut dist_b, &dist_a, &mut db)
            };
            *depth += 1;
            let mut next = Vec::new();
            let mut best: Option<u64> = None;
            for p in front.iter() {
                for q in self.neighbors(p) {
                    if dist.contains_key(&q) {
                        continue;
                    }
                    dist.insert(q, *depth);
                    if let Some(&o) = other.get(&q) {
                        let total = *depth + o;
                        best = Some(best.map_or(total, |b: u64| b.min(total)));
                    }
                    next.push(q);
                }
            }
            if let Some(b) = best {
                return b;
            }
            *front = next;
        }
    }

    /// Word ball `B(o, r)` by breadth-first expansion.
    pub fn word_ball(&self, o: &Point, r: u64, point_budget: usize) -> Result<PointCloud> {
        let field = self.word_distance_field(&[*o], r, point_budget)?;
        Ok(PointCloud::from_points(self.dim, field.into_keys().collect()))
    }

    /// Breadth-first distances from a set of sources, up to `r`.
    pub fn word_distance_field(
        &self,
        sources: &[Point],
        r: u64,
        point_budget: usize,
    ) -> Result<FxHashMap<Point, u64>> {
        let mut dist: FxHashMap<Point, u64> = FxHashMap::default();
        let mut queue = VecDeque::new();
        for s in sources {
            if dist.insert(*s, 0).is_none() {
                queue.push_back(*s);
            }
        }
        while let Some(p) = queue.pop_front() {
            let dp = dist[&p];
            if dp == r {
                continue;
            }
            for q in self.neighbors(&p) {
                if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(q) {
                    e.insert(dp + 1);
                    if dist.len() > point_budget {
                        return Err(FppError::ResourceLimit(format!(
                            "word ball exceeds point budget {point_budget}"
                        )));
                    }
                    queue.push_back(q);
                }
            }
        }
        Ok(dist)
    }
}

fn classify(dim: usize, sorted: &[Point]) -> GeneratorKind {
    if sorted == CayleyLattice::standard_sorted(dim).as_slice() {
        GeneratorKind::Standard
    } else if sorted.len() + 1 == 3usize.pow(dim as u32) && sorted.iter().all(|g| g.linf() == 1) {
        GeneratorKind::King
    } else {
        GeneratorKind::General
    }
}

impl CayleyLattice {
    fn standard_sorted(dim: usize) -> Vec<Point> {
        let mut v: Vec<Point> = (0..dim)
            .flat_map(|i| {
                let e = Point::unit(dim, i);
                [e, e.neg()]
            })
            .collect();
        v.sort();
        v
    }
}

/// True iff the rows generate Z^d as an abelian group. Computes a row
/// echelon form with unimodular integer operations and checks that every
/// pivot is ±1.
fn spans_integer_lattice(dim: usize, gens: &[Point]) -> bool {
    let mut rows: Vec<Vec<i128>> =
        gens.iter().map(|g| g.coords().iter().map(|&c| c as i128).collect()).collect();
    let mut pivot_row = 0;
    for col in 0..dim {
        // Euclid on column `col` among rows >= pivot_row.
        loop {
            let mut nonzero: Vec<usize> =
                (pivot_row..rows.len()).filter(|&r| rows[r][col] != 0).collect();
            if nonzero.is_empty() {
                return false;
            }
            nonzero.sort_by_key(|&r| rows[r][col].abs());
            let p = nonzero[0];
            if nonzero.len() == 1 {
                rows.swap(pivot_row, p);
                break;
            }
            let pv = rows[p][col];
            for &r in &nonzero[1..] {
                let q = rows[r][col].div_euclid(pv);
                for c in 0..dim {
                    let sub = q * rows[p][c];
                    rows[r][c] -= sub;
                }
            }
        }
        if rows[pivot_row][col].abs() != 1 {
            return false;
        }
        pivot_row += 1;
    }
    true
}
