//! Monte Carlo estimation of the average distance `d̄ = E d_ω` and of the
//! fluctuations of `d_ω` around it.
//!
//! Replica `i` uses the field seeded with `replica_seed(base_seed, i)`, so
//! replicas can be computed in any order on any number of threads; every
//! reduction runs in replica-index order.

use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::engine::{distances_to, SearchLimits};
use crate::error::{FppError, Result};
use crate::lattice::{CayleyLattice, Point};
use crate::weights::{mix64, replica_seed, OmegaField, WeightLaw};

/// A Monte Carlo value with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub stderr: f64,
}

impl Measured {
    pub fn exact(value: f64) -> Self {
        Measured { value, stderr: 0.0 }
    }

    pub fn lower(&self, k: f64) -> f64 {
        self.value - k * self.stderr
    }

    pub fn upper(&self, k: f64) -> f64 {
        self.value + k * self.stderr
    }
}

/// Sample mean and standard error of the mean. Identical samples give an
/// exact mean and zero error.
pub fn mean_and_stderr(values: &[f64]) -> Measured {
    let n = values.len();
    if n == 0 {
        return Measured { value: f64::NAN, stderr: f64::NAN };
    }
    if values.iter().all(|v| *v == values[0]) {
        return Measured::exact(values[0]);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Measured { value: mean, stderr: f64::INFINITY };
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    Measured { value: mean, stderr: (var / n as f64).sqrt() }
}

pub fn sample_std(values: &[f64]) -> f64 {
    let m = mean_and_stderr(values);
    m.stderr * (values.len() as f64).sqrt()
}

/// A family of independent weight fields sharing one law and lattice.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub lattice: Arc<CayleyLattice>,
    pub law: WeightLaw,
    pub base_seed: u64,
    pub replicas: usize,
    pub limits: SearchLimits,
}

impl Ensemble {
    pub fn new(lattice: Arc<CayleyLattice>, law: WeightLaw, base_seed: u64, replicas: usize) -> Result<Self> {
        law.validate()?;
        if replicas == 0 {
            return Err(FppError::DomainError("at least one replica is required".into()));
        }
        Ok(Ensemble { lattice, law, base_seed, replicas, limits: SearchLimits::default() })
    }

    pub fn with_limits(mut self, limits: SearchLimits) -> Self {
        self.limits = limits;
        self
    }

    pub fn with_replicas(&self, replicas: usize) -> Self {
        Ensemble { replicas, ..self.clone() }
    }

    pub fn with_seed(&self, base_seed: u64) -> Self {
        Ensemble { base_seed, ..self.clone() }
    }

    pub fn field(&self, i: usize) -> OmegaField {
        OmegaField::new(self.lattice.clone(), self.law.clone(), replica_seed(self.base_seed, i as u64))
            .expect("law validated on construction")
    }

    /// `values[i][j] = d_ω_i(source, targets[j])`.
    pub fn replica_distances(&self, source: &Point, targets: &[Point]) -> Result<Vec<Vec<f64>>> {
        (0..self.replicas)
            .into_par_iter()
            .map(|i| distances_to(&self.field(i), source, targets, &self.limits))
            .collect()
    }

    /// Replica distances for the replicas in `reps`, in replica order.
    pub fn replica_distances_in(
        &self,
        reps: std::ops::Range<usize>,
        source: &Point,
        targets: &[Point],
    ) -> Result<Vec<Vec<f64>>> {
        reps.into_par_iter().map(|i| distances_to(&self.field(i), source, targets, &self.limits)).collect()
    }

    /// Replica distances for several sources at once; `groups[k]` lists the
    /// targets of `sources[k]`. Output is `[replica][source][target]`.
    pub fn replica_distances_grouped(&self, sources: &[Point], groups: &[Vec<Point>]) -> Result<Vec<Vec<Vec<f64>>>> {
        (0..self.replicas)
            .into_par_iter()
            .map(|i| {
                let f = self.field(i);
                sources
                    .iter()
                    .zip(groups)
                    .map(|(s, t)| distances_to(&f, s, t, &self.limits))
                    .collect::<Result<Vec<_>>>()
            })
            .collect()
    }

    /// Estimates of `d̄(source, t)` for every target.
    pub fn mean_field(&self, source: &Point, targets: &[Point]) -> Result<Vec<Measured>> {
        let values = self.replica_distances(source, targets)?;
        Ok((0..targets.len())
            .map(|j| mean_and_stderr(&values.iter().map(|row| row[j]).collect::<Vec<_>>()))
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanDistanceEstimate {
    pub x: Point,
    pub y: Point,
    pub replicas: usize,
    pub mean: f64,
    pub std_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl MeanDistanceEstimate {
    pub fn measured(&self) -> Measured {
        Measured { value: self.mean, stderr: self.std_error }
    }
}

/// Monte Carlo estimate of `d̄(x, y)` over the ensemble's replicas.
pub fn mean_distance(ens: &Ensemble, x: &Point, y: &Point, keep_values: bool) -> Result<MeanDistanceEstimate> {
    if ens.replicas < 2 {
        return Err(FppError::DomainError("mean_distance needs at least 2 replicas".into()));
    }
    let values: Vec<f64> = ens.replica_distances(x, &[*y])?.into_iter().map(|r| r[0]).collect();
    let m = mean_and_stderr(&values);
    let d = ens.lattice.graph_distance(x, y) as f64;
    let (a, b) = (ens.law.ess_inf(), ens.law.mean());
    if m.upper(3.0) < a * d || m.lower(3.0) > b * d {
        log::warn!("d̄({x}, {y}) = {} ± {} outside [{a}·{d}, {b}·{d}]", m.value, m.stderr);
    }
    Ok(MeanDistanceEstimate {
        x: *x,
        y: *y,
        replicas: ens.replicas,
        mean: m.value,
        std_error: m.stderr,
        values: keep_values.then_some(values),
    })
}

/// `C1 · exp(−C2 · min(u²/r, u))`.
pub fn talagrand_bound(u: f64, r: f64, c1: f64, c2: f64) -> f64 {
    c1 * (-c2 * talagrand_exponent(u, r)).exp()
}

pub fn talagrand_exponent(u: f64, r: f64) -> f64 {
    (u * u / r).min(u)
}

/// Envelope constants fitted to exceedance frequencies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TalagrandFit {
    pub c1: f64,
    pub c2: f64,
    /// Root mean square residual of the log-linear least squares fit.
    pub rms_log_residual: f64,
    pub points_used: usize,
}

/// Fits `log f ≈ log C1 − C2 m` with `m = min(u²/r, u)` by least squares
/// for `C2`, then raises `C1` to the smallest value whose envelope lies
/// above every point used.
pub fn fit_talagrand(samples: &[(f64, f64)]) -> Option<TalagrandFit> {
    let pts: Vec<(f64, f64)> = samples.iter().filter(|(_, f)| *f > 0.0).copied().collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
    let slope = sxy / sxx;
    let c2 = (-slope).max(1e-12);
    let log_c1_ls = my + c2 * mx;
    let rms = (pts.iter().map(|p| (p.1.ln() - (log_c1_ls - c2 * p.0)).powi(2)).sum::<f64>() / n).sqrt();
    let c1 = pts.iter().map(|p| p.1 * (c2 * p.0).exp()).fold(0.0, f64::max);
    Some(TalagrandFit { c1, c2, rms_log_residual: rms, points_used: pts.len() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluctuationRow {
    pub x: Point,
    pub y: Point,
    pub word_distance: u64,
    pub mean: f64,
    pub sample_std: f64,
    /// Exceedance frequency `P̂(|d_ω − d̂̄| ≥ u_j)` per threshold.
    pub frequencies: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluctuationTable {
    pub replicas: usize,
    pub thresholds: Vec<f64>,
    pub rows: Vec<FluctuationRow>,
    pub fit: Option<TalagrandFit>,
}

impl FluctuationTable {
    /// Envelope value for a row and threshold under the fitted constants.
    pub fn envelope(&self, row: usize, j: usize) -> Option<f64> {
        let fit = self.fit?;
        Some(talagrand_bound(self.thresholds[j], self.rows[row].word_distance as f64, fit.c1, fit.c2))
    }
}

/// Exceedance frequencies of `|d_ω − d̂̄|`, with `d̂̄` the mean over the same
/// replicas. The resulting `O(1/√R)` centering bias is not corrected.
pub fn fluctuation_table(ens: &Ensemble, pairs: &[(Point, Point)], thresholds: &[f64]) -> Result<FluctuationTable> {
    if thresholds.iter().any(|u| !(*u >= 0.0)) {
        return Err(FppError::DomainError("thresholds must be nonnegative".into()));
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by_key(|&k| (pairs[k].0, pairs[k].1));
    let mut sources: Vec<Point> = vec![];
    let mut groups: Vec<Vec<Point>> = vec![];
    let mut slot = vec![(0usize, 0usize); pairs.len()];
    for &k in &order {
        let (x, y) = pairs[k];
        if sources.last() != Some(&x) {
            sources.push(x);
            groups.push(vec![]);
        }
        let g = groups.len() - 1;
        slot[k] = (g, groups[g].len());
        groups[g].push(y);
    }
    let values = ens.replica_distances_grouped(&sources, &groups)?;
    let mut rows = Vec::with_capacity(pairs.len());
    for (k, (x, y)) in pairs.iter().enumerate() {
        let (g, t) = slot[k];
        let v: Vec<f64> = values.iter().map(|rep| rep[g][t]).collect();
        let m = mean_and_stderr(&v);
        let frequencies = thresholds
            .iter()
            .map(|u| v.iter().filter(|w| (*w - m.value).abs() >= *u).count() as f64 / v.len() as f64)
            .collect();
        rows.push(FluctuationRow {
            x: *x,
            y: *y,
            word_distance: ens.lattice.graph_distance(x, y),
            mean: m.value,
            sample_std: sample_std(&v),
            frequencies,
        });
    }
    let samples: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.word_distance > 0)
        .flat_map(|r| {
            thresholds
                .iter()
                .zip(&r.frequencies)
                .filter(|(u, _)| **u > 0.0)
                .map(move |(u, f)| (talagrand_exponent(*u, r.word_distance as f64), *f))
        })
        .collect();
    Ok(FluctuationTable { replicas: ens.replicas, thresholds: thresholds.to_vec(), rows, fit: fit_talagrand(&samples) })
}

/// How ordered pairs are drawn from a ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSampling {
    /// Total number of ordered pairs.
    pub max_pairs: usize,
    /// Number of distinct sources; pairs are split evenly among them so
    /// one search per source and replica covers all its targets.
    pub max_sources: usize,
}

impl Default for PairSampling {
    fn default() -> Self {
        PairSampling { max_pairs: 2000, max_sources: 8 }
    }
}

/// Seeded pairs from `ball`: every ordered pair when there are at most
/// `max_pairs` of them, otherwise `max_sources` sources drawn without
/// replacement, each with an equal share of targets drawn without
/// replacement.
pub fn sample_pairs(ball: &[Point], sampling: &PairSampling, seed: u64) -> Vec<(Point, Point)> {
    let n = ball.len();
    if n == 0 {
        return vec![];
    }
    if n.saturating_mul(n) <= sampling.max_pairs {
        return ball.iter().flat_map(|x| ball.iter().map(move |y| (*x, *y))).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_src = sampling.max_sources.clamp(1, n);
    let per = (sampling.max_pairs / n_src).clamp(1, n);
    let mut pairs = Vec::with_capacity(n_src * per);
    for si in sample(&mut rng, n, n_src).into_vec() {
        for ti in sample(&mut rng, n, per).into_vec() {
            pairs.push((ball[si], ball[ti]));
        }
    }
    pairs
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluctuationSup {
    pub radius: u64,
    pub pairs: usize,
    pub replicas: usize,
    /// Replica average of `max_pairs |d_ω − d̂̄|`.
    pub mean_sup: f64,
    pub stderr: f64,
    /// `mean_sup / (r log r)^{1/2}`.
    pub envelope_ratio: f64,
    /// Largest and average over pairs of the replica frequency of
    /// `|d_ω − d̂̄| ≥ 3 s`, with `s` the pair's sample standard deviation.
    pub exceedance_3sd_max: f64,
    pub exceedance_3sd_mean: f64,
}

/// Uniform fluctuation over sampled pairs of the word ball `B(o, r)`.
pub fn fluctuation_sup(ens: &Ensemble, o: &Point, r: u64, sampling: &PairSampling, ball_budget: usize) -> Result<FluctuationSup> {
    let ball = ens.lattice.word_ball(o, r, ball_budget)?;
    let pairs = sample_pairs(ball.points(), sampling, mix64(ens.base_seed, &[0xf1_0c, r]));
    fluctuation_sup_over(ens, &pairs, r)
}

/// `fluctuation_sup` on an explicit pair list.
pub fn fluctuation_sup_over(ens: &Ensemble, pairs: &[(Point, Point)], r: u64) -> Result<FluctuationSup> {
    let mut groups: FxHashMap<Point, Vec<Point>> = FxHashMap::default();
    for (x, y) in pairs {
        groups.entry(*x).or_default().push(*y);
    }
    let mut sources: Vec<Point> = groups.keys().copied().collect();
    sources.sort();
    let targets: Vec<Vec<Point>> = sources.iter().map(|s| groups[s].clone()).collect();
    let values = ens.replica_distances_grouped(&sources, &targets)?;
    let flat: Vec<Vec<f64>> = values.into_iter().map(|rep| rep.into_iter().flatten().collect()).collect();
    let n_pairs = flat.first().map_or(0, |v| v.len());
    let means: Vec<f64> = (0..n_pairs)
        .map(|j| mean_and_stderr(&flat.iter().map(|rep| rep[j]).collect::<Vec<_>>()).value)
        .collect();
    let exceed: Vec<f64> = (0..n_pairs)
        .map(|j| {
            let col: Vec<f64> = flat.iter().map(|rep| rep[j]).collect();
            let u = 3.0 * sample_std(&col);
            if u == 0.0 {
                return 0.0;
            }
            col.iter().filter(|v| (*v - means[j]).abs() >= u).count() as f64 / col.len() as f64
        })
        .collect();
    let sups: Vec<f64> = flat
        .iter()
        .map(|rep| rep.iter().zip(&means).map(|(v, m)| (v - m).abs()).fold(0.0, f64::max))
        .collect();
    let m = mean_and_stderr(&sups);
    let rf = r as f64;
    let scale = (rf * rf.ln()).sqrt();
    Ok(FluctuationSup {
        radius: r,
        pairs: n_pairs,
        replicas: ens.replicas,
        mean_sup: m.value,
        stderr: m.stderr,
        envelope_ratio: if scale > 0.0 { m.value / scale } else { f64::NAN },
        exceedance_3sd_max: exceed.iter().copied().fold(0.0, f64::max),
        exceedance_3sd_mean: if exceed.is_empty() { 0.0 } else { exceed.iter().sum::<f64>() / exceed.len() as f64 },
    })
}
