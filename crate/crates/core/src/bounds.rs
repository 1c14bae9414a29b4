//! Path-counting lower bound `d̄ ≥ a″·d` for the average distance.
//!
//! Write `a` for the essential infimum of the law and shift weights to
//! `ω − a ≥ 0`; every path with `n ≥ d(x, y)` edges then costs at least
//! `a·n`, so `d̄ ≥ a·d + d̄'` where `d̄'` is the average distance of the
//! shifted law. For the shifted law pick a gap `δ` with
//! `λ = ν'([0, δ]) < 1/q` and a fraction `s = ε/δ ∈ (0, 1/2]`.
//!
//! If `d_ω'(x, y) ≤ ε·d(x, y)`, an ω'-geodesic with `n ≥ d` edges has at
//! least `(1 − s)n` edges of weight `≤ δ`. There are at most `qⁿ` paths of
//! length `n` from `x`, and at most `C(n, ⌊sn⌋) ≤ (s^s (1−s)^{1−s})^{−n}`
//! ways to place the heavy edges (the entropy bound, valid for every `n`
//! when `s ≤ 1/2`). Hence
//! `P(d_ω' ≤ ε d) ≤ Σ_{n ≥ d} ρⁿ = ρ^d / (1 − ρ)` with
//! `ρ = q · stirling_rate(λ, s)`. Choosing `r₀` with `ρ^{r₀}/(1 − ρ) ≤ 1/2`
//! gives `d̄' ≥ ε (1 − P) d` once `d ≥ r₀`.
//!
//! Below `r₀`, all `q` edges at `x` exceed `δ` with probability at least
//! `(1 − λ)^q`, so `d̄' ≥ (1 − λ)^q δ ≥ ((1 − λ)^q δ / r₀)·d`.

use serde::{Deserialize, Serialize};

use crate::error::{FppError, Result};
use crate::weights::WeightLaw;

/// `λ^{1−s} / (s^s (1−s)^{1−s})`, the per-step rate of the path count.
pub fn stirling_rate(lambda: f64, s: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(FppError::DomainError(format!("lambda = {lambda} outside (0, 1)")));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(FppError::DomainError(format!("epsilon/delta = {s} outside (0, 1)")));
    }
    let log = (1.0 - s) * lambda.ln() - s * s.ln() - (1.0 - s) * (1.0 - s).ln();
    Ok(log.exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateStatus {
    Valid,
    HypothesisViolated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundCertificate {
    pub q: usize,
    /// Essential infimum of the law.
    pub a: f64,
    pub delta: f64,
    /// `ν([a, a + δ])`.
    pub lambda: f64,
    pub epsilon: f64,
    /// `ρ = q · stirling_rate(λ, ε/δ) < 1`.
    pub rho: f64,
    /// Certified slope for pairs at word distance at least `r0`.
    pub a_prime: f64,
    pub r0: u64,
    /// Certified slope for all pairs.
    pub a_doubleprime: f64,
    pub status: CertificateStatus,
    pub note: String,
}

struct Candidate {
    delta: f64,
    lambda: f64,
    s: f64,
    rho: f64,
    r0: u64,
    far: f64,
    all: f64,
}

fn delta_grid() -> impl Iterator<Item = f64> {
    (-40..=40).flat_map(|j| [1.0, 1.25, 1.5, 1.75].into_iter().map(move |m| m * (j as f64).exp2()))
}

fn s_grid() -> impl Iterator<Item = f64> {
    (1..=32).map(|k| k as f64 / 64.0).chain((7..=30).map(|j| (-(j as f64)).exp2()))
}

/// Smallest `r ≥ 1` with `ρ^r / (1 − ρ) ≤ 1/2`.
fn threshold_distance(rho: f64) -> u64 {
    let need = (0.5 * (1.0 - rho)).ln() / rho.ln();
    (need.ceil().max(1.0)) as u64
}

fn evaluate(lambda: f64, delta: f64, s: f64, q: usize) -> Option<Candidate> {
    let rho = q as f64 * stirling_rate(lambda, s).ok()?;
    if rho >= 1.0 {
        return None;
    }
    let r0 = threshold_distance(rho);
    let tail = rho.powf(r0 as f64) / (1.0 - rho);
    debug_assert!(tail <= 0.5 + 1e-12);
    let far = s * delta * (1.0 - tail);
    let near = (1.0 - lambda).powi(q as i32) * delta / r0 as f64;
    Some(Candidate { delta, lambda, s, rho, r0, far, all: far.min(near) })
}

/// Certificate `d̄(x, y) ≥ a″ d(x, y)` for a lattice of degree `q`, taking
/// the best gap and fraction over fixed grids.
pub fn lower_bound_certificate(law: &WeightLaw, q: usize) -> Result<LowerBoundCertificate> {
    law.validate()?;
    if q == 0 {
        return Err(FppError::DomainError("degree must be positive".into()));
    }
    let a = law.ess_inf();
    let atom = law.mass_at(a);
    let violated = |note: String| LowerBoundCertificate {
        q,
        a,
        delta: 0.0,
        lambda: atom,
        epsilon: 0.0,
        rho: f64::NAN,
        a_prime: a,
        r0: 0,
        a_doubleprime: a,
        status: CertificateStatus::HypothesisViolated,
        note,
    };
    if law.is_deterministic() {
        return Ok(violated(format!(
            "deterministic law: the average distance is exactly {a} times the word distance"
        )));
    }
    if atom * q as f64 >= 1.0 {
        return Ok(violated(format!(
            "atom of mass {atom} at the essential infimum is not below 1/{q}; only the trivial bound a'' = a holds"
        )));
    }
    let mut best: Option<Candidate> = None;
    for delta in delta_grid() {
        let lambda = law.cdf(a + delta);
        if !(lambda > 0.0 && lambda * (q as f64) < 1.0) {
            continue;
        }
        for s in s_grid() {
            if let Some(c) = evaluate(lambda, delta, s, q) {
                if best.as_ref().map_or(true, |b| c.all > b.all) {
                    best = Some(c);
                }
            }
        }
    }
    let Some(b) = best else {
        return Err(FppError::Degenerate("no gap on the search grid certifies a bound".into()));
    };
    Ok(LowerBoundCertificate {
        q,
        a,
        delta: b.delta,
        lambda: b.lambda,
        epsilon: b.s * b.delta,
        rho: b.rho,
        a_prime: a + b.far,
        r0: b.r0,
        a_doubleprime: a + b.all,
        status: CertificateStatus::Valid,
        note: String::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stirling_rate_examples() {
        assert!((stirling_rate(0.2, 1e-6).unwrap() - 0.2).abs() < 1e-3);
        assert!((stirling_rate(0.25, 0.5).unwrap() - 1.0).abs() < 1e-12);
        // Independent evaluation of the displayed formula.
        let (l, s) = (0.3f64, 0.2f64);
        let direct = l.powf(1.0 - s) / (s.powf(s) * (1.0 - s).powf(1.0 - s));
        assert!((stirling_rate(l, s).unwrap() - direct).abs() < 1e-14);
        let mut prev = stirling_rate(0.1, 1e-4).unwrap();
        for k in 2..50 {
            let v = stirling_rate(0.1, k as f64 * 1e-4).unwrap();
            assert!(v > prev);
            prev = v;
        }
        assert!(stirling_rate(0.0, 0.5).is_err());
        assert!(stirling_rate(0.5, 1.0).is_err());
        assert!(stirling_rate(1.0, 0.5).is_err());
    }

    #[test]
    fn entropy_bound_dominates_binomials() {
        fn binom(n: u64, k: u64) -> f64 {
            (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
        }
        for n in 10..=20u64 {
            for alpha in [0.1, 0.2, 0.3, 0.4, 0.5] {
                let k = (alpha * n as f64).floor() as u64;
                let exact = binom(n, k);
                let a = k as f64 / n as f64;
                let asym = (1.0 / a).powf(a * n as f64) * (1.0 / (1.0 - a)).powf((1.0 - a) * n as f64);
                assert!(exact <= asym * (1.0 + 1e-12), "C({n},{k})");
                assert!(asym <= exact * n as f64, "C({n},{k}) = {exact} vs {asym}");
            }
        }
    }

    #[test]
    fn degenerate_and_violated_laws() {
        let c = lower_bound_certificate(&WeightLaw::constant(1.0), 4).unwrap();
        assert_eq!(c.status, CertificateStatus::HypothesisViolated);
        assert_eq!(c.a_doubleprime, 1.0);
        let m = WeightLaw::atom_mixture(0.3, 0.0, WeightLaw::constant(1.0));
        let c = lower_bound_certificate(&m, 4).unwrap();
        assert_eq!(c.status, CertificateStatus::HypothesisViolated);
        assert_eq!(c.a_doubleprime, 0.0);
    }

    #[test]
    fn valid_certificate() {
        let m = WeightLaw::atom_mixture(0.1, 0.0, WeightLaw::constant(1.0));
        let c = lower_bound_certificate(&m, 4).unwrap();
        assert_eq!(c.status, CertificateStatus::Valid);
        assert!(c.a_doubleprime > 0.0);
        assert!(c.a_doubleprime <= c.a_prime);
        assert!(c.rho < 1.0);
        assert!(c.rho.powf(c.r0 as f64) / (1.0 - c.rho) <= 0.5);
        assert!((c.rho - 4.0 * stirling_rate(c.lambda, c.epsilon / c.delta).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn positive_infimum_keeps_trivial_bound() {
        let u = WeightLaw::uniform(1.0, 2.0);
        let c = lower_bound_certificate(&u, 4).unwrap();
        assert_eq!(c.status, CertificateStatus::Valid);
        assert!(c.a_doubleprime > 1.0);
    }

    #[test]
    fn smaller_atom_never_weakens_the_bound() {
        let mut prev = 0.0;
        for k in (0..25).rev() {
            let p0 = k as f64 / 100.0;
            let law = WeightLaw::atom_mixture(p0, 0.0, WeightLaw::uniform(0.5, 1.5));
            let c = lower_bound_certificate(&law, 4).unwrap();
            assert_eq!(c.status, CertificateStatus::Valid);
            assert!(c.a_doubleprime >= prev, "p0 = {p0}");
            prev = c.a_doubleprime;
        }
    }
}
