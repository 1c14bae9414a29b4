//! Flat experiment configuration: one TOML document, overridable from the
//! command line.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use fpp_core::average::Ensemble;
use fpp_core::engine::SearchLimits;
use fpp_core::geodesicity::{AverageOracle, MetricOracle, NormKind, NormOracle, OmegaOracle, WordOracle};
use fpp_core::{CayleyLattice, OmegaField, Point, WeightLaw};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeKind {
    /// `±e_i`.
    Standard,
    /// Every nonzero vector of `{−1, 0, 1}^d`.
    King,
    /// The `generators` list.
    Custom,
}

/// Which metric distance-based experiments run on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// Monte Carlo average distance `d̄`.
    Average,
    /// One replica `d_ω`, seeded by `seed`.
    Omega,
    Word,
    L1,
    L2,
    Linf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lattice: LatticeKind,
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<Vec<i64>>>,
    pub symmetrize: bool,
    pub law: WeightLaw,
    pub metric: MetricKind,
    pub seed: u64,
    /// Replicas for averages, and construction replicas for the
    /// empirical SAG* search.
    pub replicas: usize,
    /// Independent evaluation replicas for the empirical SAG* search.
    pub eval_replicas: usize,
    /// Batches for error bars on ball-shaped statistics.
    pub batches: usize,
    pub radii: Vec<u64>,
    /// Word radius of the λ-point search region.
    pub search_radius: i64,
    pub output_dir: PathBuf,
    /// Worker threads; 0 means all available cores.
    pub threads: usize,
    pub point_budget: usize,
    pub vertex_budget: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            lattice: LatticeKind::Standard,
            dim: 2,
            generators: None,
            symmetrize: false,
            law: WeightLaw::uniform(1.0, 2.0),
            metric: MetricKind::Average,
            seed: 1,
            replicas: 200,
            eval_replicas: 1000,
            batches: 20,
            radii: vec![8, 16, 32, 64],
            search_radius: 3,
            output_dir: PathBuf::from("fpp-out"),
            threads: 0,
            point_budget: 1 << 24,
            vertex_budget: 4_000_000,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.into()));
        if self.point_budget == 0 || self.vertex_budget == 0 {
            return bad("budgets must be positive");
        }
        if self.replicas < 2 || self.eval_replicas < 2 {
            return bad("replica counts must be at least 2");
        }
        if self.batches < 2 || self.batches > self.replicas {
            return bad("batches must lie between 2 and the replica count");
        }
        if self.radii.is_empty() || self.radii[0] == 0 || self.radii.windows(2).any(|w| w[0] >= w[1]) {
            return bad("radii must be positive and strictly ascending");
        }
        if self.lattice == LatticeKind::Custom && self.generators.is_none() {
            return bad("lattice = \"custom\" needs a generators list");
        }
        self.law.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.lattice().map(|_| ())
    }

    pub fn lattice(&self) -> Result<Arc<CayleyLattice>, CliError> {
        let lat = match self.lattice {
            LatticeKind::Standard => CayleyLattice::standard(self.dim),
            LatticeKind::King => CayleyLattice::king(self.dim),
            LatticeKind::Custom => {
                let gens = self.generators.as_deref().unwrap_or_default();
                CayleyLattice::from_vectors(self.dim, gens, self.symmetrize).map_err(|e| CliError::Config(e.to_string()))?
            }
        };
        Ok(Arc::new(lat))
    }

    pub fn limits(&self) -> SearchLimits {
        SearchLimits::default().with_max_vertices(self.vertex_budget)
    }

    pub fn ensemble(&self) -> Result<Ensemble, CliError> {
        Ok(Ensemble::new(self.lattice()?, self.law.clone(), self.seed, self.replicas)?.with_limits(self.limits()))
    }

    pub fn oracle(&self) -> Result<Box<dyn MetricOracle>, CliError> {
        let lat = self.lattice()?;
        Ok(match self.metric {
            MetricKind::Average => Box::new(AverageOracle::new(self.ensemble()?)),
            MetricKind::Omega => {
                Box::new(OmegaOracle::new(OmegaField::new(lat, self.law.clone(), self.seed)?, self.limits()))
            }
            MetricKind::Word => Box::new(WordOracle::new(lat)),
            MetricKind::L1 => Box::new(NormOracle::new(lat, NormKind::L1)),
            MetricKind::L2 => Box::new(NormOracle::new(lat, NormKind::L2)),
            MetricKind::Linf => Box::new(NormOracle::new(lat, NormKind::Linf)),
        })
    }

    pub fn origin(&self) -> Point {
        Point::origin(self.dim)
    }

    /// Thread count after the `FPP_THREADS` override; 0 lets rayon pick.
    pub fn effective_threads(&self) -> Result<usize, CliError> {
        match std::env::var("FPP_THREADS") {
            Ok(v) => v.trim().parse().map_err(|_| CliError::Config(format!("FPP_THREADS = {v:?} is not a count"))),
            Err(_) => Ok(self.threads),
        }
    }

    /// SHA-256 of the canonical JSON form of everything that influences the
    /// numbers, so thread count and output location are left out.
    pub fn hash_with(&self, command: &impl Serialize) -> String {
        let mut c = self.clone();
        c.threads = 0;
        c.output_dir = PathBuf::new();
        let doc = serde_json::json!({ "config": c, "command": command });
        hex::encode(Sha256::digest(doc.to_string().as_bytes()))
    }
}

/// `uniform:1,2`, `constant:1`, `exponential:2` or `atom:p0,atom,<law>`.
pub fn parse_law(s: &str) -> Result<WeightLaw, CliError> {
    let bad = || CliError::Config(format!("cannot parse law {s:?}"));
    let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
    let nums = |t: &str, n: usize| -> Result<Vec<f64>, CliError> {
        let v: Vec<f64> = t.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
        if v.len() == n {
            Ok(v)
        } else {
            Err(bad())
        }
    };
    let law = match kind.trim() {
        "constant" => WeightLaw::constant(nums(rest, 1)?[0]),
        "uniform" => {
            let v = nums(rest, 2)?;
            WeightLaw::uniform(v[0], v[1])
        }
        "exponential" => WeightLaw::exponential(nums(rest, 1)?[0]),
        "atom" => {
            let mut parts = rest.splitn(3, ',');
            let p0 = parts.next().and_then(|x| x.trim().parse().ok()).ok_or_else(bad)?;
            let atom = parts.next().and_then(|x| x.trim().parse().ok()).ok_or_else(bad)?;
            WeightLaw::atom_mixture(p0, atom, parse_law(parts.next().ok_or_else(bad)?)?)
        }
        _ => return Err(bad()),
    };
    law.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(law)
}

/// `3,-1` → the point `(3, −1)`.
pub fn parse_point(s: &str, dim: usize) -> Result<Point, CliError> {
    let c: Vec<i64> = s
        .split(',')
        .map(|x| x.trim().parse().map_err(|_| CliError::Config(format!("cannot parse point {s:?}"))))
        .collect::<Result<_, _>>()?;
    if c.len() != dim {
        return Err(CliError::Config(format!("point {s:?} does not have {dim} coordinates")));
    }
    Point::new(&c).map_err(|e| CliError::Config(e.to_string()))
}

pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| CliError::Config(format!("cannot parse list {s:?}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
        let mut c = c;
        c.lattice = LatticeKind::Custom;
        c.generators = Some(vec![vec![1, 0], vec![0, 1], vec![1, 1]]);
        c.symmetrize = true;
        c.law = WeightLaw::atom_mixture(0.1, 0.0, WeightLaw::constant(1.0));
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn flat_document() {
        let c = ExperimentConfig::from_toml(
            "seed = 7\nlaw = { kind = \"uniform\", lo = 1.0, hi = 3.0 }\nradii = [4, 8]\nmetric = \"word\"\n",
        )
        .unwrap();
        assert_eq!((c.seed, c.radii.as_slice(), c.metric), (7, &[4u64, 8][..], MetricKind::Word));
        assert_eq!(c.law, WeightLaw::uniform(1.0, 3.0));
        assert!(ExperimentConfig::from_toml("radii = [8, 4]").is_err());
        assert!(ExperimentConfig::from_toml("point_budget = 0").is_err());
        assert!(ExperimentConfig::from_toml("lattice = \"custom\"").is_err());
        assert!(ExperimentConfig::from_toml("colour = 1").is_err());
    }

    #[test]
    fn law_strings() {
        assert_eq!(parse_law("uniform:1,2").unwrap(), WeightLaw::uniform(1.0, 2.0));
        assert_eq!(
            parse_law("atom:0.1,0,constant:1").unwrap(),
            WeightLaw::atom_mixture(0.1, 0.0, WeightLaw::constant(1.0))
        );
        assert!(parse_law("uniform:2,1").is_err());
        assert!(parse_law("gamma:1").is_err());
        assert_eq!(parse_point("3,-1", 2).unwrap(), Point::from_slice(&[3, -1]));
        assert!(parse_point("3", 2).is_err());
    }

    #[test]
    fn hash_ignores_threads_and_output() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.threads = 8;
        b.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash_with(&"ball"), b.hash_with(&"ball"));
        b.seed = 2;
        assert_ne!(a.hash_with(&"ball"), b.hash_with(&"ball"));
        assert_ne!(a.hash_with(&"ball"), a.hash_with(&"shape"));
    }
}
