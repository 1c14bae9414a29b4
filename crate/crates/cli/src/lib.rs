//! Experiment orchestration for the percolation laboratory: configuration,
//! subcommands, CSV/JSON emission and the acceptance suite behind
//! `reproduce`.

pub mod config;
pub mod experiments;
pub mod output;
pub mod suite;

use std::time::Instant;

use fpp_core::FppError;
use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, MetricKind};
pub use suite::Profile;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Experiment(#[from] FppError),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("experiment failed: {0}")]
    Failed(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    /// 2 for anything wrong with the request, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Experiment(FppError::InvalidLaw(_) | FppError::InvalidLattice(_)) => 2,
            CliError::Experiment(FppError::DimensionMismatch { .. }) => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum NormChoice {
    /// Estimated from a larger ball of the same data.
    Estimated,
    L1,
    L2,
    Linf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, clap::Subcommand)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// ω-ball B_ω(0, r) of the replica selected by the seed.
    Ball {
        #[arg(long)]
        radius: f64,
    },
    /// Monte Carlo estimate of the average distance between two points.
    Avgdist {
        #[arg(long)]
        x: Option<String>,
        #[arg(long)]
        y: String,
    },
    /// Exceedance frequencies of |d_ω − d̄| over sampled pairs of a ball.
    Fluct {
        #[arg(long)]
        radius: u64,
        #[arg(long, default_value = "1,2,4")]
        thresholds: String,
        #[arg(long, default_value_t = 2000)]
        pairs: usize,
        #[arg(long, default_value_t = 8)]
        sources: usize,
    },
    /// Best λ-point between two points and its deficiency.
    Sagstar {
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: String,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
    },
    /// m-part near-equipartition built from λ-points.
    SagSeq {
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: String,
        #[arg(long)]
        parts: u64,
        #[arg(long, default_value_t = 1.0)]
        alpha0: f64,
    },
    /// Checks B(0, (1 + 1/N) r) ⊂ [B(0, r)]_{6r/N} with N(α) = c (α / log α)^{1/2}.
    Monotone {
        #[arg(long)]
        radius: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
    },
    /// Hull identity for explicit or seeded random symmetric sets.
    HullCheck {
        /// `x,y;x,y;…`; negations are added.
        #[arg(long)]
        points: Option<String>,
        #[arg(long, default_value_t = 20)]
        sets: usize,
        #[arg(long, default_value = "2,3,4,5")]
        n: String,
    },
    /// Hausdorff distance between two rescaled balls.
    Cauchy {
        #[arg(long)]
        r1: u64,
        #[arg(long)]
        r2: u64,
    },
    /// Inner and outer defects of the balls against the limit norm.
    Shape {
        #[arg(long, value_enum, default_value = "estimated")]
        norm: NormChoice,
        /// Radius the norm is estimated from; default 8 × the largest radius.
        #[arg(long)]
        norm_radius: Option<u64>,
        /// Constant c of the SAG profile fed to the induction trace.
        #[arg(long, default_value_t = 1.0)]
        sag_c: f64,
        /// Base constant C₀ of the induction trace.
        #[arg(long, default_value_t = 1.0)]
        c0: f64,
    },
    /// Lower-bound certificate d̄ ≥ a″ d.
    Certify {
        /// Lattice degree q; defaults to the configured lattice.
        #[arg(long)]
        degree: Option<usize>,
    },
    /// Runs the acceptance suite and writes a pass/fail report.
    Reproduce {
        #[arg(long, value_enum, default_value = "quick")]
        profile: Profile,
        /// Do not spawn the two thread-count runs of the determinism check.
        #[arg(long)]
        skip_determinism: bool,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ball { .. } => "ball",
            Command::Avgdist { .. } => "avgdist",
            Command::Fluct { .. } => "fluct",
            Command::Sagstar { .. } => "sagstar",
            Command::SagSeq { .. } => "sag-seq",
            Command::Monotone { .. } => "monotone",
            Command::HullCheck { .. } => "hull-check",
            Command::Cauchy { .. } => "cauchy",
            Command::Shape { .. } => "shape",
            Command::Certify { .. } => "certify",
            Command::Reproduce { .. } => "reproduce",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub step: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub artifact_version: String,
    pub command: String,
    pub threads: usize,
    pub outputs: Vec<String>,
    pub timings: Vec<Timing>,
    /// False when the experiment ran but reported a failed check.
    pub passed: bool,
}

/// Runs one experiment on a dedicated worker pool and writes its outputs
/// and `manifest.json` to the configured directory.
pub fn run_experiment(config: &ExperimentConfig, command: &Command) -> Result<RunManifest, CliError> {
    config.validate()?;
    let threads = config.effective_threads()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {threads} threads: {e}")))?;
    let mut out = output::Outputs::create(&config.output_dir)?;
    let start = Instant::now();
    let passed = pool.install(|| experiments::dispatch(config, command, &mut out))?;
    let mut timings = out.take_timings();
    timings.push(Timing { step: "total".into(), seconds: start.elapsed().as_secs_f64() });
    log::info!("{} finished in {:.1} s on {threads} threads", command.name(), start.elapsed().as_secs_f64());
    let mut manifest = RunManifest {
        config_hash: config.hash_with(command),
        artifact_version: env!("CARGO_PKG_VERSION").into(),
        command: command.name().into(),
        threads: pool.current_num_threads(),
        outputs: out.files().to_vec(),
        timings,
        passed,
    };
    manifest.outputs.push("manifest.json".into());
    out.write_json("manifest.json", &manifest)?;
    Ok(manifest)
}
