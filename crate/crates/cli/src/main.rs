use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fpp_cli::config::{parse_law, parse_list, LatticeKind};
use fpp_cli::{run_experiment, CliError, Command, ExperimentConfig, MetricKind};

/// First passage percolation laboratory.
#[derive(Parser, Debug)]
#[command(name = "fpp", version)]
struct Cli {
    /// TOML configuration file; flags below override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `uniform:1,2`, `constant:1`, `exponential:1` or `atom:p0,atom,<law>`.
    #[arg(long, global = true)]
    law: Option<String>,
    #[arg(long, global = true, value_parser = ["standard", "king"])]
    lattice: Option<String>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[arg(long, global = true, value_enum)]
    metric: Option<MetricKind>,
    #[arg(long, global = true)]
    replicas: Option<usize>,
    #[arg(long, global = true)]
    eval_replicas: Option<usize>,
    #[arg(long, global = true)]
    batches: Option<usize>,
    /// Comma-separated ascending radii.
    #[arg(long, global = true)]
    radii: Option<String>,
    #[arg(long, global = true)]
    search_radius: Option<i64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    point_budget: Option<usize>,
    #[arg(long, global = true)]
    vertex_budget: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

impl Cli {
    fn config(&self) -> Result<ExperimentConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.out {
            c.output_dir = v.clone();
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.law {
            c.law = parse_law(v)?;
        }
        if let Some(v) = &self.lattice {
            c.lattice = if v == "king" { LatticeKind::King } else { LatticeKind::Standard };
        }
        if let Some(v) = self.dim {
            c.dim = v;
        }
        if let Some(v) = self.metric {
            c.metric = v;
        }
        if let Some(v) = self.replicas {
            c.replicas = v;
        }
        if let Some(v) = self.eval_replicas {
            c.eval_replicas = v;
        }
        if let Some(v) = self.batches {
            c.batches = v;
        }
        if let Some(v) = &self.radii {
            c.radii = parse_list(v)?;
        }
        if let Some(v) = self.search_radius {
            c.search_radius = v;
        }
        if let Some(v) = self.threads {
            c.threads = v;
        }
        if let Some(v) = self.point_budget {
            c.point_budget = v;
        }
        if let Some(v) = self.vertex_budget {
            c.vertex_budget = v;
        }
        c.validate()?;
        Ok(c)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = cli.config().and_then(|c| run_experiment(&c, &cli.command));
    match result {
        Ok(m) if m.passed => ExitCode::SUCCESS,
        Ok(m) => {
            eprintln!("{}: a check failed, see {}", m.command, m.outputs.join(", "));
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
