use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sdc_core::harness::config::{ExperimentConfig, ExperimentKind};
use sdc_core::harness::experiments::run_experiment;
use sdc_core::quadrature::NodeFamily;

#[derive(Parser)]
#[command(name = "sdc", about = "Spectral deferred corrections for second-order IVPs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quadrature nodes and weights.
    Nodes(Common),
    /// Spectral radius of the one-step amplification matrix over (dt kappa, dt mu).
    StabilityMap(Common),
    /// Spectral radius of the iteration matrix over (dt kappa, dt mu).
    ConvergenceMap(Common),
    /// Stability limits on the mu = 0 axis, SDC and Picard.
    StabilityLimits(Common),
    /// Local error orders after one step.
    LocalOrder(Common),
    /// Global error orders at the final time.
    GlobalOrder(Common),
    /// Error against force evaluations for several methods.
    WorkPrecision(Common),
    /// Energy error of the undamped oscillator over a long run.
    Hamiltonian(Common),
    /// A single SDC trajectory.
    Integrate(Common),
    /// Print the default configuration of an experiment as TOML.
    DefaultConfig {
        /// Experiment name, e.g. global-order.
        experiment: String,
    },
}

#[derive(Args)]
struct Common {
    /// TOML file overriding the experiment defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for random starting values.
    #[arg(long)]
    seed: Option<u64>,
    /// Node counts, comma separated.
    #[arg(long = "M", value_delimiter = ',')]
    m: Vec<usize>,
    /// Iteration counts, comma separated.
    #[arg(long = "K", value_delimiter = ',')]
    k: Vec<usize>,
    /// Node family: legendre, lobatto, radau, radau-left.
    #[arg(long)]
    nodes: Option<NodeFamily>,
    /// Step sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    dt: Vec<f64>,
}

impl Common {
    fn resolve(&self, kind: ExperimentKind) -> sdc_core::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(kind, p)?,
            None => ExperimentConfig::defaults(kind),
        };
        if let Some(out) = &self.out {
            cfg.out.clone_from(out);
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if !self.m.is_empty() {
            cfg.rule.nodes.clone_from(&self.m);
        }
        if !self.k.is_empty() {
            cfg.sweeper.iterations.clone_from(&self.k);
        }
        if let Some(f) = self.nodes {
            cfg.rule.family = f;
        }
        if !self.dt.is_empty() {
            cfg.time.dt.clone_from(&self.dt);
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = match &cli.command {
        Command::Nodes(c) => (ExperimentKind::Nodes, c),
        Command::StabilityMap(c) => (ExperimentKind::StabilityMap, c),
        Command::ConvergenceMap(c) => (ExperimentKind::ConvergenceMap, c),
        Command::StabilityLimits(c) => (ExperimentKind::StabilityLimits, c),
        Command::LocalOrder(c) => (ExperimentKind::LocalOrder, c),
        Command::GlobalOrder(c) => (ExperimentKind::GlobalOrder, c),
        Command::WorkPrecision(c) => (ExperimentKind::WorkPrecision, c),
        Command::Hamiltonian(c) => (ExperimentKind::Hamiltonian, c),
        Command::Integrate(c) => (ExperimentKind::Integrate, c),
        Command::DefaultConfig { experiment } => {
            return match experiment
                .parse()
                .and_then(|k| ExperimentConfig::defaults(k).to_toml_string())
            {
                Ok(s) => {
                    print!("{s}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            };
        }
    };
    let result = common.resolve(kind).and_then(|cfg| run_experiment(&cfg));
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
