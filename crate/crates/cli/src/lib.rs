//! Command-line front end: configuration, domain specs and command runners.

pub mod config;
pub mod domain_spec;
pub mod error;
pub mod run;

use std::path::PathBuf;

use clap::Parser;

pub use config::{Command, ConfigMap, RunConfig};
pub use domain_spec::DomainSpec;
pub use error::{CliError, CliResult};

/// Flags mirror the configuration keys and override the config file.
#[derive(Debug, Default, clap::Args)]
pub struct Flags {
    #[arg(long)]
    pub dim: Option<String>,
    /// Quadrature nodes per segment and axis.
    #[arg(long)]
    pub points: Option<String>,
    /// Interior density points of `bulk-table`.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub max_size: Option<String>,
    #[arg(long)]
    pub connected: Option<String>,
    #[arg(long)]
    pub box_side: Option<String>,
    #[arg(long)]
    pub budget: Option<String>,
    /// Density as a fraction, e.g. 1/24.
    #[arg(long)]
    pub rho: Option<String>,
    #[arg(long)]
    pub eta: Option<String>,
    #[arg(long)]
    pub rho1: Option<String>,
    #[arg(long)]
    pub rho2: Option<String>,
    #[arg(long)]
    pub x_points: Option<String>,
    #[arg(long)]
    pub t_points: Option<String>,
    /// chain:L, box:AxB[xC] or file:path
    #[arg(long)]
    pub domain: Option<String>,
    #[arg(long)]
    pub n1: Option<String>,
    #[arg(long)]
    pub n2: Option<String>,
    #[arg(long)]
    pub u: Option<String>,
    #[arg(long)]
    pub t: Option<String>,
    /// exhaustive or anneal
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub chains: Option<String>,
    #[arg(long)]
    pub steps: Option<String>,
    #[arg(long)]
    pub temp_start: Option<String>,
    #[arg(long)]
    pub temp_end: Option<String>,
    #[arg(long)]
    pub tolerance: Option<String>,
    #[arg(long)]
    pub max_matvecs: Option<String>,
    /// zero-extended or restricted
    #[arg(long)]
    pub sigma_mode: Option<String>,
    #[arg(long)]
    pub a_estimate: Option<String>,
    /// Comma-separated chain lengths.
    #[arg(long)]
    pub lengths: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub output: Option<String>,
    #[arg(long)]
    pub threads: Option<String>,
}

impl Flags {
    pub fn to_map(&self) -> ConfigMap {
        let pairs = [
            ("dim", &self.dim),
            ("points", &self.points),
            ("grid", &self.grid),
            ("max_size", &self.max_size),
            ("connected", &self.connected),
            ("box_side", &self.box_side),
            ("budget", &self.budget),
            ("rho", &self.rho),
            ("eta", &self.eta),
            ("rho1", &self.rho1),
            ("rho2", &self.rho2),
            ("x_points", &self.x_points),
            ("t_points", &self.t_points),
            ("domain", &self.domain),
            ("n1", &self.n1),
            ("n2", &self.n2),
            ("u", &self.u),
            ("t", &self.t),
            ("strategy", &self.strategy),
            ("chains", &self.chains),
            ("steps", &self.steps),
            ("temp_start", &self.temp_start),
            ("temp_end", &self.temp_end),
            ("tolerance", &self.tolerance),
            ("max_matvecs", &self.max_matvecs),
            ("sigma_mode", &self.sigma_mode),
            ("a_estimate", &self.a_estimate),
            ("lengths", &self.lengths),
            ("x", &self.x),
            ("seed", &self.seed),
            ("output", &self.output),
            ("threads", &self.threads),
        ];
        ConfigMap(pairs.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.trim().to_string()))).collect())
    }
}

#[derive(Debug, Parser)]
#[command(name = "seglab", version, about = "Bulk tables, finite-domain bounds, segregation phase diagrams and exact ground states")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// `key = value` file; flags take precedence over its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub flags: Flags,
}

impl Cli {
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
                ConfigMap::parse(&text)?
            }
            None => ConfigMap::default(),
        };
        RunConfig::from_map(self.command, &file.overlay(self.flags.to_map()))
    }
}

/// Parses arguments, runs the command and returns the exit code. Errors go to
/// stderr as a JSON record.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = cli.resolve().and_then(|cfg| {
        if let Some(n) = cfg.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
        }
        run::run(&cfg)
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            let record = serde_json::json!({ "error": e.record() });
            eprintln!("{record}");
            e.exit_code()
        }
    }
}
