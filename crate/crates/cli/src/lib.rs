//! Command-line front end for `metabvs`.

pub mod commands;
pub mod error;
pub mod io;
pub mod settings;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

pub use error::CliError;
use settings::{default_for, Settings};

#[derive(Debug, Parser)]
#[command(
    name = "metabvs",
    version,
    about = "Bayesian variable selection with model priors informed by meta-covariates"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model prior and report PIPs, BMA coefficients and ω.
    Fit(DataArgs),
    /// Run a simulation scenario and write per-replicate metrics.
    Simulate(SimulateArgs),
    /// Enumerate every model and write its posterior probability.
    Enumerate(EnumerateArgs),
    /// Leave-one-out predictive R² of the BMA predictions.
    Loocv(DataArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Settings file of `key = value` lines keyed by flag name (e.g. burn-in = 200, standardize = false); flags override it [default: none]
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Scale g of Zellner's coefficient prior
    #[arg(long)]
    pub g_theta: Option<String>,
    /// Error variance: known:<phi>, or ig:<a0>,<b0> for an IG(a0/2, b0/2) prior
    #[arg(long)]
    pub variance: Option<String>,
    /// Gibbs sweeps per chain
    #[arg(long)]
    pub sweeps: Option<String>,
    /// Sweeps discarded at the start of each chain
    #[arg(long)]
    pub burn_in: Option<String>,
    /// Random seed; identical seeds give identical outputs
    #[arg(long)]
    pub seed: Option<String>,
    /// PIP threshold for declaring a covariate selected
    #[arg(long)]
    pub threshold: Option<String>,
    /// Directory for output files (created if missing)
    #[arg(long)]
    pub out_dir: Option<String>,
    /// Hyperprior scale for ω, or "calibrated"
    #[arg(long)]
    pub g_omega: Option<String>,
    /// Largest p handled by enumeration; Gibbs sampling is used above it
    #[arg(long)]
    pub max_enumerate: Option<String>,
    /// Iteration cap for stochastic EM
    #[arg(long)]
    pub em_iters: Option<String>,
    /// Stopping tolerance on ω for stochastic EM
    #[arg(long)]
    pub em_tol: Option<String>,
    /// Random-walk step for ω in the joint sampler
    #[arg(long)]
    pub mh_step: Option<String>,
}

impl Common {
    fn pairs(&self) -> Vec<(&'static str, Option<&String>)> {
        vec![
            ("g-theta", self.g_theta.as_ref()),
            ("variance", self.variance.as_ref()),
            ("sweeps", self.sweeps.as_ref()),
            ("burn-in", self.burn_in.as_ref()),
            ("seed", self.seed.as_ref()),
            ("threshold", self.threshold.as_ref()),
            ("out-dir", self.out_dir.as_ref()),
            ("g-omega", self.g_omega.as_ref()),
            ("max-enumerate", self.max_enumerate.as_ref()),
            ("em-iters", self.em_iters.as_ref()),
            ("em-tol", self.em_tol.as_ref()),
            ("mh-step", self.mh_step.as_ref()),
        ]
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV with columns y, x1..xp
    pub data: PathBuf,
    /// CSV with columns covariate, z1..zq (intercept added automatically)
    pub meta: Option<PathBuf>,
    /// em-exact (alias exact), em-gibbs, two-step, mcmc or beta-binomial
    #[arg(long)]
    pub method: Option<String>,
    /// Use y and X as given instead of centering and scaling them [default: standardize]
    #[arg(long)]
    pub no_standardize: bool,
    #[command(flatten)]
    pub common: Common,
}

impl DataArgs {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        let mut out = vec![
            ("method", self.method.clone()),
            ("standardize", self.no_standardize.then(|| "false".to_string())),
        ];
        out.extend(self.common.pairs().into_iter().map(|(k, v)| (k, v.cloned())));
        out
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Observations per replicate
    #[arg(long)]
    pub n: Option<String>,
    /// Covariates per replicate
    #[arg(long)]
    pub p: Option<String>,
    /// Effect of the first meta-covariate on inclusion log-odds
    #[arg(long)]
    pub omega1: Option<String>,
    /// Number of replicates
    #[arg(long)]
    pub reps: Option<String>,
    /// Equicorrelation of the columns of X
    #[arg(long)]
    pub x_corr: Option<String>,
    /// Equicorrelation of the meta-covariates
    #[arg(long)]
    pub meta_corr: Option<String>,
    /// Scenario label written to metrics.csv
    #[arg(long)]
    pub scenario: Option<String>,
    /// Comma-separated subset of ebayes_meta, ebayes_intercept, beta_binomial
    #[arg(long)]
    pub methods: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

impl SimulateArgs {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        let mut out = vec![
            ("n", self.n.clone()),
            ("p", self.p.clone()),
            ("omega1", self.omega1.clone()),
            ("reps", self.reps.clone()),
            ("x-corr", self.x_corr.clone()),
            ("meta-corr", self.meta_corr.clone()),
            ("scenario", self.scenario.clone()),
            ("methods", self.methods.clone()),
        ];
        out.extend(self.common.pairs().into_iter().map(|(k, v)| (k, v.cloned())));
        out
    }
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Smallest posterior probability written to posterior.csv
    #[arg(long)]
    pub floor: Option<String>,
    /// Comma-separated ω (intercept first) for the logistic prior, or "fitted" to estimate it with --method
    #[arg(long, allow_hyphen_values = true)]
    pub omega: Option<String>,
}

impl EnumerateArgs {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        let mut out = vec![("floor", self.floor.clone()), ("omega", self.omega.clone())];
        out.extend(self.data.pairs());
        out
    }
}

const SUBCOMMANDS: [&str; 4] = ["fit", "simulate", "enumerate", "loocv"];

/// The clap command with each flag's default appended to its help text.
pub fn command() -> clap::Command {
    let mut cmd = Cli::command();
    for name in SUBCOMMANDS {
        cmd = cmd.mut_subcommand(name, |sub| {
            let targets: Vec<(clap::Id, &'static str)> = sub
                .get_arguments()
                .filter_map(|a| a.get_long().and_then(default_for).map(|d| (a.get_id().clone(), d)))
                .collect();
            targets.into_iter().fold(sub, |sub, (id, d)| {
                sub.mut_arg(id, |a| {
                    let help = a.get_help().map(|h| h.to_string()).unwrap_or_default();
                    a.help(format!("{help} [default: {d}]"))
                })
            })
        });
    }
    cmd
}

/// Defaults, then the config file, then flags.
fn resolve(config: Option<&PathBuf>, pairs: Vec<(&'static str, Option<String>)>) -> Result<Settings, CliError> {
    let mut s = Settings::default();
    if let Some(path) = config {
        s.apply_file(path)?;
    }
    for (key, value) in pairs {
        if let Some(v) = value {
            s.set(key, &v).map_err(|m| CliError::Usage(format!("--{m}")))?;
        }
    }
    Ok(s)
}

/// Parses `args` (program name first) and runs the subcommand. Help and
/// usage errors are handled by clap, which exits the process itself.
pub fn run<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = command().get_matches_from(args);
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::Usage(e.to_string()))?;
    match cli.command {
        Command::Fit(a) => {
            let s = resolve(a.common.config.as_ref(), a.pairs())?;
            commands::fit(&a.data, a.meta.as_deref(), &s)
        }
        Command::Simulate(a) => {
            let s = resolve(a.common.config.as_ref(), a.pairs())?;
            commands::simulate(&s)
        }
        Command::Enumerate(a) => {
            let s = resolve(a.data.common.config.as_ref(), a.pairs())?;
            commands::enumerate(&a.data.data, a.data.meta.as_deref(), &s)
        }
        Command::Loocv(a) => {
            let s = resolve(a.common.config.as_ref(), a.pairs())?;
            commands::loocv(&a.data, a.meta.as_deref(), &s)
        }
    }
}
