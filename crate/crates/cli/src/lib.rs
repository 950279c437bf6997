//! Batch front end for the `fluidsec` library: configuration, commands and
//! CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod reproduce;
pub mod table;
pub mod validate;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::RunConfig;
pub use table::{ParsedTable, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Library(#[from] fluidsec::Error),
    #[error("validation failed: {0}")]
    Check(String),
}

impl CliError {
    pub fn from_config(e: fluidsec::Error) -> Self {
        CliError::Config(e.to_string())
    }

    /// 2 for bad input, 3 when a numerical contract is violated.
    pub fn exit_code(&self) -> i32 {
        use fluidsec::Error as E;
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Io(_) => 1,
            CliError::Library(E::NotSymmetric { .. } | E::NotPositiveSemidefinite { .. }) => 3,
            CliError::Library(_) => 2,
            CliError::Check(_) => 3,
        }
    }
}

const SCHEMAS: &str = "\
CSV output starts with '#' comment lines: the tool version, the command, the
fully resolved configuration between '--- config ---' markers, then notes.
Numbers carry nine significant digits.

  fit        block,size,rho,dominant,tail_sum
  spectrum   index,source,vbcm,single_rho_blocks,constant
  dist       x,cdf,pdf
  asc, sop   snr_db,power,vbcm,constant
  mc         snr_db,power,metric,mean,std_error,ci95_low,ci95_high,n,seed
  optimize   algo,best_num_ports,best_power,best_asc,objective_evaluations,iterations
             trace: iteration,num_ports,power,asc,probe
  validate   check,status,detail

Exit status: 0 success, 1 i/o failure, 2 usage or configuration error,
3 numerical contract violated (indefinite covariance, failed validation).
The FAS_SEED environment variable sets the default Monte Carlo seed.";

#[derive(Debug, Parser)]
#[command(name = "fluidsec", version, about = "Secrecy analysis of fluid antenna systems under block-correlated fading", after_long_help = SCHEMAS)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the block model to a Jakes spectrum and print the partition.
    Fit {
        /// Fit Eve's geometry instead of Alice's.
        #[arg(long)]
        eve: bool,
    },
    /// Eigenvalues of the Jakes covariance and of each fitted model.
    Spectrum {
        #[arg(long)]
        eve: bool,
        /// Read the source covariance from this CSV instead of building it.
        #[arg(long, value_name = "PATH")]
        covariance_in: Option<PathBuf>,
        /// Also write the source covariance as CSV.
        #[arg(long, value_name = "PATH")]
        covariance_out: Option<PathBuf>,
    },
    /// CDF and PDF of the maximum port amplitude.
    Dist {
        #[arg(long)]
        eve: bool,
    },
    /// Average secrecy capacity over the SNR grid.
    Asc,
    /// Secrecy outage probability over the SNR grid.
    Sop,
    /// Monte Carlo estimates under the Jakes model.
    Mc {
        #[arg(long, value_enum, default_value_t = Metric::Both)]
        metric: Metric,
    },
    /// Maximize the ASC over Alice's port count and transmit power.
    Optimize,
    /// Regenerate the data behind one of the evaluation figures.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
    },
    /// Run the fast invariant suite.
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Asc,
    Sop,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    /// SOP theory against simulation for nine (N, W) pairs.
    Fig2,
    /// Covariance heatmaps of the Jakes matrix and the three models.
    Fig3,
    /// ASC theory against simulation under several Eve SNRs.
    Fig4,
    /// ASC surfaces over (N_A, P) for three Eve port counts.
    Fig5,
    /// Grid search against gradient ascent over SNR.
    Fig6,
}

/// Flags override the configuration file, which overrides the defaults.
#[derive(Debug, Args, Default)]
pub struct Flags {
    /// Configuration file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set quadrature.sop_order=60`.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output CSV (standard output when absent).
    #[arg(long, short, global = true, value_name = "PATH")]
    pub output: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Port count for both Alice and Eve.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub n_alice: Option<usize>,
    #[arg(long, global = true)]
    pub n_eve: Option<usize>,
    /// Aperture in wavelengths for both users.
    #[arg(long, global = true)]
    pub w: Option<f64>,
    #[arg(long, global = true)]
    pub eta_alice: Option<f64>,
    #[arg(long, global = true)]
    pub eta_eve: Option<f64>,
    /// Target secrecy rate in bits/s/Hz.
    #[arg(long, global = true)]
    pub rs: Option<f64>,
    /// Block count: `auto`, `auto:<max>` or an integer.
    #[arg(long, global = true)]
    pub d: Option<String>,
    /// `least_squares` or `as_printed`.
    #[arg(long, global = true)]
    pub mode: Option<String>,
    /// Fixed correlation for the constant baseline.
    #[arg(long, global = true)]
    pub rho_fixed: Option<f64>,
    #[arg(long, global = true)]
    pub snr_min: Option<f64>,
    #[arg(long, global = true)]
    pub snr_max: Option<f64>,
    #[arg(long, global = true)]
    pub snr_step: Option<f64>,
    /// `gs` or `gd`.
    #[arg(long, global = true)]
    pub algo: Option<String>,
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    #[arg(long, global = true)]
    pub iters: Option<usize>,
    #[arg(long, global = true)]
    pub probe_interval: Option<usize>,
    #[arg(long, global = true)]
    pub analytic_grad: bool,
    /// Probe N_A - 1 as well as N_A + 1.
    #[arg(long, global = true)]
    pub symmetric_probe: bool,
    #[arg(long, global = true)]
    pub init_ports: Option<usize>,
    #[arg(long, global = true)]
    pub init_power: Option<f64>,
    /// Optimizer trace CSV.
    #[arg(long, global = true, value_name = "PATH")]
    pub trace: Option<String>,
    /// Grid size for `dist`.
    #[arg(long, global = true)]
    pub points: Option<usize>,
    /// Log progress to standard error.
    #[arg(long, short, global = true)]
    pub verbose: bool,
}

impl Flags {
    /// Defaults, then the config file, then `--set`, then dedicated flags.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        for o in &self.overrides {
            cfg.set(o)?;
        }
        let s = &mut cfg.scenario;
        if let Some(n) = self.n {
            s.n_alice = n;
            s.n_eve = n;
        }
        set(&mut s.n_alice, self.n_alice);
        set(&mut s.n_eve, self.n_eve);
        if let Some(w) = self.w {
            s.aperture_alice = w;
            s.aperture_eve = w;
        }
        set(&mut s.eta_alice, self.eta_alice);
        set(&mut s.eta_eve, self.eta_eve);
        set(&mut s.secrecy_rate, self.rs);
        set(&mut s.blocks, self.d.clone());
        set(&mut s.fit_mode, self.mode.clone());
        if self.rho_fixed.is_some() {
            s.rho_fixed = self.rho_fixed;
        }
        set(&mut s.snr_db_min, self.snr_min);
        set(&mut s.snr_db_max, self.snr_max);
        set(&mut s.snr_db_step, self.snr_step);
        set(&mut cfg.mc.seed, self.seed);
        set(&mut cfg.mc.samples, self.samples);
        let o = &mut cfg.optimize;
        set(&mut o.algo, self.algo.clone());
        set(&mut o.grid, self.grid);
        set(&mut o.learning_rate, self.lr);
        set(&mut o.iters, self.iters);
        set(&mut o.probe_interval, self.probe_interval);
        o.analytic_gradient |= self.analytic_grad;
        o.symmetric_probe |= self.symmetric_probe;
        if self.init_ports.is_some() {
            o.init_ports = self.init_ports;
        }
        if self.init_power.is_some() {
            o.init_power = self.init_power;
        }
        if self.output.is_some() {
            cfg.output.path = self.output.clone();
        }
        if self.trace.is_some() {
            cfg.output.trace = self.trace.clone();
        }
        set(&mut cfg.output.dist_points, self.points);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Comment header shared by every CSV the tool writes.
pub fn header(command: &str, cfg: &RunConfig) -> Vec<String> {
    let mut lines = vec![format!("fluidsec {} command={command}", env!("CARGO_PKG_VERSION"))];
    lines.extend(cfg.echo());
    lines
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = if cli.flags.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("fluidsec: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.flags.resolve()?;
    let output = cfg.output.path.as_deref().map(AsRef::as_ref);
    let table = match &cli.command {
        Command::Fit { eve } => commands::fit(&cfg, *eve)?,
        Command::Spectrum {
            eve,
            covariance_in,
            covariance_out,
        } => commands::spectrum(&cfg, *eve, covariance_in.as_deref(), covariance_out.as_deref())?,
        Command::Dist { eve } => commands::dist(&cfg, *eve)?,
        Command::Asc => commands::asc(&cfg)?,
        Command::Sop => commands::sop(&cfg)?,
        Command::Mc { metric } => commands::mc(&cfg, *metric)?,
        Command::Optimize => {
            let (result, trace) = commands::optimize(&cfg)?;
            if let Some(path) = &cfg.output.trace {
                trace.write_to(Some(path.as_ref()))?;
            }
            result
        }
        Command::Reproduce { figure } => reproduce::run(&cfg, *figure)?,
        Command::Validate => {
            let (table, failures) = validate::run(&cfg)?;
            table.write_to(output)?;
            if failures > 0 {
                return Err(CliError::Check(format!("{failures} check(s) failed")));
            }
            return Ok(());
        }
    };
    table.write_to(output)
}
