//! Command-line front end.

pub mod commands;
pub mod config;
pub mod report;

use crate::error::{Error, Result};
use clap::{Args, Parser, Subcommand};
use config::{ExperimentConfig, Format};
use std::io::Write;
use std::path::{Path, PathBuf};

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "EXTREME_GIBBS_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "extreme-gibbs",
    version,
    about = "Conditional laws of summands given an extreme sum"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tilt parameters over the a-grid.
    Tilt,
    /// Local approximations against the exact conditional law.
    Gibbs,
    /// Tail formula and exceedance mixture against the exact tail laws.
    Exceed,
    /// Full check suite; exit 0 iff every check passes.
    Validate,
}

/// Flags override the matching config keys.
#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// weibull:<k>, exp_exponential, half_gaussian or a model spec file.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Row sizes, comma separated.
    #[arg(long, global = true)]
    pub n: Option<String>,
    /// Level rule: <a>, fixed:<a>, power:<c>:<delta> or fast:<c>.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub a: Option<String>,
    /// Levels for `tilt`, comma separated.
    #[arg(long, global = true)]
    pub a_grid: Option<String>,
    /// auto, moderate or fast.
    #[arg(long, global = true)]
    pub regime: Option<String>,
    /// Oracle grid step as a fraction of s.
    #[arg(long, global = true)]
    pub grid_step: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<String>,
    /// csv or json.
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Accepted Monte Carlo draws per gibbs row (0 disables).
    #[arg(long, global = true)]
    pub mc_samples: Option<String>,
    /// Joint block size for gibbs.
    #[arg(long, global = true)]
    pub block: Option<String>,
    /// tilted or fast, for exceed.
    #[arg(long, global = true)]
    pub kernel: Option<String>,
    /// Multiplier on every validate threshold.
    #[arg(long, global = true)]
    pub tolerance_scale: Option<String>,
    /// Paired density curves CSV for gibbs.
    #[arg(long, global = true)]
    pub curves: Option<String>,
    /// Include wall-clock times in CSV output.
    #[arg(long, global = true)]
    pub timings: bool,
}

impl CommonArgs {
    /// Config file (or defaults) with flag overrides applied.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        let pairs = [
            ("model", &self.model),
            ("n", &self.n),
            ("a", &self.a),
            ("a_grid", &self.a_grid),
            ("regime", &self.regime),
            ("grid_step", &self.grid_step),
            ("seed", &self.seed),
            ("out", &self.out),
            ("format", &self.format),
            ("mc_samples", &self.mc_samples),
            ("block", &self.block),
            ("kernel", &self.kernel),
            ("tolerance_scale", &self.tolerance_scale),
            ("curves", &self.curves),
        ];
        for (key, v) in pairs {
            if let Some(v) = v {
                cfg.set(key, v)?;
            }
        }
        cfg.check()?;
        Ok(cfg)
    }
}

/// Applies the thread cap, if set. Safe to call more than once.
pub fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Error::Config(format!(
            "{THREADS_ENV} must be a positive integer, got `{v}`"
        ))
    })?;
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Runs one invocation; returns the process exit code.
pub fn run(cli: &Cli) -> Result<i32> {
    init_threads()?;
    let cfg = cli.common.resolve()?;
    let out = cfg.out.as_deref();
    let timings = cli.common.timings;
    match cli.command {
        Command::Tilt => {
            let rows = commands::cmd_tilt(&cfg)?;
            match cfg.format {
                Format::Csv => emit(out, &report::tilt_csv(&rows))?,
                Format::Json => emit(out, &report::to_json(&rows))?,
            }
            Ok(0)
        }
        Command::Gibbs => {
            let (rows, curves) = commands::cmd_gibbs(&cfg)?;
            match cfg.format {
                Format::Csv => emit(out, &report::reports_csv(&rows, timings))?,
                Format::Json => emit(out, &report::to_json(&rows))?,
            }
            if let Some(p) = &cfg.curves {
                emit(Some(p), &report::curves_csv(&curves))?;
            }
            Ok(0)
        }
        Command::Exceed => {
            let rows = commands::cmd_exceed(&cfg)?;
            match cfg.format {
                Format::Csv => emit(out, &report::reports_csv(&rows, timings))?,
                Format::Json => emit(out, &report::to_json(&rows))?,
            }
            Ok(0)
        }
        Command::Validate => {
            let summary = commands::cmd_validate(&cfg);
            let mut text = serde_json::to_string_pretty(&summary)
                .map_err(|e| Error::numeric(e.to_string()))?;
            text.push('\n');
            emit(out, &text)?;
            for c in summary.checks.iter().filter(|c| !c.passed) {
                eprintln!("FAIL {}: {}", c.name, c.detail);
            }
            Ok(if summary.passed { 0 } else { 1 })
        }
    }
}
