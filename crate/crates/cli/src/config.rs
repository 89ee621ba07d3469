//! Effective run configuration: built-in defaults, then the JSON file named by
//! `LSP_CONFIG`, then explicit flags.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

pub const CONFIG_ENV: &str = "LSP_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Separatrix,
    Portrait,
    Sweep,
    Optimize,
    Simulate,
    BeckIterate,
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub dist: String,
    pub grid: usize,
    pub tol: f64,
    pub horizon: usize,
    pub seed: u64,
    pub samples: usize,
    pub range: Option<(f64, f64)>,
    pub points: usize,
    pub terms: usize,
    pub steps: Option<usize>,
    pub x1: Option<f64>,
    pub cone: bool,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        Self {
            command,
            dist: if command == Command::BeckIterate { "beck" } else { "exp" }.into(),
            grid: 2000,
            tol: 1e-10,
            horizon: lsp_core::recursion::DEFAULT_HORIZON,
            seed: lsp_core::validate::MC_SEED,
            samples: lsp_core::validate::MC_SAMPLES,
            range: None,
            points: 100,
            terms: 60,
            steps: None,
            x1: None,
            cone: false,
            out: None,
            format: None,
            threads: None,
        }
    }

    pub fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    pub fn range_or(&self, default: (f64, f64)) -> (f64, f64) {
        self.range.unwrap_or(default)
    }

    fn apply(&mut self, p: Partial) {
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = p.$f { self.$f = v; } )* };
        }
        macro_rules! take_opt {
            ($($f:ident),*) => { $( if p.$f.is_some() { self.$f = p.$f; } )* };
        }
        take!(dist, grid, tol, horizon, seed, samples, points, terms, cone);
        take_opt!(range, steps, x1, out, format, threads);
    }
}

/// Any subset of the settings, as found in the config file or on the command line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Partial {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub dist: Option<String>,
    #[serde(default)]
    pub grid: Option<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub range: Option<(f64, f64)>,
    #[serde(default)]
    pub points: Option<usize>,
    #[serde(default)]
    pub terms: Option<usize>,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub x1: Option<f64>,
    #[serde(default)]
    pub cone: Option<bool>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
    #[serde(default)]
    pub threads: Option<usize>,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Distribution: exp, pareto:<alpha>, gauss1, sqrt or beck
    #[arg(long, global = true)]
    pub dist: Option<String>,
    /// Number of separatrix nodes
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Contraction stopping tolerance
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Orbit horizon for classification
    #[arg(long, global = true)]
    pub horizon: Option<usize>,
    /// Monte Carlo seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo sample count
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Interval as a,b
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub range: Option<String>,
    /// Number of evenly spaced points in the range
    #[arg(long, global = true)]
    pub points: Option<usize>,
    /// Approximant order N for sweeps
    #[arg(long, global = true)]
    pub terms: Option<usize>,
    /// Inverse steps for separatrix, forward steps for beck-iterate
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Emit the orbit of this x1 instead of a portrait
    #[arg(long, global = true)]
    pub x1: Option<f64>,
    /// Emit the cone-consistency report instead of a portrait
    #[arg(long, global = true)]
    pub cone: bool,
    /// Output file; standard output when absent
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Cap on worker threads
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Print the effective configuration as JSON and exit
    #[arg(long, global = true)]
    pub print_config: bool,
}

#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("range {s:?} must look like a,b"))?;
    let parse = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("range {s:?}: {t:?} is not a number"))
    };
    let (a, b) = (parse(a)?, parse(b)?);
    if !(a <= b) {
        return Err(format!("range {s:?} is empty"));
    }
    Ok((a, b))
}

impl Flags {
    pub fn to_partial(&self) -> Result<Partial, String> {
        Ok(Partial {
            command: None,
            dist: self.dist.clone(),
            grid: self.grid,
            tol: self.tol,
            horizon: self.horizon,
            seed: self.seed,
            samples: self.samples,
            range: self.range.as_deref().map(parse_range).transpose()?,
            points: self.points,
            terms: self.terms,
            steps: self.steps,
            x1: self.x1,
            cone: self.cone.then_some(true),
            out: self.out.clone(),
            format: self.format,
            threads: self.threads,
        })
    }
}

pub fn parse_config_file(text: &str) -> Result<Partial, String> {
    serde_json::from_str(text).map_err(|e| format!("config file: {e}"))
}

/// Defaults, then `file`, then `flags`. The subcommand always comes from the command line.
pub fn resolve(command: Command, file: Option<Partial>, flags: Partial) -> RunConfig {
    let mut cfg = RunConfig::defaults(command);
    if let Some(f) = file {
        cfg.apply(f);
    }
    cfg.apply(flags);
    cfg
}

impl From<RunConfig> for Partial {
    fn from(c: RunConfig) -> Self {
        Partial {
            command: Some(c.command),
            dist: Some(c.dist),
            grid: Some(c.grid),
            tol: Some(c.tol),
            horizon: Some(c.horizon),
            seed: Some(c.seed),
            samples: Some(c.samples),
            range: c.range,
            points: Some(c.points),
            terms: Some(c.terms),
            steps: c.steps,
            x1: c.x1,
            cone: Some(c.cone),
            out: c.out,
            format: c.format,
            threads: c.threads,
        }
    }
}
