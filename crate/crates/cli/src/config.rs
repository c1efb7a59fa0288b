//! Run configuration: command-line flags layered over a `key=value` file
//! layered over defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use arnold_core::ModelParams;
use clap::{Args, ValueEnum};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Flags accepted by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub a00: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub a10: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub a01: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub eps: Option<f64>,
    /// Sets `a10 = μ·a01`; cannot be combined with `--a10`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    /// Target action `I*`.
    #[arg(long = "Istar", global = true)]
    pub i_star: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write output to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Grid resolution (samples per axis).
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// File of `key=value` lines supplying defaults for any flag above.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

/// Fully resolved settings shared by all subcommands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub i_star: f64,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub grid: usize,
    /// Scattering-leg exponent `c`.
    pub c: f64,
    /// Inner accuracy exponent `a`.
    pub a: f64,
}

pub const DEFAULT_I_STAR: f64 = 4.0;
pub const DEFAULT_GRID: usize = 400;

const KEYS: &[&str] = &["a00", "a10", "a01", "eps", "mu", "Istar", "format", "out", "grid", "c", "a"];

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected key=value", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(CliError::Config(format!("config line {}: unknown key `{k}`", n + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(CliError::Config(format!("config line {}: duplicate key `{k}`", n + 1)));
        }
    }
    Ok(out)
}

fn read_config(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_text(&text)
}

fn file_value<T: std::str::FromStr>(file: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, CliError> {
    file.get(key)
        .map(|v| v.parse::<T>().map_err(|_| CliError::Config(format!("config key `{key}`: cannot parse `{v}`"))))
        .transpose()
}

fn finite(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{name} must be finite")))
    }
}

impl RunConfig {
    /// Resolves flags over the config file over defaults. `c` and `a` come
    /// from subcommand flags when present.
    pub fn resolve(args: &CommonArgs, c: Option<f64>, a: Option<f64>) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(p) => read_config(p)?,
            None => BTreeMap::new(),
        };
        let d = ModelParams::default();
        let a00 = args.a00.or(file_value(&file, "a00")?).unwrap_or(d.a00);
        let a01 = args.a01.or(file_value(&file, "a01")?).unwrap_or(d.a01);
        let eps = args.eps.or(file_value(&file, "eps")?).unwrap_or(d.eps);
        let a10_set = args.a10.or(file_value(&file, "a10")?);
        let mu_set = args.mu.or(file_value(&file, "mu")?);
        let a10 = match (a10_set, mu_set) {
            (Some(_), Some(_)) => return Err(CliError::Config("give either a10 or mu, not both".into())),
            (Some(v), None) => v,
            (None, Some(m)) => finite("mu", m)? * a01,
            (None, None) => d.a10,
        };
        let params = ModelParams::new(finite("a00", a00)?, finite("a10", a10)?, finite("a01", a01)?, finite("eps", eps)?)
            .map_err(|e| CliError::Config(e.to_string()))?;

        let format = match args.format {
            Some(f) => f,
            None => match file.get("format").map(String::as_str) {
                None | Some("csv") => Format::Csv,
                Some("json") => Format::Json,
                Some(other) => return Err(CliError::Config(format!("config key `format`: unknown format `{other}`"))),
            },
        };
        let grid = args.grid.or(file_value(&file, "grid")?).unwrap_or(DEFAULT_GRID);
        if grid < 2 {
            return Err(CliError::Config(format!("grid must be at least 2, got {grid}")));
        }
        let i_star = finite("Istar", args.i_star.or(file_value(&file, "Istar")?).unwrap_or(DEFAULT_I_STAR))?;
        let c = finite("c", c.or(file_value(&file, "c")?).unwrap_or(arnold_core::diffusion::DEFAULT_C))?;
        let a = finite("a", a.or(file_value(&file, "a")?).unwrap_or(arnold_core::diffusion::DEFAULT_A))?;
        let out = args.out.clone().or_else(|| file.get("out").map(PathBuf::from));
        Ok(Self { params, i_star, format, out, grid, c, a })
    }
}
