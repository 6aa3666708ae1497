use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Deserialize;
use wavemap_spectral::eigensolver::{DEFAULT_DELTA0, DEFAULT_ODE_TOL, DEFAULT_ROOT_TOL};

use crate::error::CliError;

pub const NU_FLOOR: f64 = 1e-7;
pub const NU_CEIL: f64 = 1e-2;
pub const MAX_COUNT: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Eigen,
    Functionals,
    Modulation,
    Rate,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

/// Eigenvalue, invariant-functional and modulation sweeps for near-soliton wave-map blow-up.
#[derive(Debug, Default, Parser)]
#[command(name = "wmspec", version)]
pub struct Cli {
    #[arg(long, value_enum)]
    pub command: Option<Command>,
    /// smallest ν of the log-spaced grid
    #[arg(long)]
    pub nu_min: Option<f64>,
    /// largest ν of the log-spaced grid
    #[arg(long)]
    pub nu_max: Option<f64>,
    /// number of grid points
    #[arg(long)]
    pub nu_count: Option<usize>,
    /// matching radius
    #[arg(long)]
    pub delta0: Option<f64>,
    #[arg(long)]
    pub ode_tol: Option<f64>,
    #[arg(long)]
    pub root_tol: Option<f64>,
    /// start of the modulation run
    #[arg(long)]
    pub tau0: Option<f64>,
    /// end of the shooting run (modulation) or of the closed b run (rate)
    #[arg(long)]
    pub tau_end: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// output file, or output directory for `all`; stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// worker threads, 0 for one per core
    #[arg(long)]
    pub jobs: Option<usize>,
    /// flat key = value file with the same keys as the flags; flags win
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// write the inner corrector table (y, T1, S1, U1) as CSV and exit
    #[arg(long)]
    pub dump_table: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct FileConfig {
    command: Option<Command>,
    nu_min: Option<f64>,
    nu_max: Option<f64>,
    nu_count: Option<usize>,
    delta0: Option<f64>,
    ode_tol: Option<f64>,
    root_tol: Option<f64>,
    tau0: Option<f64>,
    tau_end: Option<f64>,
    format: Option<Format>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
}

impl FileConfig {
    fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    /// ν values, largest first
    pub grid: Vec<f64>,
    pub delta0: f64,
    pub ode_tol: f64,
    pub root_tol: f64,
    pub tau0: f64,
    pub tau_end: Option<f64>,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub jobs: usize,
}

impl RunConfig {
    pub fn resolve(cli: Cli) -> Result<Self, CliError> {
        let file = match &cli.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let command = cli.command.or(file.command).ok_or_else(|| CliError::usage("--command is required"))?;
        let nu_min = cli.nu_min.or(file.nu_min).unwrap_or(1e-4);
        let nu_max = cli.nu_max.or(file.nu_max).unwrap_or(NU_CEIL);
        let count = cli.nu_count.or(file.nu_count).unwrap_or(5);
        let grid = log_grid(nu_min, nu_max, count)?;
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(CliError::usage(format!("--{name} must be positive, got {v}")))
            }
        };
        let tau0 = positive("tau0", cli.tau0.or(file.tau0).unwrap_or(25.0))?;
        if tau0 < 25.0 {
            return Err(CliError::usage(format!("--tau0 must be at least 25, got {tau0}")));
        }
        let tau_end = cli.tau_end.or(file.tau_end).map(|t| positive("tau-end", t)).transpose()?;
        if let Some(t) = tau_end.filter(|&t| t <= tau0) {
            return Err(CliError::usage(format!("--tau-end={t} must exceed --tau0={tau0}")));
        }
        Ok(Self {
            command,
            grid,
            delta0: positive("delta0", cli.delta0.or(file.delta0).unwrap_or(DEFAULT_DELTA0))?,
            ode_tol: positive("ode-tol", cli.ode_tol.or(file.ode_tol).unwrap_or(DEFAULT_ODE_TOL))?,
            root_tol: positive("root-tol", cli.root_tol.or(file.root_tol).unwrap_or(DEFAULT_ROOT_TOL))?,
            tau0,
            tau_end,
            format: cli.format.or(file.format).unwrap_or(Format::Csv),
            out: cli.out.or(file.out),
            jobs: cli.jobs.or(file.jobs).unwrap_or(0),
        })
    }
}

/// Log-spaced grid from `nu_max` down to `nu_min`, endpoints exact.
pub fn log_grid(nu_min: f64, nu_max: f64, count: usize) -> Result<Vec<f64>, CliError> {
    if count == 0 {
        return Err(CliError::usage("empty ν grid (--nu-count 0)"));
    }
    if count > MAX_COUNT {
        return Err(CliError::usage(format!("--nu-count {count} exceeds {MAX_COUNT}")));
    }
    for (name, v) in [("nu-min", nu_min), ("nu-max", nu_max)] {
        if !(v > NU_FLOOR && v <= NU_CEIL) {
            return Err(CliError::usage(format!("--{name}={v} outside ({NU_FLOOR:e}, {NU_CEIL:e}]")));
        }
    }
    if nu_min > nu_max {
        return Err(CliError::usage(format!("--nu-min={nu_min} exceeds --nu-max={nu_max}")));
    }
    if count == 1 {
        return Ok(vec![nu_max]);
    }
    let (hi, lo) = (nu_max.log10(), nu_min.log10());
    let last = count - 1;
    Ok((0..count)
        .map(|k| match k {
            0 => nu_max,
            k if k == last => nu_min,
            k => 10f64.powf(hi + (lo - hi) * k as f64 / last as f64),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("wmspec").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn grid_is_descending_with_exact_ends() {
        let g = log_grid(1e-4, 1e-2, 3).unwrap();
        assert_eq!(g[0], 1e-2);
        assert_eq!(g[2], 1e-4);
        assert_eq!(g[1], 1e-3);
        assert_eq!(log_grid(1e-4, 1e-3, 1).unwrap(), vec![1e-3]);
    }

    #[test]
    fn grid_limits_are_usage_errors() {
        for (lo, hi, n) in [(1e-4, 1e-2, 0), (1e-4, 1e-2, 201), (1e-7, 1e-2, 2), (1e-4, 2e-2, 2), (1e-3, 1e-4, 2)] {
            assert_eq!(log_grid(lo, hi, n).unwrap_err().exit_code(), 64, "{lo} {hi} {n}");
        }
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "command = \"eigen\"\nnu-count = 3\ndelta0 = 0.04\nformat = \"json\"\n").unwrap();
        let cfg = RunConfig::resolve(cli(&["--config", path.to_str().unwrap(), "--delta0", "0.06"])).unwrap();
        assert_eq!(cfg.command, Command::Eigen);
        assert_eq!(cfg.grid.len(), 3);
        assert_eq!(cfg.delta0, 0.06);
        assert_eq!(cfg.format, Format::Json);
    }

    #[test]
    fn unknown_config_key_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "command = \"eigen\"\nspeed = 3\n").unwrap();
        let err = RunConfig::resolve(cli(&["--config", path.to_str().unwrap()])).unwrap_err();
        assert_eq!(err.exit_code(), 64);
    }

    #[test]
    fn missing_command_is_a_usage_error() {
        assert_eq!(RunConfig::resolve(cli(&[])).unwrap_err().exit_code(), 64);
    }
}
