use std::path::Path;

use rayon::prelude::*;
use wavemap_spectral::eigensolver::{ansatz_residual, eigenfunction, EigenError, SpectralContext};
use wavemap_spectral::functionals::{test_states, FunctionalReport};
use wavemap_spectral::modulation::{
    self, default_nu0, ConstantComparison, ModulationConfig, RateSample, ShootingOptions,
};
use wavemap_spectral::profiles::corrector_table;

use crate::config::{Command, RunConfig};
use crate::error::CliError;
use crate::report::{emit, Cell, Table};

pub const EIGEN_COLUMNS: &[&str] = &[
    "nu", "j", "status", "lambda", "lambda_hat", "scaled_error", "c_match", "defect", "iterations", "ansatz_ratio",
    "error",
];

pub const FUNCTIONAL_COLUMNS: &[&str] = &[
    "nu", "status", "lambda_0", "lambda_1", "ell_0_0", "ell_0_1", "ell_1_0", "ell_1_1", "offdiag_max", "frkb_0",
    "frkb_1", "frkc_0", "frkc_1", "defect_gaussian_0", "defect_gaussian_1", "defect_velocity_0",
    "defect_velocity_1", "defect_mixed_0", "defect_mixed_1", "scaling_norm_0", "scaling_norm_formula_0",
    "scaling_norm_1", "scaling_norm_formula_1", "error",
];

pub const MODULATION_COLUMNS: &[&str] =
    &["kind", "tau", "nu", "b", "beta", "beta_log_nu", "mu", "c_est", "mu_sq_diagnostic"];

pub const RATE_COLUMNS: &[&str] = &["tau", "mu", "b", "c_est", "mu_sq_diagnostic"];

pub const TABLE_COLUMNS: &[&str] = &["y", "T1", "S1", "U1"];

/// Largest shooting horizon accepted by the modulation command.
pub const MAX_SHOOTING_TAU: f64 = 1e6;
pub const DEFAULT_SHOOTING_TAU: f64 = 1e5;
pub const DEFAULT_RATE_TAU: f64 = 1e8;
const RATE_SAMPLES_PER_DECADE: usize = 10;

fn context(cfg: &RunConfig, nu: f64) -> Result<SpectralContext, EigenError> {
    SpectralContext { ode_tol: cfg.ode_tol, root_tol: cfg.root_tol, ..SpectralContext::with_delta0(nu, cfg.delta0)? }
        .validated()
}

fn sort_desc(rows: &mut [Vec<Cell>], key: impl Fn(&[Cell]) -> (f64, i64)) {
    rows.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        kb.0.total_cmp(&ka.0).then(ka.1.cmp(&kb.1))
    });
}

fn nu_key(row: &[Cell]) -> f64 {
    match row[0] {
        Cell::Float(v) => v,
        _ => f64::NAN,
    }
}

fn eigen_row(cfg: &RunConfig, nu: f64, j: usize) -> Vec<Cell> {
    let computed = context(cfg, nu).and_then(|ctx| {
        let ef = eigenfunction(&ctx, j)?;
        let ratio = ansatz_residual(&ef)?.sup_ratio;
        Ok((ef.pair, ratio))
    });
    let head = [Cell::Float(nu), Cell::Int(j as i64)];
    match computed {
        Ok((p, ratio)) => {
            let scaled = (p.lambda - p.lambda_hat).abs() / (nu * nu * nu.ln().abs());
            let mut row = head.to_vec();
            row.extend([
                Cell::text("ok"),
                Cell::float(p.lambda),
                Cell::float(p.lambda_hat),
                Cell::float(scaled),
                Cell::float(p.c_match),
                Cell::float(p.defect),
                Cell::Int(p.iterations as i64),
                Cell::float(ratio),
                Cell::Missing,
            ]);
            row
        }
        Err(e) => failed_row(&head, EIGEN_COLUMNS.len(), e),
    }
}

fn failed_row(head: &[Cell], width: usize, err: impl std::fmt::Display) -> Vec<Cell> {
    let mut row = head.to_vec();
    row.push(Cell::text("failed"));
    row.resize(width - 1, Cell::Missing);
    row.push(Cell::text(err.to_string()));
    row
}

fn is_failed(row: &[Cell], status_col: usize) -> bool {
    row[status_col] == Cell::text("failed")
}

pub fn eigen_sweep(cfg: &RunConfig) -> Table {
    let cells: Vec<(f64, usize)> = cfg.grid.iter().flat_map(|&nu| [(nu, 0), (nu, 1)]).collect();
    let mut rows: Vec<Vec<Cell>> = cells.par_iter().map(|&(nu, j)| eigen_row(cfg, nu, j)).collect();
    sort_desc(&mut rows, |r| (nu_key(r), if let Cell::Int(j) = r[1] { j } else { 0 }));
    Table { columns: EIGEN_COLUMNS, rows }
}

fn functional_row(cfg: &RunConfig, nu: f64) -> Vec<Cell> {
    let head = [Cell::Float(nu)];
    let rep = match context(cfg, nu).map_err(|e| e.to_string()).and_then(|ctx| {
        FunctionalReport::compute(&ctx).map_err(|e| e.to_string())
    }) {
        Ok(r) => r,
        Err(e) => return failed_row(&head, FUNCTIONAL_COLUMNS.len(), e),
    };
    let t = rep.transversality;
    let mut row = head.to_vec();
    row.push(Cell::text("ok"));
    row.extend(rep.lambda.map(Cell::float));
    row.extend(t.iter().flatten().map(|&v| Cell::float(v)));
    row.push(Cell::float(t[0][1].abs().max(t[1][0].abs())));
    row.extend(rep.frkb.map(Cell::float));
    row.extend(rep.frkc.map(Cell::float));
    let states = test_states();
    for (name, _) in &states {
        for j in 0..2 {
            let defect = rep.invariance.iter().find(|r| r.state == *name && r.j == j).map(|r| r.defect);
            row.push(defect.map_or(Cell::Missing, Cell::float));
        }
    }
    for c in &rep.crosschecks {
        row.push(Cell::float(c.scaling_norm));
        row.push(Cell::float(c.scaling_norm_formula));
    }
    row.push(Cell::Missing);
    row
}

pub fn functional_sweep(cfg: &RunConfig) -> Table {
    let mut rows: Vec<Vec<Cell>> = cfg.grid.par_iter().map(|&nu| functional_row(cfg, nu)).collect();
    sort_desc(&mut rows, |r| (nu_key(r), 0));
    Table { columns: FUNCTIONAL_COLUMNS, rows }
}

fn shooting_options(cfg: &RunConfig) -> ShootingOptions {
    ShootingOptions { ode_tol: cfg.ode_tol, ..ShootingOptions::default() }
}

fn summary(rates: &[RateSample]) -> String {
    let last = rates.last().expect("closed b run has samples");
    format!(
        "{} mu_sq_diagnostic={:.6} tau={:e}",
        ConstantComparison::new(last.c_est).summary(),
        last.mu_sq_diagnostic,
        last.tau
    )
}

/// Shooting trajectory followed by the closed b run, and the summary line.
pub fn modulation_run(cfg: &RunConfig) -> Result<(Table, String), CliError> {
    let tau_end = cfg.tau_end.unwrap_or(DEFAULT_SHOOTING_TAU);
    if tau_end > MAX_SHOOTING_TAU {
        return Err(CliError::usage(format!("--tau-end={tau_end} exceeds {MAX_SHOOTING_TAU:e} for modulation")));
    }
    let mc = ModulationConfig {
        tau0: cfg.tau0,
        tau_end,
        nu0: default_nu0(cfg.tau0),
        sharp_tau_end: DEFAULT_RATE_TAU.max(tau_end),
        shooting: shooting_options(cfg),
    };
    let report = modulation::run(&mc)?;
    let mut table = Table::new(MODULATION_COLUMNS);
    for s in &report.trajectory.samples {
        let r = RateSample::from_mu(s.tau, -s.b.ln(), Some(s.nu));
        let mut row = vec![
            Cell::text("trajectory"),
            Cell::float(s.tau),
            Cell::float(s.nu),
            Cell::float(s.b),
            Cell::float(s.beta),
            Cell::float(s.beta_log_nu),
        ];
        row.extend([Cell::float(r.mu), Cell::float(r.c_est), Cell::float(r.mu_sq_diagnostic)]);
        table.push(row);
    }
    for r in &report.rates {
        let mut row = vec![Cell::text("sharp_b"), Cell::float(r.tau), Cell::Missing];
        // b underflows once μ passes ~700; μ carries the value
        row.push(if r.mu < 700.0 { Cell::float(r.b) } else { Cell::Missing });
        row.extend([Cell::Missing, Cell::Missing]);
        row.extend([Cell::float(r.mu), Cell::float(r.c_est), Cell::float(r.mu_sq_diagnostic)]);
        table.push(row);
    }
    Ok((table, summary(&report.rates)))
}

/// Closed b run from the manifold-matched b(τ₀).
pub fn rate_run(cfg: &RunConfig) -> Result<(Table, String), CliError> {
    let tau_end = cfg.tau_end.unwrap_or(DEFAULT_RATE_TAU);
    let opts = shooting_options(cfg);
    let start = modulation::shoot_stable_manifold(default_nu0(cfg.tau0), cfg.tau0, cfg.tau0 + opts.window, &opts)?;
    let b0 = start.samples[0].b;
    let rates = modulation::sharp_b_integrate(b0, cfg.tau0, tau_end, RATE_SAMPLES_PER_DECADE, cfg.ode_tol)?;
    let mut table = Table::new(RATE_COLUMNS);
    for r in &rates {
        let b = if r.mu < 700.0 { Cell::float(r.b) } else { Cell::Missing };
        table.push(vec![Cell::float(r.tau), Cell::float(r.mu), b, Cell::float(r.c_est), Cell::float(r.mu_sq_diagnostic)]);
    }
    Ok((table, summary(&rates)))
}

pub fn corrector_dump() -> Table {
    let mut out = Table::new(TABLE_COLUMNS);
    for r in corrector_table().rows() {
        out.push(r.map(Cell::float).to_vec());
    }
    out
}

fn check_rows(table: &Table, status_col: usize, name: &'static str) -> Result<(), CliError> {
    if !table.rows.is_empty() && table.rows.iter().all(|r| is_failed(r, status_col)) {
        return Err(CliError::AllFailed(table.rows.len(), name));
    }
    Ok(())
}

/// Runs the configured command and writes its report.
pub fn execute(cfg: &RunConfig) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::usage(format!("--jobs {}: {e}", cfg.jobs)))?;
    pool.install(|| match cfg.command {
        Command::Eigen => {
            let t = eigen_sweep(cfg);
            emit(&t.render(cfg.format), cfg.out.as_deref())?;
            check_rows(&t, 2, "eigen")
        }
        Command::Functionals => {
            let t = functional_sweep(cfg);
            emit(&t.render(cfg.format), cfg.out.as_deref())?;
            check_rows(&t, 1, "functionals")
        }
        Command::Modulation => {
            let (t, line) = modulation_run(cfg)?;
            emit(&t.render(cfg.format), cfg.out.as_deref())?;
            eprintln!("{line}");
            Ok(())
        }
        Command::Rate => {
            let (t, line) = rate_run(cfg)?;
            emit(&t.render(cfg.format), cfg.out.as_deref())?;
            eprintln!("{line}");
            Ok(())
        }
        Command::All => execute_all(cfg),
    })
}

fn execute_all(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = cfg.out.as_deref().ok_or_else(|| CliError::usage("--command all needs --out <directory>"))?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let write = |name: &str, t: &Table| -> Result<(), CliError> {
        let path = dir.join(format!("{name}.{}", cfg.format.extension()));
        emit(&t.render(cfg.format), Some(Path::new(&path)))
    };
    let eigen = eigen_sweep(cfg);
    write("eigen", &eigen)?;
    let functionals = functional_sweep(cfg);
    write("functionals", &functionals)?;
    let (modulation, line) = modulation_run(cfg)?;
    write("modulation", &modulation)?;
    eprintln!("{line}");
    check_rows(&eigen, 2, "eigen")?;
    check_rows(&functionals, 1, "functionals")
}
