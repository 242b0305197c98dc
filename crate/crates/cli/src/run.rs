//! Subcommand implementations: build the numerical objects from a validated
//! config, run, and emit CSV/JSON artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use bcslab_core::critical::{
    sweep_fit, tc_report, tc_upper_bound, tc_bisect_with_kernels, SweepRow, TcEstimate, TcOptions,
    Thm27Bound,
};
use bcslab_core::discretize::{build_grid, kernel_k_max, KernelMatrix, RadialGrid};
use bcslab_core::gap::{stationarity_residuals, GapKernel};
use bcslab_core::linear::verdict_from_kernels;
use bcslab_core::selftest::run_selftest;
use bcslab_core::symbols::ThermoParams;
use bcslab_core::Error as CoreError;

use crate::config::{OutputFormat, RunConfig};
use crate::emit::{write_json, Csv, CsvValue};

/// Failure classified for the exit code.
#[derive(Debug)]
pub enum RunError {
    /// Bad configuration (exit 2).
    Config(String),
    /// Numerical failure during the computation (exit 1).
    Numerical(String),
    /// I/O failure writing artifacts (exit 1).
    Io(String),
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Config(_) | CoreError::Table { .. } => RunError::Config(e.to_string()),
            CoreError::Io { .. } => RunError::Io(e.to_string()),
            other => RunError::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

type Result<T> = std::result::Result<T, RunError>;

/// What a subcommand produced; the caller prints the summary lines.
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
    /// Selftest reports failure through the exit code.
    pub failed: bool,
}

fn make_grid(cfg: &RunConfig) -> Result<Arc<RadialGrid>> {
    Ok(Arc::new(build_grid(
        cfg.n_per_panel,
        cfg.p_max,
        cfg.mu,
        cfg.grading_levels,
    )?))
}

fn thermo(cfg: &RunConfig) -> Result<ThermoParams> {
    let t = cfg.temperature.ok_or_else(|| {
        RunError::Config("missing required key 'temperature' for this subcommand".into())
    })?;
    ThermoParams::with_temperature(t, cfg.mu).map_err(Into::into)
}

fn tc_options(cfg: &RunConfig) -> TcOptions {
    TcOptions {
        ell_max: cfg.ell_max,
        rel_tol: cfg.tc_rel_tol,
        t_floor: cfg.tc_t_floor,
        upper_bracket: cfg.tc_upper_bracket,
    }
}

fn out_path(dir: &Path, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)
        .map_err(|e| RunError::Io(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir.join(name))
}

// ---------------------------------------------------------------- spectrum

#[derive(Serialize)]
struct SectorJson {
    ell: usize,
    lambda_min: f64,
}

#[derive(Serialize)]
struct SpectrumJson<'a> {
    config: &'a BTreeMap<String, String>,
    per_ell: Vec<SectorJson>,
    unstable: bool,
    indeterminate: bool,
    minimizing_ell: usize,
    tol_eig: f64,
}

pub fn run_spectrum(cfg: &RunConfig, serial: bool, out_dir: &Path) -> Result<RunOutcome> {
    let grid = make_grid(cfg)?;
    let params = thermo(cfg)?;
    let kernels = build_sector_kernels(cfg, &grid, serial)?;
    let report = verdict_from_kernels(&kernels, params)?;
    let json = SpectrumJson {
        config: cfg.resolved(),
        per_ell: report
            .per_ell
            .iter()
            .map(|s| SectorJson {
                ell: s.ell,
                lambda_min: s.lambda_min,
            })
            .collect(),
        unstable: report.unstable,
        indeterminate: report.indeterminate,
        minimizing_ell: report.minimizing_ell,
        tol_eig: report.tol_eig,
    };
    let path = out_path(out_dir, "spectrum.json")?;
    write_json(&path, &json)?;
    Ok(RunOutcome {
        files: vec![path],
        summary: vec![format!(
            "unstable: {} (minimizing ell = {}, lambda_min = {:.6e})",
            report.unstable,
            report.minimizing_ell,
            report.min_lambda()
        )],
        failed: false,
    })
}

fn build_sector_kernels(
    cfg: &RunConfig,
    grid: &Arc<RadialGrid>,
    serial: bool,
) -> Result<Vec<KernelMatrix>> {
    let k_max = kernel_k_max(grid);
    let ells: Vec<usize> = (0..=cfg.ell_max).collect();
    let build = |ell: &usize| -> std::result::Result<KernelMatrix, CoreError> {
        let kernel = cfg.potential.sector_kernel(*ell, k_max)?;
        Ok(KernelMatrix::build(grid, &kernel))
    };
    let results: Vec<std::result::Result<KernelMatrix, CoreError>> = if serial {
        ells.iter().map(build).collect()
    } else {
        ells.par_iter().map(build).collect()
    };
    results
        .into_iter()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(Into::into)
}

// --------------------------------------------------------------------- gap

#[derive(Serialize)]
struct GapSummaryJson<'a> {
    config: &'a BTreeMap<String, String>,
    converged_to_trivial: bool,
    iterations: usize,
    residual_sup: f64,
    xi: f64,
    f_value: f64,
    f_normal: f64,
    r_alpha: f64,
    r_gamma: f64,
    delta_peak: f64,
    delta_at_fermi: f64,
}

pub fn run_gap(cfg: &RunConfig, _serial: bool, out_dir: &Path) -> Result<RunOutcome> {
    let grid = make_grid(cfg)?;
    let params = thermo(cfg)?;
    let kernel = GapKernel::build(&grid, &cfg.potential)?;
    let state =
        bcslab_core::gap::solve_gap_with_kernel(&kernel, &cfg.potential, params, &cfg.solver)?;
    let residuals = stationarity_residuals(&state, &kernel);

    let mut files = Vec::new();
    if cfg.output_format != OutputFormat::Json {
        let mut csv = Csv::new(&["p", "delta", "energy", "gamma", "alpha"]);
        for (i, &p) in grid.nodes().iter().enumerate() {
            csv.float_row(&[p, state.delta[i], state.energy[i], state.gamma[i], state.alpha[i]]);
        }
        let path = out_path(out_dir, "gap.csv")?;
        csv.write(&path)?;
        files.push(path);
    }
    if cfg.output_format != OutputFormat::Csv {
        let json = GapSummaryJson {
            config: cfg.resolved(),
            converged_to_trivial: state.converged_to_trivial,
            iterations: state.iterations,
            residual_sup: state.residual_sup,
            xi: state.xi,
            f_value: state.f_value,
            f_normal: state.f_normal,
            r_alpha: residuals.r_alpha,
            r_gamma: residuals.r_gamma,
            delta_peak: state.delta_peak(),
            delta_at_fermi: state.delta_at_fermi(),
        };
        let path = out_path(out_dir, "gap_summary.json")?;
        write_json(&path, &json)?;
        files.push(path);
    }
    Ok(RunOutcome {
        files,
        summary: vec![if state.converged_to_trivial {
            format!("trivial solution after {} iterations", state.iterations)
        } else {
            format!(
                "nontrivial solution: peak Delta = {:.6e}, Xi = {:.6e}, {} iterations",
                state.delta_peak(),
                state.xi,
                state.iterations
            )
        }],
        failed: false,
    })
}

// ---------------------------------------------------------------------- tc

#[derive(Serialize)]
struct TcEstimateJson {
    status: &'static str,
    t_c: Option<f64>,
    bracket_lo: Option<f64>,
    bracket_hi: Option<f64>,
    t_floor: Option<f64>,
}

impl From<&TcEstimate> for TcEstimateJson {
    fn from(e: &TcEstimate) -> Self {
        match *e {
            TcEstimate::Value { t_c, bracket } => TcEstimateJson {
                status: "value",
                t_c: Some(t_c),
                bracket_lo: Some(bracket.0),
                bracket_hi: Some(bracket.1),
                t_floor: None,
            },
            TcEstimate::AtOrBelowFloor { t_floor } => TcEstimateJson {
                status: "at_or_below_floor",
                t_c: None,
                bracket_lo: None,
                bracket_hi: None,
                t_floor: Some(t_floor),
            },
        }
    }
}

#[derive(Serialize)]
struct Thm27Json {
    status: &'static str,
    value: Option<f64>,
    hypothesis_lhs: Option<f64>,
    a: f64,
}

fn thm27_json(bound: &Option<Thm27Bound>) -> Thm27Json {
    let a = bcslab_core::symbols::a_constant();
    match bound {
        None => Thm27Json {
            status: "not_applicable",
            value: None,
            hypothesis_lhs: None,
            a,
        },
        Some(Thm27Bound::Bound(b)) if b.is_finite() => Thm27Json {
            status: "bound",
            value: Some(*b),
            hypothesis_lhs: None,
            a,
        },
        Some(Thm27Bound::Bound(_)) => Thm27Json {
            status: "unconstrained",
            value: None,
            hypothesis_lhs: None,
            a,
        },
        Some(Thm27Bound::HypothesisViolated { lhs, a }) => Thm27Json {
            status: "hypothesis_violated",
            value: None,
            hypothesis_lhs: Some(*lhs),
            a: *a,
        },
    }
}

#[derive(Serialize)]
struct TcJson<'a> {
    config: &'a BTreeMap<String, String>,
    tc_eigen: TcEstimateJson,
    tc_bs: TcEstimateJson,
    minimizing_ell: usize,
    bs_norm_at_tc: Option<f64>,
    cross_rel_diff: Option<f64>,
    bound_rough: f64,
    bound_thm27: Thm27Json,
    rough_satisfied: Option<bool>,
    thm27_satisfied: Option<bool>,
}

pub fn run_tc(cfg: &RunConfig, _serial: bool, out_dir: &Path) -> Result<RunOutcome> {
    let grid = make_grid(cfg)?;
    let report = tc_report(&grid, &cfg.potential, cfg.mu, &tc_options(cfg))?;
    let json = TcJson {
        config: cfg.resolved(),
        tc_eigen: (&report.tc_eigen).into(),
        tc_bs: (&report.tc_bs).into(),
        minimizing_ell: report.minimizing_ell,
        bs_norm_at_tc: report.bs_norm_at_tc,
        cross_rel_diff: report.cross_rel_diff,
        bound_rough: report.bound_rough,
        bound_thm27: thm27_json(&report.bound_thm27),
        rough_satisfied: report.rough_satisfied,
        thm27_satisfied: report.thm27_satisfied,
    };
    let path = out_path(out_dir, "tc.json")?;
    write_json(&path, &json)?;
    let line = match (report.tc_eigen.value(), report.tc_bs.value()) {
        (Some(a), Some(b)) => format!(
            "T_c(eigen) = {a:.6e}, T_c(BS) = {b:.6e}, rel diff {:.3e}",
            report.cross_rel_diff.unwrap_or(f64::NAN)
        ),
        _ => "T_c at or below the resolution floor".to_string(),
    };
    Ok(RunOutcome {
        files: vec![path],
        summary: vec![line],
        failed: false,
    })
}

// ------------------------------------------------------------------- sweep

#[derive(Serialize)]
struct SweepRowJson {
    lambda: f64,
    tc: TcEstimateJson,
    bound_thm27: Thm27Json,
}

#[derive(Serialize)]
struct SweepFitJson {
    decay: f64,
    intercept: f64,
    r2: f64,
    n_used: usize,
}

#[derive(Serialize)]
struct SweepJson<'a> {
    config: &'a BTreeMap<String, String>,
    rows: Vec<SweepRowJson>,
    fit: Option<SweepFitJson>,
}

pub fn run_sweep(cfg: &RunConfig, serial: bool, out_dir: &Path) -> Result<RunOutcome> {
    let grid = make_grid(cfg)?;
    let opts = tc_options(cfg);
    let base = &cfg.potential;
    let one = |lam: &f64| -> std::result::Result<SweepRow, CoreError> {
        let spec = base.with_lambda_scale(base.lambda_scale() * lam)?;
        let kernels: std::result::Result<Vec<_>, CoreError> = (0..=opts.ell_max)
            .map(|ell| {
                let k = spec.sector_kernel(ell, kernel_k_max(&grid))?;
                Ok(KernelMatrix::build(&grid, &k))
            })
            .collect();
        let bis = tc_bisect_with_kernels(&kernels?, &spec, cfg.mu, &opts)?;
        let bound = tc_upper_bound(&spec, cfg.mu)?;
        Ok(SweepRow {
            lambda: *lam,
            tc: bis.estimate,
            bound,
        })
    };
    let results: Vec<std::result::Result<SweepRow, CoreError>> = if serial {
        cfg.sweep_lambdas.iter().map(one).collect()
    } else {
        cfg.sweep_lambdas.par_iter().map(one).collect()
    };
    let rows: Vec<SweepRow> = results
        .into_iter()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let fit = sweep_fit(&rows);

    let mut files = Vec::new();
    if cfg.output_format != OutputFormat::Json {
        let mut csv = Csv::new(&["lambda", "t_c", "bound_thm27"]);
        for row in &rows {
            let tc_cell = match row.tc.value() {
                Some(t) => CsvValue::Float(t),
                None => CsvValue::Text(String::new()),
            };
            let bound_cell = match row.bound {
                Thm27Bound::Bound(b) if b.is_finite() => CsvValue::Float(b),
                _ => CsvValue::Text(String::new()),
            };
            csv.row(&[CsvValue::Float(row.lambda), tc_cell, bound_cell]);
        }
        let path = out_path(out_dir, "sweep.csv")?;
        csv.write(&path)?;
        files.push(path);
    }
    if cfg.output_format != OutputFormat::Csv {
        let json = SweepJson {
            config: cfg.resolved(),
            rows: rows
                .iter()
                .map(|r| SweepRowJson {
                    lambda: r.lambda,
                    tc: (&r.tc).into(),
                    bound_thm27: thm27_json(&Some(r.bound)),
                })
                .collect(),
            fit: fit.map(|f| SweepFitJson {
                decay: f.decay,
                intercept: f.intercept,
                r2: f.r2,
                n_used: f.n_used,
            }),
        };
        let path = out_path(out_dir, "sweep_fit.json")?;
        write_json(&path, &json)?;
        files.push(path);
    }
    let line = match fit {
        Some(f) => format!(
            "{} points, fit ln T_c = -{:.4}/lambda + {:.4} (r^2 = {:.6})",
            rows.len(),
            f.decay,
            f.intercept,
            f.r2
        ),
        None => format!("{} points, too few resolvable for a fit", rows.len()),
    };
    Ok(RunOutcome {
        files,
        summary: vec![line],
        failed: false,
    })
}

// ---------------------------------------------------------------- selftest

#[derive(Serialize)]
struct InvariantJson {
    name: &'static str,
    passed: bool,
    detail: String,
}

#[derive(Serialize)]
struct SelftestJson<'a> {
    config: &'a BTreeMap<String, String>,
    invariants: Vec<InvariantJson>,
    all_passed: bool,
}

pub fn run_selftest_cmd(cfg: &RunConfig, _serial: bool, out_dir: &Path) -> Result<RunOutcome> {
    let grid = make_grid(cfg)?;
    let results = run_selftest(&grid, &cfg.potential, cfg.mu, cfg.temperature)?;
    let all_passed = results.iter().all(|r| r.passed);
    let summary: Vec<String> = results
        .iter()
        .map(|r| {
            format!(
                "[{}] {}: {}",
                if r.passed { "PASS" } else { "FAIL" },
                r.name,
                r.detail
            )
        })
        .collect();
    let json = SelftestJson {
        config: cfg.resolved(),
        invariants: results
            .into_iter()
            .map(|r| InvariantJson {
                name: r.name,
                passed: r.passed,
                detail: r.detail,
            })
            .collect(),
        all_passed,
    };
    let path = out_path(out_dir, "selftest.json")?;
    write_json(&path, &json)?;
    Ok(RunOutcome {
        files: vec![path],
        summary,
        failed: !all_passed,
    })
}

