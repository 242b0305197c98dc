//! Critical-temperature determination by two independent routes, the bounds
//! that constrain it, the counterterm quadrature identity, and the
//! coupling-strength sweep with its exponential-smallness fit.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::discretize::{kernel_k_max, BsAssembler, KernelMatrix, RadialGrid};
use crate::error::{Error, Result};
use crate::linear::{bs_norm, verdict_from_kernels};
use crate::potential::PotentialSpec;
use crate::quad;
use crate::symbols::{a_constant, f_counterterm, f_counterterm_inverse, ThermoParams};

/// A located critical temperature, or the admission that none was detectable
/// above the resolution floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TcEstimate {
    Value { t_c: f64, bracket: (f64, f64) },
    AtOrBelowFloor { t_floor: f64 },
}

impl TcEstimate {
    pub fn value(&self) -> Option<f64> {
        match *self {
            TcEstimate::Value { t_c, .. } => Some(t_c),
            TcEstimate::AtOrBelowFloor { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TcOptions {
    pub ell_max: usize,
    /// Relative bracket width at which bisection stops; valid in (1e-6, 1e-1).
    pub rel_tol: f64,
    /// Override of the resolution floor 1e-6 max(mu, 1).
    pub t_floor: Option<f64>,
    /// Override of the upper bracket 0.5 ||V_-||_inf.
    pub upper_bracket: Option<f64>,
}

impl Default for TcOptions {
    fn default() -> Self {
        TcOptions {
            ell_max: 4,
            rel_tol: 1e-3,
            t_floor: None,
            upper_bracket: None,
        }
    }
}

impl TcOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 1e-6 && self.rel_tol < 1e-1) {
            return Err(Error::Config(format!(
                "tc rel_tol must lie in (1e-6, 1e-1) (got {})",
                self.rel_tol
            )));
        }
        Ok(())
    }

    pub fn floor_for(&self, mu: f64) -> f64 {
        self.t_floor.unwrap_or(1e-6 * mu.max(1.0))
    }
}

/// Result of the eigenvalue-sign bisection.
#[derive(Debug, Clone)]
pub struct TcBisect {
    pub estimate: TcEstimate,
    /// Sector attaining the minimal eigenvalue just below T_c.
    pub minimizing_ell: usize,
}

/// Locate T_c by bisecting the sign of min over sectors of
/// lambda_min(K_{1/T,mu} + V) in T. The upper bracket starts at the rough
/// bound T_c <= ||V_-||_inf / 2; if no instability exists at the floor the
/// result is reported as "at or below floor".
pub fn tc_bisect(
    grid: &Arc<RadialGrid>,
    spec: &PotentialSpec,
    mu: f64,
    opts: &TcOptions,
) -> Result<TcBisect> {
    opts.validate()?;
    let kernels = build_kernels(grid, spec, opts.ell_max)?;
    tc_bisect_with_kernels(&kernels, spec, mu, opts)
}

/// `tc_bisect` with prebuilt sector kernels (reused across sweep points at
/// fixed potential shape only; kernels scale linearly in lambda so the sweep
/// rebuilds them per multiplier).
pub fn tc_bisect_with_kernels(
    kernels: &[KernelMatrix],
    spec: &PotentialSpec,
    mu: f64,
    opts: &TcOptions,
) -> Result<TcBisect> {
    opts.validate()?;
    let t_floor = opts.floor_for(mu);
    let sup_minus = spec.norms().linf_minus;
    let t_hi_init = match opts.upper_bracket {
        Some(t) => t,
        None => {
            if sup_minus == 0.0 {
                // V >= 0: K + V >= 2/beta > 0 at every temperature
                return Ok(TcBisect {
                    estimate: TcEstimate::AtOrBelowFloor { t_floor },
                    minimizing_ell: 0,
                });
            }
            0.5 * sup_minus
        }
    };
    let verdict_at = |t: f64| -> Result<(bool, usize)> {
        let params = ThermoParams::at_temperature(t, mu)?;
        let report = verdict_from_kernels(kernels, params)?;
        Ok((report.min_lambda() < 0.0, report.minimizing_ell))
    };

    let (floor_unstable, floor_ell) = verdict_at(t_floor)?;
    if !floor_unstable {
        return Ok(TcBisect {
            estimate: TcEstimate::AtOrBelowFloor { t_floor },
            minimizing_ell: floor_ell,
        });
    }
    let mut lo = t_floor;
    let mut hi = t_hi_init;
    let mut grow = 0;
    while verdict_at(hi)?.0 {
        hi *= 2.0;
        grow += 1;
        if grow > 8 {
            return Err(Error::Range(format!(
                "still unstable at T = {hi:.3e}, far above the rough bound {t_hi_init:.3e}"
            )));
        }
    }
    let mut min_ell = floor_ell;
    while hi - lo > opts.rel_tol * 0.5 * (hi + lo) {
        let mid = 0.5 * (lo + hi);
        let (unstable, ell) = verdict_at(mid)?;
        if unstable {
            lo = mid;
            min_ell = ell;
        } else {
            hi = mid;
        }
    }
    Ok(TcBisect {
        estimate: TcEstimate::Value {
            t_c: 0.5 * (lo + hi),
            bracket: (lo, hi),
        },
        minimizing_ell: min_ell,
    })
}

fn build_kernels(
    grid: &Arc<RadialGrid>,
    spec: &PotentialSpec,
    ell_max: usize,
) -> Result<Vec<KernelMatrix>> {
    let k_max = kernel_k_max(grid);
    (0..=ell_max)
        .map(|ell| Ok(KernelMatrix::build(grid, &spec.sector_kernel(ell, k_max)?)))
        .collect()
}

/// Result of the Birman-Schwinger norm bisection.
#[derive(Debug, Clone)]
pub struct TcBirmanSchwinger {
    pub estimate: TcEstimate,
    /// ||B_0^beta|| re-evaluated at the returned critical point.
    pub norm_at_tc: Option<f64>,
    pub ell: usize,
}

/// Locate T_c from || V_-^{1/2} (K_{beta,mu} + V_+)^{-1} V_-^{1/2} || = 1 by
/// bisection in beta, in which variable the norm is strictly increasing. The
/// sector is the minimizing one from a coarse eigenvalue check.
pub fn tc_birman_schwinger(
    grid: &Arc<RadialGrid>,
    spec: &PotentialSpec,
    mu: f64,
    opts: &TcOptions,
) -> Result<TcBirmanSchwinger> {
    opts.validate()?;
    let t_floor = opts.floor_for(mu);
    let sup_minus = spec.norms().linf_minus;
    if sup_minus == 0.0 {
        return Ok(TcBirmanSchwinger {
            estimate: TcEstimate::AtOrBelowFloor { t_floor },
            norm_at_tc: None,
            ell: 0,
        });
    }
    // coarse eigenvalue check: confirms T_c > floor and picks the sector
    let coarse = tc_bisect(
        grid,
        spec,
        mu,
        &TcOptions {
            rel_tol: 0.05,
            ..*opts
        },
    )?;
    let ell = coarse.minimizing_ell;
    if matches!(coarse.estimate, TcEstimate::AtOrBelowFloor { .. }) {
        return Ok(TcBirmanSchwinger {
            estimate: TcEstimate::AtOrBelowFloor { t_floor },
            norm_at_tc: None,
            ell,
        });
    }
    let assembler = BsAssembler::new(grid, spec, ell)?;
    let norm_at_beta = |beta: f64| -> Result<f64> {
        let params = ThermoParams::new(crate::symbols::Beta::Finite(beta), mu)?;
        bs_norm(&assembler.assemble(params, 0.0)?)
    };
    let t_hi = opts.upper_bracket.unwrap_or(0.5 * sup_minus);
    let mut beta_lo = 1.0 / t_hi;
    if let TcEstimate::Value { bracket, .. } = coarse.estimate {
        // tighten the beta bracket around the coarse transition
        beta_lo = 1.0 / (2.0 * bracket.1);
    }
    let mut beta_hi = 1.0 / t_floor;
    let n_lo = norm_at_beta(beta_lo)?;
    let n_hi = norm_at_beta(beta_hi)?;
    if n_lo >= 1.0 || n_hi <= 1.0 {
        return Err(Error::Range(format!(
            "Birman-Schwinger norm does not cross 1 on the bracket: \
             ||B|| = {n_lo:.6e} at beta = {beta_lo:.6e}, {n_hi:.6e} at beta = {beta_hi:.6e}"
        )));
    }
    while beta_hi - beta_lo > opts.rel_tol * 0.5 * (beta_hi + beta_lo) {
        let mid = 0.5 * (beta_lo + beta_hi);
        if norm_at_beta(mid)? >= 1.0 {
            beta_hi = mid;
        } else {
            beta_lo = mid;
        }
    }
    let beta_c = 0.5 * (beta_lo + beta_hi);
    Ok(TcBirmanSchwinger {
        estimate: TcEstimate::Value {
            t_c: 1.0 / beta_c,
            bracket: (1.0 / beta_hi, 1.0 / beta_lo),
        },
        norm_at_tc: Some(norm_at_beta(beta_c)?),
        ell,
    })
}

/// The hypothesis-conditional upper bound of the f-inverse form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Thm27Bound {
    /// Bound (mu/2) f^{-1}((a - c ||V_-||_{3/2}) / (mu^{1/2} ||V_-||_1)).
    Bound(f64),
    /// (1/3)(2/pi)^{4/3} ||V_-||_{3/2} >= a: no bound claimed.
    HypothesisViolated { lhs: f64, a: f64 },
}

/// Constant (1/3)(2/pi)^{4/3} in front of the L^{3/2} norm.
pub fn hls_constant() -> f64 {
    (2.0 / PI).powf(4.0 / 3.0) / 3.0
}

/// Evaluate the conditional upper bound on T_c for mu > 0.
pub fn tc_upper_bound(spec: &PotentialSpec, mu: f64) -> Result<Thm27Bound> {
    if !(mu > 0.0) {
        return Err(Error::Domain(format!(
            "the f-inverse bound needs mu > 0 (got {mu})"
        )));
    }
    let a = a_constant();
    let lhs = hls_constant() * spec.norms().l32_minus;
    if lhs >= a {
        return Ok(Thm27Bound::HypothesisViolated { lhs, a });
    }
    let l1 = spec.norms().l1_minus;
    if l1 == 0.0 {
        // V_- vanishes: T_c = 0 and any positive bound holds
        return Ok(Thm27Bound::Bound(f64::INFINITY));
    }
    let arg = (a - lhs) / (mu.sqrt() * l1);
    Ok(Thm27Bound::Bound(0.5 * mu * f_counterterm_inverse(arg)?))
}

/// Rough bound T_c <= ||V_-||_inf / 2.
pub fn tc_rough_bound(spec: &PotentialSpec) -> f64 {
    0.5 * spec.norms().linf_minus
}

/// Both quadrature routes to the L^1 norm of the resolvent difference kernel
/// k_{e,mu}(p) = 1/(|p^2-mu|+e) - 1/(p^2+mu+e).
#[derive(Debug, Clone, Copy)]
pub struct IdentityCheck {
    /// Direct quadrature of 4 pi int p^2 k_{e,mu}(p) dp.
    pub lhs: f64,
    /// (2 pi)^3 mu^{1/2} f(e/mu).
    pub rhs: f64,
    /// |lhs - rhs| / rhs.
    pub defect: f64,
}

/// Evaluate both sides of the ||k_{e,mu}||_1 identity.
pub fn counterterm_identity_check(e: f64, mu: f64) -> Result<IdentityCheck> {
    if !(e > 0.0 && mu > 0.0) {
        return Err(Error::Domain(format!(
            "identity check needs e > 0 and mu > 0 (got e={e}, mu={mu})"
        )));
    }
    let pf = mu.sqrt();
    let cut = 100.0 * pf.max(1.0);
    let body = quad::integrate_adaptive_with_breaks(
        |p| {
            let k = 1.0 / ((p * p - mu).abs() + e) - 1.0 / (p * p + mu + e);
            p * p * k
        },
        0.0,
        cut,
        &[pf],
        1e-12,
    )?;
    // beyond the cut: p^2 k = 2 mu p^2/((p^2-a)(p^2+b)) with a = mu-e, b = mu+e
    // integrates to a/(p^2-a) + b/(p^2+b) in partial fractions (a + b = 2 mu)
    let a = mu - e;
    let b = mu + e;
    let tail_b = b.sqrt() * (b.sqrt() / cut).atan();
    let tail_a = if a > 0.0 {
        a.sqrt() * (a.sqrt() / cut).atanh()
    } else if a < 0.0 {
        -(-a).sqrt() * ((-a).sqrt() / cut).atan()
    } else {
        0.0
    };
    let lhs = 4.0 * PI * (body + tail_a + tail_b);
    let rhs = (2.0 * PI).powi(3) * mu.sqrt() * f_counterterm(e / mu)?;
    Ok(IdentityCheck {
        lhs,
        rhs,
        defect: ((lhs - rhs) / rhs).abs(),
    })
}

/// One row of the coupling sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    /// Multiplier applied to the base potential's lambda_scale.
    pub lambda: f64,
    pub tc: TcEstimate,
    pub bound: Thm27Bound,
}

/// Least-squares fit of ln T_c = -c / lambda + b.
#[derive(Debug, Clone, Copy)]
pub struct SweepFit {
    /// Decay constant c (positive for the expected exponential smallness).
    pub decay: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n_used: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Present when at least three sweep points resolved above the floor.
    pub fit: Option<SweepFit>,
}

/// Compute T_c across coupling multipliers and fit the exponential-smallness
/// law on the resolvable window (points at the floor are censored).
pub fn lambda_sweep(
    grid: &Arc<RadialGrid>,
    base: &PotentialSpec,
    mu: f64,
    lambdas: &[f64],
    opts: &TcOptions,
) -> Result<SweepResult> {
    if lambdas.is_empty() {
        return Err(Error::Config("sweep needs at least one lambda".into()));
    }
    if lambdas.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
        return Err(Error::Config("sweep lambdas must be positive".into()));
    }
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lam in lambdas {
        let spec = base.with_lambda_scale(base.lambda_scale() * lam)?;
        let bis = tc_bisect(grid, &spec, mu, opts)?;
        let bound = tc_upper_bound(&spec, mu)?;
        rows.push(SweepRow {
            lambda: lam,
            tc: bis.estimate,
            bound,
        });
    }
    let fit = sweep_fit(&rows);
    Ok(SweepResult { rows, fit })
}

/// Fit ln T_c = -c/lambda + b over the resolvable rows (needs at least 3).
pub fn sweep_fit(rows: &[SweepRow]) -> Option<SweepFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.tc.value().map(|t| (1.0 / r.lambda, t.ln())))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let (slope, intercept, r2) = line_fit(&pts);
    Some(SweepFit {
        decay: -slope,
        intercept,
        r2,
        n_used: pts.len(),
    })
}

fn line_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| {
            let e = p.1 - (intercept + slope * p.0);
            e * e
        })
        .sum();
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (slope, intercept, r2)
}

/// Full critical-temperature report: both methods, both bounds, agreement.
#[derive(Debug, Clone)]
pub struct TcReport {
    pub tc_eigen: TcEstimate,
    pub tc_bs: TcEstimate,
    pub minimizing_ell: usize,
    pub bs_norm_at_tc: Option<f64>,
    /// |tc_eigen - tc_bs| / tc_eigen when both are resolved.
    pub cross_rel_diff: Option<f64>,
    pub bound_rough: f64,
    pub bound_thm27: Option<Thm27Bound>,
    /// T_c <= ||V_-||_inf / 2, when T_c is resolved.
    pub rough_satisfied: Option<bool>,
    /// T_c <= the f-inverse bound, when both are available.
    pub thm27_satisfied: Option<bool>,
}

pub fn tc_report(
    grid: &Arc<RadialGrid>,
    spec: &PotentialSpec,
    mu: f64,
    opts: &TcOptions,
) -> Result<TcReport> {
    let eigen = tc_bisect(grid, spec, mu, opts)?;
    let bs = tc_birman_schwinger(grid, spec, mu, opts)?;
    let bound_rough = tc_rough_bound(spec);
    let bound_thm27 = if mu > 0.0 {
        Some(tc_upper_bound(spec, mu)?)
    } else {
        None
    };
    let cross = match (eigen.estimate.value(), bs.estimate.value()) {
        (Some(a), Some(b)) => Some((a - b).abs() / a),
        _ => None,
    };
    let rough_satisfied = eigen
        .estimate
        .value()
        .map(|t| t <= bound_rough * (1.0 + 1e-9));
    let thm27_satisfied = match (&bound_thm27, eigen.estimate.value()) {
        (Some(Thm27Bound::Bound(b)), Some(t)) => Some(t <= *b * (1.0 + 1e-9)),
        _ => None,
    };
    Ok(TcReport {
        tc_eigen: eigen.estimate,
        tc_bs: bs.estimate,
        minimizing_ell: eigen.minimizing_ell,
        bs_norm_at_tc: bs.norm_at_tc,
        cross_rel_diff: cross,
        bound_rough,
        bound_thm27,
        rough_satisfied,
        thm27_satisfied,
    })
}
