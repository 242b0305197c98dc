//! Runtime invariant battery behind the `selftest` subcommand: quick,
//! deterministic checks of the core identities and inequalities on the
//! configured potential plus a standard internal scenario.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::critical::counterterm_identity_check;
use crate::discretize::{assemble_birman_schwinger, build_grid, RadialGrid};
use crate::error::Result;
use crate::gap::{reconstruct_state, solve_gap, SolverOptions};

use crate::potential::PotentialSpec;
use crate::symbols::{a_constant, f_counterterm, g_ratio, gamma0, k_symbol, Beta, ThermoParams};

#[derive(Debug, Clone)]
pub struct InvariantResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> InvariantResult {
    InvariantResult {
        name,
        passed,
        detail,
    }
}

/// Run the battery on the configured potential and chemical potential.
/// Returns one result per invariant; all should pass on a healthy build.
pub fn run_selftest(
    grid: &Arc<RadialGrid>,
    spec: &PotentialSpec,
    mu: f64,
    temperature: Option<f64>,
) -> Result<Vec<InvariantResult>> {
    let mut out = Vec::new();
    out.push(quadrature_exactness(grid));
    out.push(sandwich_bound());
    out.push(k_floor_and_monotonicity());
    out.push(g_bound());
    out.push(f_monotone_and_reference());
    out.push(counterterm_identity());
    out.push(decomposition_pointwise(spec));
    out.push(kernel_symmetry(grid, spec)?);
    out.push(bs_properties(grid, spec, mu)?);
    out.push(gap_state_identities(grid, spec, mu, temperature)?);
    Ok(out)
}

fn quadrature_exactness(grid: &RadialGrid) -> InvariantResult {
    let p_max = grid.p_max();
    let exact = p_max.powi(3) / 3.0;
    let got: f64 = grid
        .nodes()
        .iter()
        .zip(grid.weights())
        .map(|(&p, &w)| w * p * p)
        .sum();
    let rel = ((got - exact) / exact).abs();
    check(
        "quadrature_exactness",
        rel < 1e-12,
        format!("sum w p^2 vs p_max^3/3 relative defect {rel:.3e}"),
    )
}

fn sandwich_bound() -> InvariantResult {
    let a = a_constant();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let p2 = 16.0 * rng.random::<f64>();
        let beta = 0.1 + 99.9 * rng.random::<f64>();
        let mu = -2.0 + 6.0 * rng.random::<f64>();
        let params = ThermoParams::new(Beta::Finite(beta), mu).unwrap();
        let k = k_symbol(p2, &params);
        let envelope = (p2 - mu).abs() + 2.0 / beta;
        worst = worst.max(a * envelope - k).max(k - envelope);
    }
    check(
        "lemma_sandwich",
        worst <= 1e-12,
        format!("max violation of a(|p^2-mu|+2/b) <= K <= |p^2-mu|+2/b: {worst:.3e}"),
    )
}

fn k_floor_and_monotonicity() -> InvariantResult {
    let mut rng = ChaCha8Rng::seed_from_u64(0xf100);
    let mut ok = true;
    let mut detail = String::from("K >= 2/beta and K nonincreasing in beta");
    for _ in 0..500 {
        let p2 = 16.0 * rng.random::<f64>();
        let mu = -2.0 + 6.0 * rng.random::<f64>();
        let b1 = 0.1 + 50.0 * rng.random::<f64>();
        let b2 = b1 + 50.0 * rng.random::<f64>();
        let k1 = k_symbol(p2, &ThermoParams::new(Beta::Finite(b1), mu).unwrap());
        let k2 = k_symbol(p2, &ThermoParams::new(Beta::Finite(b2), mu).unwrap());
        if k1 < 2.0 / b1 - 1e-13 || k2 > k1 + 1e-13 {
            ok = false;
            detail = format!("violation at p2={p2}, mu={mu}, beta {b1} vs {b2}");
            break;
        }
    }
    check("k_symbol_floor_monotone", ok, detail)
}

fn g_bound() -> InvariantResult {
    let a = a_constant();
    let mut worst: f64 = 1.0;
    let mut t = 1e-6;
    while t < 100.0 {
        worst = worst.min(g_ratio(t));
        t *= 1.05;
    }
    let ok = (a - 0.654).abs() < 1e-3 && worst >= a - 1e-12;
    check(
        "g_ratio_infimum",
        ok,
        format!("a = {a:.6}, sampled min g = {worst:.6}"),
    )
}

fn f_monotone_and_reference() -> InvariantResult {
    let f1 = f_counterterm(1.0).unwrap();
    let reference = 0.074364274884088841; // high-precision evaluation of f(1)
    let mut monotone = true;
    let mut prev = f64::INFINITY;
    for &t in &[1e-3, 1e-2, 0.1, 1.0, 10.0] {
        let v = f_counterterm(t).unwrap();
        if v >= prev {
            monotone = false;
        }
        prev = v;
    }
    let ok = monotone && (f1 - reference).abs() < 1e-8;
    check(
        "f_counterterm",
        ok,
        format!("f(1) = {f1:.12e} (reference {reference:.12e}), monotone: {monotone}"),
    )
}

fn counterterm_identity() -> InvariantResult {
    match counterterm_identity_check(0.1, 1.0) {
        Ok(c) => check(
            "counterterm_identity",
            c.defect <= 1e-6,
            format!("defect {:.3e}", c.defect),
        ),
        Err(e) => check("counterterm_identity", false, e.to_string()),
    }
}

fn decomposition_pointwise(spec: &PotentialSpec) -> InvariantResult {
    let mut worst = 0.0_f64;
    let mut r = 0.0;
    while r <= spec.r_support() {
        let (vp, vm) = (spec.value_plus(r), spec.value_minus(r));
        worst = worst
            .max((vp * vm).abs())
            .max((vp - vm - spec.value(r)).abs());
        r += spec.r_support() / 997.0;
    }
    check(
        "potential_decomposition",
        worst < 1e-12,
        format!("max pointwise defect of V = V+ - V-, V+ V- = 0: {worst:.3e}"),
    )
}

fn kernel_symmetry(grid: &Arc<RadialGrid>, spec: &PotentialSpec) -> Result<InvariantResult> {
    let kernel = spec.sector_kernel(0, crate::discretize::kernel_k_max(grid))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x57a7);
    let mut worst = 0.0_f64;
    for _ in 0..200 {
        let p = grid.p_max() * rng.random::<f64>();
        let q = grid.p_max() * rng.random::<f64>();
        worst = worst.max((kernel.eval(p, q) - kernel.eval(q, p)).abs());
    }
    Ok(check(
        "kernel_symmetry",
        worst <= 1e-12,
        format!("max |W(p,q) - W(q,p)| on random pairs: {worst:.3e}"),
    ))
}

fn bs_properties(grid: &Arc<RadialGrid>, spec: &PotentialSpec, mu: f64) -> Result<InvariantResult> {
    if spec.norms().l1_minus == 0.0 {
        return Ok(check(
            "birman_schwinger",
            true,
            "V_- = 0: sandwich vanishes, nothing to check".into(),
        ));
    }
    let params = ThermoParams::new(Beta::Finite(5.0 / mu.max(0.5)), mu)?;
    let mut prev = f64::INFINITY;
    let mut ok = true;
    let mut norms = Vec::new();
    for &e in &[0.0, 0.1, 0.5, 2.0] {
        let b = assemble_birman_schwinger(grid, spec, 0, params, e)?;
        let vals = crate::linear::symmetric_eigenvalues_sorted(b.matrix())?;
        let (lo, hi) = (vals[0], vals[vals.len() - 1]);
        if lo < -1e-10 * hi.abs().max(1e-300) {
            ok = false;
        }
        if hi > prev + 1e-12 {
            ok = false;
        }
        prev = hi;
        norms.push(hi);
    }
    Ok(check(
        "birman_schwinger",
        ok,
        format!("norms decreasing in e, PSD: {norms:?}"),
    ))
}

fn gap_state_identities(
    grid: &Arc<RadialGrid>,
    spec: &PotentialSpec,
    mu: f64,
    temperature: Option<f64>,
) -> Result<InvariantResult> {
    let params = match temperature {
        Some(t) if t > 0.0 => ThermoParams::at_temperature(t, mu)?,
        _ => ThermoParams::zero_temperature(mu)?,
    };
    let state = solve_gap(grid, spec, params, &SolverOptions::default())?;
    let mut worst_adm = 0.0_f64;
    let mut worst_tanh = 0.0_f64;
    for (i, &p) in grid.nodes().iter().enumerate() {
        let (g, a, e) = (state.gamma[i], state.alpha[i], state.energy[i]);
        worst_adm = worst_adm.max(a * a - g * (1.0 - g));
        if let Beta::Finite(b) = params.beta {
            // tanh(beta E/2)(p^2-mu) = (1-2 gamma) E
            let lhs = (0.5 * b * e).tanh() * (p * p - mu);
            let rhs = (1.0 - 2.0 * g) * e;
            worst_tanh = worst_tanh.max((lhs - rhs).abs());
        }
    }
    // trivial states must reproduce the normal state exactly
    let gamma_defect = if state.converged_to_trivial {
        let (g, _) = reconstruct_state(&state.delta, grid, &params);
        grid.nodes()
            .iter()
            .zip(&g)
            .map(|(&p, &gi)| (gi - gamma0(p * p, &params)).abs())
            .fold(0.0_f64, f64::max)
    } else {
        0.0
    };
    let ok = worst_adm <= 1e-12 && worst_tanh <= 1e-10 && gamma_defect <= 1e-12
        && (state.converged_to_trivial || state.residual_sup <= 1e-8);
    Ok(check(
        "gap_state_identities",
        ok,
        format!(
            "admissibility defect {worst_adm:.3e}, tanh identity defect {worst_tanh:.3e}, \
             trivial-gamma defect {gamma_defect:.3e}, residual {:.3e}, trivial: {}",
            state.residual_sup, state.converged_to_trivial
        ),
    ))
}

/// Default scenario when no configuration is supplied: the standard gaussian
/// test case.
pub fn run_selftest_default() -> Result<Vec<InvariantResult>> {
    let grid = Arc::new(build_grid(16, 8.0, 1.0, 6)?);
    let spec = PotentialSpec::gaussian(5.0, 1.0)?;
    run_selftest(&grid, &spec, 1.0, Some(0.5))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_battery_passes() {
        let results = run_selftest_default().unwrap();
        for r in &results {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
        assert!(results.len() >= 10);
    }
}
