//! Independent oracles for the assembled sector operators and the
//! Birman-Schwinger sandwich.

use std::f64::consts::PI;
use std::sync::Arc;

use bcslab_core::discretize::{
    assemble_birman_schwinger, assemble_sector_operator, build_grid, BsAssembler, RadialGrid,
};
use bcslab_core::linear::{bs_norm, lowest_eigenvalue, symmetric_eigenvalues_sorted};
use bcslab_core::potential::PotentialSpec;
use bcslab_core::quad;
use bcslab_core::symbols::{a_constant, gamma0, k_symbol, Beta, ThermoParams};

fn grid() -> Arc<RadialGrid> {
    Arc::new(build_grid(16, 8.0, 1.0, 6).unwrap())
}

#[test]
fn normal_density_matches_adaptive_quadrature() {
    // 4 pi sum w p^2 gamma0(p^2) against an adaptive quadrature at beta=5, mu=1
    let grid = grid();
    let params = ThermoParams::new(Beta::Finite(5.0), 1.0).unwrap();
    let got = 4.0 * PI * grid.integrate_p2(|p| gamma0(p * p, &params));
    let want = 4.0
        * PI
        * quad::integrate_adaptive(|p| p * p * gamma0(p * p, &params), 0.0, 8.0, 1e-12).unwrap();
    assert!(
        ((got - want) / want).abs() < 1e-8,
        "density {got:.12e} vs oracle {want:.12e}"
    );
}

#[test]
fn quadratic_form_matches_continuum_integrals() {
    // <h, H h> for h(p) = exp(-p^2/2) against the direct kinetic integral plus
    // the closed-form interaction integral int V |alpha|^2 dx / (4 pi), where
    // alpha(x) = exp(-x^2/2) is the position representation of h.
    let grid = grid();
    let spec = PotentialSpec::gaussian(1.0, 1.0).unwrap();
    let params = ThermoParams::new(Beta::Finite(2.0), 1.0).unwrap();
    let op = assemble_sector_operator(&grid, &spec, 0, params).unwrap();
    let c = op.coefficients_of(|p| (-0.5 * p * p).exp());
    let got = op.quadratic_form(&c);

    let kinetic = quad::integrate_adaptive(
        |q| k_symbol(q * q, &params) * (-q * q).exp() * q * q,
        0.0,
        8.0,
        1e-12,
    )
    .unwrap();
    // int V |alpha|^2 dx = -lambda (2 pi sigma^2/(1+2 sigma^2))^{3/2} for the
    // gaussian pair; the radial double form is that over 4 pi
    let interaction = -(2.0 * PI / 3.0_f64).powf(1.5) / (4.0 * PI);
    let want = kinetic + interaction;
    assert!(
        (got - want).abs() < 1e-6,
        "quadratic form {got:.10e} vs continuum {want:.10e}"
    );
}

#[test]
fn refinement_and_cutoff_stability_of_lambda_min() {
    let spec = PotentialSpec::gaussian(5.0, 1.0).unwrap();
    let params = ThermoParams::at_temperature(0.5, 1.0).unwrap();
    let coarse = Arc::new(build_grid(16, 8.0, 1.0, 6).unwrap());
    let dense = Arc::new(build_grid(32, 8.0, 1.0, 6).unwrap());
    let wide = Arc::new(build_grid(16, 12.0, 1.0, 6).unwrap());
    let l0 = lowest_eigenvalue(&assemble_sector_operator(&coarse, &spec, 0, params).unwrap()).unwrap();
    let l1 = lowest_eigenvalue(&assemble_sector_operator(&dense, &spec, 0, params).unwrap()).unwrap();
    let l2 = lowest_eigenvalue(&assemble_sector_operator(&wide, &spec, 0, params).unwrap()).unwrap();
    assert!(
        (l0 - l1).abs() < 1e-6 * (l0.abs() + 1.0),
        "node-doubling drift {:.3e}",
        (l0 - l1).abs()
    );
    assert!(
        (l0 - l2).abs() < 1e-6 * (l0.abs() + 1.0),
        "cutoff drift {:.3e}",
        (l0 - l2).abs()
    );
}

#[test]
fn pure_positive_potential_keeps_temperature_floor() {
    // V >= 0: lambda_min >= 2/beta (K >= 2/beta and V+ >= 0)
    let grid = grid();
    let spec = PotentialSpec::gaussian(-2.0, 1.0).unwrap(); // repulsive
    for beta in [0.5, 2.0, 20.0] {
        let params = ThermoParams::new(Beta::Finite(beta), 1.0).unwrap();
        let op = assemble_sector_operator(&grid, &spec, 0, params).unwrap();
        let lo = lowest_eigenvalue(&op).unwrap();
        assert!(
            lo >= 2.0 / beta - 1e-12,
            "beta={beta}: lambda_min = {lo} < 2/beta"
        );
    }
}

#[test]
fn lambda_min_nonincreasing_in_beta() {
    let grid = grid();
    let spec = PotentialSpec::gaussian(5.0, 1.0).unwrap();
    let betas = [0.5, 1.0, 2.0, 5.0, 20.0, 200.0];
    let mut prev = f64::INFINITY;
    for &b in &betas {
        let params = ThermoParams::new(Beta::Finite(b), 1.0).unwrap();
        let lo = lowest_eigenvalue(&assemble_sector_operator(&grid, &spec, 0, params).unwrap())
            .unwrap();
        assert!(lo <= prev + 1e-12, "lambda_min increased at beta={b}");
        prev = lo;
    }
}

#[test]
fn bs_operator_is_psd_and_decreasing_in_shift() {
    let grid = grid();
    let spec = PotentialSpec::gaussian(5.0, 1.0).unwrap();
    let params = ThermoParams::new(Beta::Finite(3.0), 1.0).unwrap();
    let assembler = BsAssembler::new(&grid, &spec, 0).unwrap();
    let mut prev = f64::INFINITY;
    for &e in &[0.0, 0.05, 0.2, 1.0, 5.0] {
        let b = assembler.assemble(params, e).unwrap();
        let vals = symmetric_eigenvalues_sorted(b.matrix()).unwrap();
        let (lo, hi) = (vals[0], *vals.last().unwrap());
        assert!(lo >= -1e-10 * hi, "B not PSD at e={e}: min eig {lo:.3e}");
        assert!(hi < prev, "||B|| not strictly decreasing at e={e}");
        prev = hi;
    }
}

#[test]
fn bs_norm_vanishes_at_high_temperature() {
    let grid = grid();
    let spec = PotentialSpec::gaussian(5.0, 1.0).unwrap();
    let assembler = BsAssembler::new(&grid, &spec, 0).unwrap();
    let mut prev = f64::INFINITY;
    for &beta in &[1.0, 0.1, 0.01] {
        let params = ThermoParams::new(Beta::Finite(beta), 1.0).unwrap();
        let n = bs_norm(&assembler.assemble(params, 0.0).unwrap()).unwrap();
        assert!(n < prev, "||B_0^beta|| not decaying at beta={beta}");
        prev = n;
    }
    assert!(prev < 0.1, "||B|| should approach 0 as beta -> 0 (got {prev})");
}

#[test]
fn bs_diverges_at_zero_temperature_as_shift_vanishes() {
    // T=0, mu=1, negative V: ||B_e|| grows without bound as e -> 0
    let grid = grid();
    let spec = PotentialSpec::gaussian(5.0, 1.0).unwrap();
    let params = ThermoParams::zero_temperature(1.0).unwrap();
    let assembler = BsAssembler::new(&grid, &spec, 0).unwrap();
    let mut prev = 0.0;
    for &e in &[1e-1, 1e-2, 1e-3, 1e-4] {
        let n = bs_norm(&assembler.assemble(params, e).unwrap()).unwrap();
        assert!(n > prev, "||B_e|| not increasing as e falls (e={e}: {n})");
        prev = n;
    }
    assert!(prev > 10.0, "divergence too weak: ||B_1e-4|| = {prev}");
}

#[test]
fn bs_norm_obeys_l1_l32_split_bound() {
    // ||B_e(T=0)|| <= mu^{1/2} ||V||_1 f(e/mu) + (1/3)(2/pi)^{4/3} ||V||_{3/2}
    let grid = grid();
    let spec = PotentialSpec::gaussian(5.0, 1.0).unwrap();
    let params = ThermoParams::zero_temperature(1.0).unwrap();
    let n = spec.norms();
    let hls = (2.0 / PI).powf(4.0 / 3.0) / 3.0;
    for &e in &[0.1, 1.0] {
        let b = assemble_birman_schwinger(&grid, &spec, 0, params, e).unwrap();
        let norm = bs_norm(&b).unwrap();
        let bound =
            n.l1_minus * bcslab_core::symbols::f_counterterm(e).unwrap() + hls * n.l32_minus;
        assert!(
            norm <= bound,
            "e={e}: ||B_e|| = {norm:.6} exceeds the split bound {bound:.6}"
        );
    }
}

#[test]
fn sandwich_inequality_on_random_samples() {
    use rand::Rng;
    use rand::SeedableRng;
    let a = a_constant();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x10_05);
    for _ in 0..1000 {
        let p2 = 20.0 * rng.random::<f64>();
        let beta = 0.1 + 99.9 * rng.random::<f64>();
        let mu = -2.0 + 6.0 * rng.random::<f64>();
        let params = ThermoParams::new(Beta::Finite(beta), mu).unwrap();
        let k = k_symbol(p2, &params);
        let envelope = (p2 - mu).abs() + 2.0 / beta;
        assert!(
            a * envelope <= k + 1e-12 && k <= envelope + 1e-12,
            "sandwich violated at p2={p2}, beta={beta}, mu={mu}"
        );
    }
}
