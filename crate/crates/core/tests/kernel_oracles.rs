//! Cross-checks of the sector kernels against independent constructions: the
//! double spherical-Bessel route and a Monte-Carlo evaluation of the 3-D
//! convolution.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bcslab_core::potential::{PotentialSpec, ProfileKind, SectorKernel, SectorKernelBessel};

const K_MAX: f64 = 16.0;

fn lattice() -> Vec<f64> {
    vec![0.05, 0.3, 0.8, 1.0, 1.7, 2.5, 4.0, 6.5]
}

fn route_a_vs_b(spec: &PotentialSpec, ell: usize, tol: f64) {
    let a = SectorKernel::build(spec.profile(ProfileKind::Full), ell, K_MAX).unwrap();
    let b = SectorKernelBessel::build(spec.profile(ProfileKind::Full), ell, K_MAX);
    let mut worst = 0.0_f64;
    for &p in &lattice() {
        for &q in &lattice() {
            let va = a.eval(p, q);
            let vb = b.eval(p, q);
            worst = worst.max((va - vb).abs());
        }
    }
    assert!(
        worst <= tol,
        "route A vs route B disagree for l={ell}: max |diff| = {worst:.3e}"
    );
}

#[test]
fn routes_agree_for_gaussian() {
    let spec = PotentialSpec::gaussian(5.0, 1.0).unwrap();
    for ell in 0..=4 {
        route_a_vs_b(&spec, ell, 1e-8);
    }
}

#[test]
fn routes_agree_for_square_well() {
    let spec = PotentialSpec::square_well(2.0, 1.3).unwrap();
    for ell in 0..=3 {
        route_a_vs_b(&spec, ell, 1e-8);
    }
}

#[test]
fn routes_agree_for_two_gaussian_profiles() {
    // exercises the numeric-transform (spline) pathway used by the
    // Birman-Schwinger sandwich
    let spec = PotentialSpec::two_gaussian(-5.0, 1.0, 0.3, 2.0).unwrap();
    for kind in [ProfileKind::SqrtNegativePart, ProfileKind::PositivePart] {
        let a = SectorKernel::build(spec.profile(kind), 0, K_MAX).unwrap();
        let b = SectorKernelBessel::build(spec.profile(kind), 0, K_MAX);
        let mut worst = 0.0_f64;
        for &p in &lattice() {
            for &q in &lattice() {
                worst = worst.max((a.eval(p, q) - b.eval(p, q)).abs());
            }
        }
        assert!(worst <= 1e-6, "{kind:?}: max |diff| = {worst:.3e}");
    }
}

#[test]
fn kernel_negative_for_gaussian() {
    // averaging a strictly negative transform keeps the l=0 kernel negative
    let spec = PotentialSpec::gaussian(1.0, 1.0).unwrap();
    let k = spec.sector_kernel(0, K_MAX).unwrap();
    for &p in &lattice() {
        for &q in &lattice() {
            assert!(k.eval(p, q) < 0.0, "W0({p},{q}) not negative");
        }
    }
}

/// Monte-Carlo oracle: for h(q) = exp(-q^2/2) the convolution
/// (Vhat * h)(p) = (2 pi)^{-3/2} int Vhat(|p-q|) h(q) d^3q is exactly the
/// expectation of Vhat(|p - Q|) over Q ~ N(0, I_3).
#[test]
fn convolution_matches_monte_carlo() {
    let spec = PotentialSpec::gaussian(5.0, 1.0).unwrap();
    let kernel = spec.sector_kernel(0, 24.0).unwrap();
    let h = |q: f64| (-0.5 * q * q).exp();

    // grid-side: integrate W0(p, q) h(q) q^2 dq by dense Gauss panels
    let rule = bcslab_core::quad::gauss_legendre(64);
    let grid_side = |p: f64| -> f64 {
        let mut acc = 0.0;
        for seg in 0..4 {
            let (a, b) = (2.0 * seg as f64, 2.0 * (seg + 1) as f64);
            acc += rule.integrate(a, b, |q| kernel.eval(p, q) * h(q) * q * q);
        }
        acc
    };

    let probes = [0.0, 0.5, 1.0, 2.0];
    let n_samples = 20_000_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(0xabcdef);
    let mut sums = [0.0_f64; 4];
    for _ in 0..n_samples {
        // Box-Muller normal triple
        let (u1, u2): (f64, f64) = (rng.random(), rng.random());
        let (u3, u4): (f64, f64) = (rng.random(), rng.random());
        let r1 = (-2.0 * u1.ln()).sqrt();
        let r2 = (-2.0 * u3.ln()).sqrt();
        let (qx, qy) = (
            r1 * (2.0 * std::f64::consts::PI * u2).cos(),
            r1 * (2.0 * std::f64::consts::PI * u2).sin(),
        );
        let qz = r2 * (2.0 * std::f64::consts::PI * u4).cos();
        for (k, &p) in probes.iter().enumerate() {
            // |p e_z - q|
            let dist = (qx * qx + qy * qy + (qz - p) * (qz - p)).sqrt();
            sums[k] += spec.fourier(dist);
        }
    }
    let scale = probes
        .iter()
        .map(|&p| grid_side(p).abs())
        .fold(0.0_f64, f64::max);
    for (k, &p) in probes.iter().enumerate() {
        let mc = sums[k] / n_samples as f64;
        let gs = grid_side(p);
        assert!(
            (mc - gs).abs() <= 1e-3 * scale,
            "convolution at p={p}: grid {gs:.6e} vs MC {mc:.6e} (scale {scale:.3e})"
        );
    }
}

#[test]
fn tabulated_kernel_matches_analytic_model() {
    let mut text = String::new();
    for i in 0..=1500 {
        let r = 12.0 * i as f64 / 1500.0;
        text.push_str(&format!("{:.12e} {:.12e}\n", r, -5.0 * (-r * r / 2.0_f64).exp()));
    }
    let tab = bcslab_core::potential::parse_table(&text).unwrap();
    let exact = PotentialSpec::gaussian(5.0, 1.0).unwrap();
    let kt = tab.sector_kernel(0, K_MAX).unwrap();
    let ke = exact.sector_kernel(0, K_MAX).unwrap();
    let mut worst = 0.0_f64;
    for &p in &lattice() {
        for &q in &lattice() {
            worst = worst.max((kt.eval(p, q) - ke.eval(p, q)).abs());
        }
    }
    assert!(worst < 1e-4, "tabulated kernel off by {worst:.3e}");
}

#[test]
fn random_pair_symmetry() {
    let spec = PotentialSpec::two_gaussian(-3.0, 0.8, 0.5, 1.7).unwrap();
    let k = spec.sector_kernel(2, K_MAX).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..300 {
        let p = 8.0 * rng.random::<f64>();
        let q = 8.0 * rng.random::<f64>();
        let d = (k.eval(p, q) - k.eval(q, p)).abs();
        assert!(d <= 1e-12, "symmetry defect {d:.3e} at ({p}, {q})");
    }
}
