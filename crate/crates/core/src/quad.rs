//! One-dimensional quadrature: Gauss-Legendre rules of arbitrary order and an
//! adaptive composite integrator built on an embedded GL10/GL20 pair.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Nodes and weights of an `n`-point Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Integrate `f` over `[a, b]` with this rule.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        half * acc
    }
}

fn rule_cache() -> &'static Mutex<HashMap<usize, Arc<GaussRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// The `n`-point Gauss-Legendre rule on [-1, 1], computed by Newton iteration
/// on the Legendre polynomial and cached per order.
pub fn gauss_legendre(n: usize) -> Arc<GaussRule> {
    assert!(n >= 1, "Gauss-Legendre order must be at least 1");
    if let Some(rule) = rule_cache().lock().unwrap().get(&n) {
        return rule.clone();
    }
    let rule = Arc::new(compute_gauss_legendre(n));
    rule_cache().lock().unwrap().insert(n, rule.clone());
    rule
}

fn compute_gauss_legendre(n: usize) -> GaussRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for k in 0..m {
        // Chebyshev-like initial guess for the k-th positive root.
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x) by upward recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() <= 1e-15 * x.abs().max(1.0) {
                // converged; one last derivative refresh happens above
                break;
            }
        }
        nodes[k] = -x;
        nodes[n - 1 - k] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[k] = w;
        weights[n - 1 - k] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussRule { nodes, weights }
}

/// Fixed-order Gauss-Legendre integration of `f` over `[a, b]`.
pub fn integrate_fixed<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, order: usize) -> f64 {
    gauss_legendre(order).integrate(a, b, f)
}

/// Adaptive integration of `f` over `[a, b]` to absolute accuracy `abs_tol`.
///
/// Each subinterval is integrated with 10- and 20-point Gauss rules; the
/// difference serves as the error estimate and intervals are bisected until
/// the local estimate fits within the length-proportional share of `abs_tol`.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain("adaptive quadrature needs finite bounds".into()));
    }
    if a == b {
        return Ok(0.0);
    }
    let coarse = gauss_legendre(10);
    let fine = gauss_legendre(20);
    let total_len = (b - a).abs();
    // (lo, hi) intervals still to process.
    let mut stack = vec![(a, b)];
    let mut sum = 0.0;
    let mut processed = 0usize;
    const MAX_INTERVALS: usize = 200_000;
    while let Some((lo, hi)) = stack.pop() {
        processed += 1;
        if processed > MAX_INTERVALS {
            return Err(Error::Quadrature(format!(
                "interval budget exhausted on [{a:.6e}, {b:.6e}] at abs_tol {abs_tol:.3e}"
            )));
        }
        let i_coarse = coarse.integrate(lo, hi, &mut f);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (lo + hi);
        let mut i_fine = 0.0;
        let mut resabs = 0.0;
        for (&x, &w) in fine.nodes.iter().zip(&fine.weights) {
            let v = w * f(mid + half * x);
            i_fine += v;
            resabs += v.abs();
        }
        i_fine *= half;
        resabs *= half.abs();
        let err = (i_fine - i_coarse).abs();
        let share = abs_tol * ((hi - lo).abs() / total_len).max(1e-300);
        // Rounding floor: the GL sums cannot agree better than machine
        // precision of the absolute mass on the interval.
        let floor = 50.0 * f64::EPSILON * resabs;
        if err <= share.max(floor) || mid <= lo || mid >= hi {
            sum += i_fine;
        } else {
            stack.push((lo, mid));
            stack.push((mid, hi));
        }
    }
    Ok(sum)
}

/// Adaptive integration over `[a, b]` split at the given interior breakpoints
/// (kinks, sign changes, near-singular layers).
pub fn integrate_adaptive_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    abs_tol: f64,
) -> Result<f64> {
    let mut edges: Vec<f64> = std::iter::once(a)
        .chain(breaks.iter().copied().filter(|&x| x > a && x < b))
        .chain(std::iter::once(b))
        .collect();
    edges.sort_by(|x, y| x.partial_cmp(y).unwrap());
    edges.dedup();
    let n_seg = edges.len() - 1;
    let mut sum = 0.0;
    for k in 0..n_seg {
        sum += integrate_adaptive(&mut f, edges[k], edges[k + 1], abs_tol / n_seg as f64)?;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_is_exact_on_polynomials() {
        // An n-point rule integrates degree 2n-1 exactly.
        for n in [2usize, 5, 16, 33, 64] {
            let rule = gauss_legendre(n);
            let deg = 2 * n - 1;
            let exact = |d: u32| if d % 2 == 0 { 2.0 / (d as f64 + 1.0) } else { 0.0 };
            for d in [0u32, 1, (deg as u32) / 2, deg as u32] {
                let got = rule.integrate(-1.0, 1.0, |x| x.powi(d as i32));
                assert!(
                    (got - exact(d)).abs() < 1e-13,
                    "n={n} degree={d}: got {got}, want {}",
                    exact(d)
                );
            }
        }
    }

    #[test]
    fn weights_sum_to_interval_length() {
        for n in [1usize, 7, 40] {
            let rule = gauss_legendre(n);
            let s: f64 = rule.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn adaptive_handles_kink_and_layer() {
        // |x| has a kink at 0.
        let v = integrate_adaptive(|x: f64| x.abs(), -1.0, 2.0, 1e-12).unwrap();
        assert!((v - 2.5).abs() < 1e-11);
        // Sharp Lorentzian layer: integral of eps/(x^2+eps^2) over R is pi.
        let eps = 1e-6;
        let v = integrate_adaptive(|x: f64| eps / (x * x + eps * eps), -1.0, 1.0, 1e-12).unwrap();
        let exact = 2.0 * (1.0 / eps).atan();
        assert!((v - exact).abs() < 1e-10, "layer integral: {v} vs {exact}");
    }

    #[test]
    fn adaptive_with_breaks_matches_plain() {
        let f = |x: f64| (x * x).exp_m1();
        let a = integrate_adaptive(f, 0.0, 1.5, 1e-13).unwrap();
        let b = integrate_adaptive_with_breaks(f, 0.0, 1.5, &[0.3, 1.0], 1e-13).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
