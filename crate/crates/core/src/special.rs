//! Legendre polynomials and spherical Bessel functions of the first kind.

/// Values of P_0(x) .. P_lmax(x) by the stable upward recurrence.
pub fn legendre_all(lmax: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(lmax + 1);
    p.push(1.0);
    if lmax == 0 {
        return p;
    }
    p.push(x);
    for l in 1..lmax {
        let lf = l as f64;
        let next = ((2.0 * lf + 1.0) * x * p[l] - lf * p[l - 1]) / (lf + 1.0);
        p.push(next);
    }
    p
}

/// Spherical Bessel j_l(x) for l = 0..=lmax, x >= 0.
///
/// Strategy: power series for small arguments, upward recurrence in the
/// oscillatory regime x > lmax, and Miller's downward recurrence in between.
pub fn sph_bessel_all(lmax: usize, x: f64) -> Vec<f64> {
    debug_assert!(x >= 0.0);
    if x < 0.05 {
        return (0..=lmax).map(|l| sph_bessel_series(l, x)).collect();
    }
    let mut j = vec![0.0; lmax + 1];
    j[0] = x.sin() / x;
    if lmax == 0 {
        return j;
    }
    j[1] = x.sin() / (x * x) - x.cos() / x;
    if lmax == 1 {
        return j;
    }
    if x > lmax as f64 + 1.0 {
        // Forward recurrence is stable above the turning point.
        for l in 1..lmax {
            j[l + 1] = (2.0 * l as f64 + 1.0) / x * j[l] - j[l - 1];
        }
        return j;
    }
    // Miller's algorithm: run downward from a padded start order, normalise
    // against j0.
    let start = lmax + 16 + x as usize;
    let mut fp1 = 0.0_f64;
    let mut fp = 1e-280_f64;
    for l in (0..=start).rev() {
        let fm = (2.0 * l as f64 + 3.0) / x * fp - fp1;
        if l <= lmax {
            j[l] = fm;
        }
        fp1 = fp;
        fp = fm;
        if fp.abs() > 1e250 {
            // rescale to avoid overflow
            fp1 /= 1e250;
            fp /= 1e250;
            for v in j.iter_mut() {
                *v /= 1e250;
            }
        }
    }
    let scale = (x.sin() / x) / j[0];
    for v in j.iter_mut() {
        *v *= scale;
    }
    j
}

/// j_l(x) from the ascending power series (small x).
fn sph_bessel_series(l: usize, x: f64) -> f64 {
    // x^l / (2l+1)!! * sum_k (-x^2/2)^k / (k! (2l+3)(2l+5)...(2l+2k+1))
    let mut double_fact = 1.0;
    for m in 0..l {
        double_fact *= 2.0 * m as f64 + 3.0;
    }
    let lead = x.powi(l as i32) / double_fact;
    let x2 = x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..12 {
        term *= -x2 / (2.0 * k as f64 * (2.0 * (l + k) as f64 + 1.0));
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    lead * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_known_values() {
        let p = legendre_all(4, 0.5);
        assert!((p[0] - 1.0).abs() < 1e-15);
        assert!((p[1] - 0.5).abs() < 1e-15);
        assert!((p[2] - (-0.125)).abs() < 1e-15);
        // P3(x) = (5x^3 - 3x)/2 = (0.625 - 1.5)/2
        assert!((p[3] - (-0.4375)).abs() < 1e-15);
    }

    #[test]
    fn legendre_orthogonality() {
        let rule = crate::quad::gauss_legendre(32);
        for (l1, l2) in [(0usize, 1usize), (1, 3), (2, 4), (3, 3)] {
            let val = rule.integrate(-1.0, 1.0, |x| {
                let p = legendre_all(4, x);
                p[l1] * p[l2]
            });
            let expect = if l1 == l2 { 2.0 / (2.0 * l1 as f64 + 1.0) } else { 0.0 };
            assert!((val - expect).abs() < 1e-13, "l1={l1} l2={l2}: {val}");
        }
    }

    #[test]
    fn bessel_matches_closed_forms() {
        for &x in &[0.3, 1.0, 2.7, 10.0, 55.0, 201.0] {
            let j = sph_bessel_all(3, x);
            let j0 = x.sin() / x;
            let j1 = x.sin() / (x * x) - x.cos() / x;
            let j2 = (3.0 / (x * x) - 1.0) * x.sin() / x - 3.0 * x.cos() / (x * x);
            assert!((j[0] - j0).abs() < 1e-13 * (1.0 + j0.abs()));
            assert!((j[1] - j1).abs() < 1e-13);
            assert!((j[2] - j2).abs() < 5e-13, "x={x}: {} vs {}", j[2], j2);
        }
    }

    #[test]
    fn bessel_matches_reference_values() {
        // frozen from an independent library evaluation
        let cases = [
            (2usize, 1e-4, 6.666666661904783e-10),
            (5, 0.02, 3.0783557186714587e-13),
            (5, 0.06, 7.479483778427381e-11),
            (3, 0.3, 2.558597696950819e-4),
            (3, 2.7, 0.12300842468776202),
            (4, 4.0, 0.12489306564995288),
        ];
        for (l, x, want) in cases {
            let got = sph_bessel_all(l, x)[l];
            assert!(
                ((got - want) / want).abs() < 1e-12,
                "j_{l}({x}) = {got:e}, want {want:e}"
            );
        }
    }
}
