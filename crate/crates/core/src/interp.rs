//! Piecewise-cubic interpolation: monotone (Fritsch-Carlson) Hermite splines
//! for tabulated data and a clamped cubic spline for smooth transforms.

/// Monotonicity-preserving piecewise cubic Hermite interpolant (PCHIP).
///
/// Used for tabulated potentials: never overshoots the data, so a table of a
/// one-signed potential stays one-signed.
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Node derivatives after Fritsch-Carlson limiting.
    d: Vec<f64>,
}

impl Pchip {
    /// Build from strictly increasing abscissae. Panics on fewer than two
    /// points or non-increasing `x` (callers validate first).
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        assert!(x.len() == y.len() && x.len() >= 2);
        assert!(x.windows(2).all(|w| w[0] < w[1]));
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let s: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        d[0] = end_slope(h[0], h.get(1).copied().unwrap_or(h[0]), s[0], s.get(1).copied().unwrap_or(s[0]));
        d[n - 1] = end_slope(
            h[n - 2],
            if n >= 3 { h[n - 3] } else { h[n - 2] },
            s[n - 2],
            if n >= 3 { s[n - 3] } else { s[n - 2] },
        );
        for i in 1..n - 1 {
            if s[i - 1] * s[i] <= 0.0 {
                d[i] = 0.0;
            } else {
                // Weighted harmonic mean of the neighbouring secants.
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                d[i] = (w1 + w2) / (w1 / s[i - 1] + w2 / s[i]);
            }
        }
        Pchip { x, y, d }
    }

    /// Evaluate at `t`. Outside the table: constant on the left, zero on the
    /// right (tabulated potentials extend by zero beyond the last sample).
    pub fn eval_extend_zero(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return if t == self.x[n - 1] { self.y[n - 1] } else { 0.0 };
        }
        self.eval_inside(t)
    }

    fn eval_inside(&self, t: f64) -> f64 {
        let i = match self.x.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.y[i],
            Err(i) => i - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let u = (t - self.x[i]) / h;
        let (u2, u3) = (u * u, u * u * u);
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn last_x(&self) -> f64 {
        *self.x.last().unwrap()
    }
}

// Shape-preserving one-sided estimate at the ends (Fritsch-Butland style).
fn end_slope(h0: f64, h1: f64, s0: f64, s1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if d * s0 <= 0.0 {
        0.0
    } else if s0 * s1 <= 0.0 && d.abs() > 3.0 * s0.abs() {
        3.0 * s0
    } else {
        d
    }
}

/// Cubic spline with a prescribed first derivative at the left end and a
/// natural right end. The clamped left end keeps full accuracy for even
/// functions sampled from zero (e.g. radial Fourier transforms at k = 0).
#[derive(Debug, Clone)]
pub struct ClampedSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl ClampedSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>, left_deriv: f64) -> Self {
        assert!(x.len() == y.len() && x.len() >= 3);
        let n = x.len();
        // Solve the tridiagonal system for second derivatives.
        let mut a = vec![0.0; n]; // sub
        let mut b = vec![0.0; n]; // diag
        let mut c = vec![0.0; n]; // super
        let mut r = vec![0.0; n];
        let h = |i: usize| x[i + 1] - x[i];
        b[0] = 2.0 * h(0);
        c[0] = h(0);
        r[0] = 6.0 * ((y[1] - y[0]) / h(0) - left_deriv);
        for i in 1..n - 1 {
            a[i] = h(i - 1);
            b[i] = 2.0 * (h(i - 1) + h(i));
            c[i] = h(i);
            r[i] = 6.0 * ((y[i + 1] - y[i]) / h(i) - (y[i] - y[i - 1]) / h(i - 1));
        }
        // natural right end: m[n-1] = 0
        a[n - 1] = 0.0;
        b[n - 1] = 1.0;
        r[n - 1] = 0.0;
        // Thomas algorithm.
        for i in 1..n {
            let w = a[i] / b[i - 1];
            b[i] -= w * c[i - 1];
            r[i] -= w * r[i - 1];
        }
        let mut m = vec![0.0; n];
        m[n - 1] = r[n - 1] / b[n - 1];
        for i in (0..n - 1).rev() {
            m[i] = (r[i] - c[i] * m[i + 1]) / b[i];
        }
        ClampedSpline { x, y, m }
    }

    /// Evaluate at `t`; clamps to the knot range.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let t = t.clamp(self.x[0], self.x[n - 1]);
        let i = match self.x.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let u = self.x[i + 1] - t;
        let v = t - self.x[i];
        (self.m[i] * u * u * u + self.m[i + 1] * v * v * v) / (6.0 * h)
            + (self.y[i] / h - self.m[i] * h / 6.0) * u
            + (self.y[i + 1] / h - self.m[i + 1] * h / 6.0) * v
    }

    pub fn max_x(&self) -> f64 {
        *self.x.last().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pchip_reproduces_data_and_preserves_sign() {
        let x: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
        let y: Vec<f64> = x.iter().map(|&r| -(-r * r / 2.0_f64).exp()).collect();
        let p = Pchip::new(x.clone(), y.clone());
        for (xi, yi) in x.iter().zip(&y) {
            assert!((p.eval_extend_zero(*xi) - yi).abs() < 1e-15);
        }
        let mut t = 0.0;
        while t < 9.75 {
            assert!(p.eval_extend_zero(t) <= 1e-15, "sign violated at {t}");
            t += 0.013;
        }
        assert_eq!(p.eval_extend_zero(12.0), 0.0);
    }

    #[test]
    fn clamped_spline_accuracy_on_even_function() {
        // f(k) = exp(-k^2/2) sampled on [0, 10]; f'(0) = 0.
        let n = 400;
        let x: Vec<f64> = (0..=n).map(|i| 10.0 * i as f64 / n as f64).collect();
        let y: Vec<f64> = x.iter().map(|&k| (-k * k / 2.0_f64).exp()).collect();
        let s = ClampedSpline::new(x, y, 0.0);
        let mut worst = 0.0_f64;
        let mut k = 0.0;
        while k <= 10.0 {
            worst = worst.max((s.eval(k) - (-k * k / 2.0_f64).exp()).abs());
            k += 0.0137;
        }
        assert!(worst < 1e-7, "spline max error {worst}");
    }
}
