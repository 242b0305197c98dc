//! Scalar special functions: the dispersive symbol K_{beta,mu}, the ratio g
//! and its infimum, the counterterm integral f and its inverse, the
//! normal-state occupation, the quasi-particle dispersion and the logit mean.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::quad;

/// Inverse temperature. Zero temperature is a distinguished value, not a
/// large float, so the beta -> infinity limits are exact and overflow-free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beta {
    Finite(f64),
    Infinite,
}

impl Beta {
    pub fn is_zero_temperature(&self) -> bool {
        matches!(self, Beta::Infinite)
    }

    /// Temperature T = 1/beta (zero for the T=0 value).
    pub fn temperature(&self) -> f64 {
        match self {
            Beta::Finite(b) => 1.0 / b,
            Beta::Infinite => 0.0,
        }
    }

    /// 1/beta as a plain float (zero at T=0).
    pub fn recip_or_zero(&self) -> f64 {
        self.temperature()
    }
}

/// Thermodynamic point: inverse temperature and chemical potential.
/// Units: hbar = 2m = 1, so momentum squared is an energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoParams {
    pub beta: Beta,
    pub mu: f64,
}

impl ThermoParams {
    pub fn new(beta: Beta, mu: f64) -> Result<Self> {
        if let Beta::Finite(b) = beta {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::Domain(format!(
                    "beta must be positive and finite (got {b})"
                )));
            }
        }
        if !mu.is_finite() {
            return Err(Error::Domain(format!("mu must be finite (got {mu})")));
        }
        Ok(ThermoParams { beta, mu })
    }

    /// Finite temperature T > 0.
    pub fn at_temperature(t: f64, mu: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Domain(format!(
                "temperature must be positive and finite (got {t})"
            )));
        }
        Self::new(Beta::Finite(1.0 / t), mu)
    }

    /// The distinguished T = 0 point.
    pub fn zero_temperature(mu: f64) -> Result<Self> {
        Self::new(Beta::Infinite, mu)
    }

    /// T = 0 when `t == 0`, finite otherwise.
    pub fn with_temperature(t: f64, mu: f64) -> Result<Self> {
        if t == 0.0 {
            Self::zero_temperature(mu)
        } else {
            Self::at_temperature(t, mu)
        }
    }
}

/// y*coth(y) with the removable singularity at y = 0 handled by a short
/// Taylor series; the switchover keeps relative error below 1e-14.
fn y_coth_y(y: f64) -> f64 {
    if y.abs() < 5e-5 {
        let y2 = y * y;
        1.0 + y2 / 3.0 - y2 * y2 / 45.0 + 2.0 * y2 * y2 * y2 / 945.0
    } else {
        y / y.tanh()
    }
}

/// The symbol K_{beta,mu}(p) = (p^2-mu) (e^{beta(p^2-mu)}+1)/(e^{beta(p^2-mu)}-1),
/// i.e. (p^2-mu) coth(beta(p^2-mu)/2); at T=0 it degenerates to |p^2-mu|.
pub fn k_symbol(p2: f64, params: &ThermoParams) -> f64 {
    let x = p2 - params.mu;
    match params.beta {
        Beta::Infinite => x.abs(),
        Beta::Finite(beta) => (2.0 / beta) * y_coth_y(0.5 * beta * x),
    }
}

/// g(t) = t(e^t+1)/((t+2)(e^t-1)) for t >= 0, with g(0) = 1 by the limit.
pub fn g_ratio(t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    2.0 * y_coth_y(0.5 * t) / (t + 2.0)
}

/// The infimum of `g_ratio` over t > 0, found by golden-section search after
/// checking both ends approach 1. Computed once and cached.
pub fn a_constant() -> f64 {
    static A: OnceLock<f64> = OnceLock::new();
    *A.get_or_init(|| {
        let (lo, hi) = (1e-6, 60.0);
        // both ends approach 1 (the right end like 1 - 2/t), so the interior
        // minimum is bracketed
        debug_assert!((g_ratio(lo) - 1.0).abs() < 1e-3);
        debug_assert!(g_ratio(hi) > 0.9);
        let t_min = golden_min(g_ratio, lo, hi);
        g_ratio(t_min)
    })
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        if b - a < 1e-12 * (1.0 + b.abs()) {
            break;
        }
    }
    0.5 * (a + b)
}

const F_BODY_CUT: f64 = 100.0;

/// The counterterm integral
/// f(t) = (1/2 pi^2) \int_0^inf p^2 [ 1/(|p^2-1|+t) - 1/(p^2+1+t) ] dp, t > 0.
///
/// The body is integrated adaptively with a panel break at p = 1; both panels
/// touching the break use the distance-to-one substitution so the layer of
/// width ~t stays resolvable in floating point for arbitrarily small t. The
/// O(1/p^2) tail beyond p = 100 is summed in closed form from the partial
/// fractions of 2p^2/((p^2-1+t)(p^2+1+t)).
pub fn f_counterterm(t: f64) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Domain(format!("f is defined for t > 0 (got {t})")));
    }
    let tol = 1e-11;
    // p in [0, 1]: p = 1-d, |p^2-1| = d(2-d).
    let left = quad::integrate_adaptive(
        |d| {
            let p = 1.0 - d;
            p * p * (1.0 / (d * (2.0 - d) + t) - 1.0 / (p * p + 1.0 + t))
        },
        0.0,
        1.0,
        tol,
    )?;
    // p in [1, cut]: p = 1+d, p^2-1 = d(2+d).
    let right = quad::integrate_adaptive(
        |d| {
            let p = 1.0 + d;
            p * p * (1.0 / (d * (2.0 + d) + t) - 1.0 / (p * p + 1.0 + t))
        },
        0.0,
        F_BODY_CUT - 1.0,
        tol,
    )?;
    Ok((left + right + f_tail(t, F_BODY_CUT)) / (2.0 * std::f64::consts::PI.powi(2)))
}

/// Closed-form tail \int_P^inf [a/(p^2-a) + b/(p^2+b)] dp with a = 1-t, b = 1+t.
fn f_tail(t: f64, p_cut: f64) -> f64 {
    let a = 1.0 - t;
    let b = 1.0 + t;
    let t2 = b.sqrt() * (b.sqrt() / p_cut).atan();
    let t1 = if a > 0.0 {
        let ra = a.sqrt();
        ra * (ra / p_cut).atanh()
    } else if a < 0.0 {
        let ra = (-a).sqrt();
        -ra * (ra / p_cut).atan()
    } else {
        0.0
    };
    t1 + t2
}

/// Inverse of `f_counterterm` by bisection in log t, using monotonicity.
/// The bracket starts at [1e-12, 1e6] and is grown geometrically as needed.
pub fn f_counterterm_inverse(y: f64) -> Result<f64> {
    if !(y.is_finite() && y > 0.0) {
        return Err(Error::Domain(format!("f^-1 is defined for y > 0 (got {y})")));
    }
    let mut lo = 1e-12;
    let mut hi = 1e6;
    let mut f_lo = f_counterterm(lo)?;
    let mut f_hi = f_counterterm(hi)?;
    // f is decreasing: need f(lo) >= y >= f(hi).
    while f_lo < y {
        lo *= 1e-2;
        if lo < 1e-290 {
            return Err(Error::Range(format!(
                "y = {y:.6e} not reachable: f({:.3e}) = {f_lo:.6e} at the smallest bracket",
                lo * 1e2
            )));
        }
        f_lo = f_counterterm(lo)?;
    }
    while f_hi > y {
        hi *= 1e2;
        if hi > 1e290 {
            return Err(Error::Range(format!(
                "y = {y:.6e} not reachable: f({:.3e}) = {f_hi:.6e} at the largest bracket",
                hi * 1e-2
            )));
        }
        f_hi = f_counterterm(hi)?;
    }
    let (mut llo, mut lhi) = (lo.ln(), hi.ln());
    for _ in 0..200 {
        let lmid = 0.5 * (llo + lhi);
        let fm = f_counterterm(lmid.exp())?;
        if fm >= y {
            llo = lmid;
        } else {
            lhi = lmid;
        }
        if lhi - llo < 1e-14 {
            break;
        }
    }
    Ok((0.5 * (llo + lhi)).exp())
}

/// Normal-state (Fermi-Dirac) occupation gamma_0(p) = [e^{beta(p^2-mu)}+1]^{-1}.
/// At T=0 this is the step function, with the value 1/2 exactly on the Fermi
/// surface.
pub fn gamma0(p2: f64, params: &ThermoParams) -> f64 {
    let x = p2 - params.mu;
    match params.beta {
        Beta::Infinite => {
            if x < 0.0 {
                1.0
            } else if x > 0.0 {
                0.0
            } else {
                0.5
            }
        }
        // 1/(e^{bx}+1) = (1 - tanh(bx/2))/2; the tanh form neither over- nor
        // underflows and is exact at x = 0.
        Beta::Finite(beta) => 0.5 * (1.0 - (0.5 * beta * x).tanh()),
    }
}

/// Quasi-particle dispersion E(p) = sqrt((p^2-mu)^2 + Delta^2), overflow-safe.
pub fn dispersion(p2: f64, delta: f64, mu: f64) -> f64 {
    (p2 - mu).hypot(delta)
}

/// The logit mean f(x) = (1/x) ln((1+x)/(1-x)) on [0, 1), with f(0) = 2.
/// Strictly increasing; diverges as x -> 1.
pub fn f_logit(x: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::Domain(format!(
            "logit mean is defined on [0, 1) (got {x})"
        )));
    }
    if x < 1e-4 {
        let x2 = x * x;
        Ok(2.0 * (1.0 + x2 / 3.0 + x2 * x2 / 5.0))
    } else {
        Ok(2.0 * x.atanh() / x)
    }
}

/// E * coth(beta E / 2) for E >= 0, the right-hand side of the finite-T
/// stationarity relation; reduces to E at T=0.
pub fn e_coth_half_beta(e: f64, beta: Beta) -> f64 {
    match beta {
        Beta::Infinite => e,
        Beta::Finite(b) => (2.0 / b) * y_coth_y(0.5 * b * e),
    }
}
