//! Radial pair potentials: model catalog with Fourier transforms, the
//! V = V+ - V- decomposition with L^1 / L^{3/2} / L^inf norms, and the
//! partial-wave momentum kernels W_l(p,q) that represent multiplication by V
//! in each angular-momentum sector.
//!
//! Conventions: Fourier transform with (2pi)^{-3/2}, convolution carries the
//! same prefactor, so multiplication by V in position space is exactly
//! h |-> Vhat * h in momentum space. For radial functions the l-sector kernel
//! normalisation is fixed by (Vhat * h)(p) = int_0^inf W_0(p,q) h(q) q^2 dq.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::interp::{ClampedSpline, Pchip};
use crate::quad::{self, gauss_legendre};
use crate::special;

/// Potential model family. Gaussian and square-well depths follow the
/// attractive convention (positive depth means V < 0); the two-Gaussian
/// amplitudes are signed directly.
#[derive(Debug, Clone)]
pub enum PotentialModel {
    /// V(r) = -depth * exp(-r^2 / (2 width^2))
    Gaussian { depth: f64, width: f64 },
    /// V(r) = -depth for r < radius, 0 outside
    SquareWell { depth: f64, radius: f64 },
    /// V(r) = amp1 * exp(-r^2/(2 sigma1^2)) + amp2 * exp(-r^2/(2 sigma2^2))
    TwoGaussian {
        amp1: f64,
        sigma1: f64,
        amp2: f64,
        sigma2: f64,
    },
    /// Samples of (r, V(r)), monotone-cubic interpolation, zero beyond the
    /// last sample.
    Tabulated(Arc<Pchip>),
}

/// Radial norms of the positive/negative parts, computed at construction.
#[derive(Debug, Clone, Copy, Default)]
pub struct Norms {
    pub l1_minus: f64,
    pub l32_minus: f64,
    pub linf_minus: f64,
    pub l1_plus: f64,
    pub l32_plus: f64,
}

/// A radial pair potential with an overall coupling multiplier.
#[derive(Debug, Clone)]
pub struct PotentialSpec {
    model: PotentialModel,
    lambda_scale: f64,
    norms: Norms,
    /// Radii where V changes sign (quadrature breakpoints).
    sign_changes: Vec<f64>,
    /// Radius beyond which |V| is negligible.
    r_support: f64,
    /// Lazily built transform spline for models without a closed form.
    numeric_transform: OnceLock<Arc<ClampedSpline>>,
}

impl PotentialSpec {
    pub fn new(model: PotentialModel, lambda_scale: f64) -> Result<Self> {
        if !lambda_scale.is_finite() {
            return Err(Error::Config("lambda_scale must be finite".into()));
        }
        match &model {
            PotentialModel::Gaussian { depth, width } => {
                if !depth.is_finite() || !(width.is_finite() && *width > 0.0) {
                    return Err(Error::Config(format!(
                        "gaussian needs finite depth and width > 0 (got depth={depth}, width={width})"
                    )));
                }
            }
            PotentialModel::SquareWell { depth, radius } => {
                if !depth.is_finite() || !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::Config(format!(
                        "square well needs finite depth and radius > 0 (got depth={depth}, radius={radius})"
                    )));
                }
            }
            PotentialModel::TwoGaussian {
                amp1,
                sigma1,
                amp2,
                sigma2,
            } => {
                if !amp1.is_finite()
                    || !amp2.is_finite()
                    || !(sigma1.is_finite() && *sigma1 > 0.0)
                    || !(sigma2.is_finite() && *sigma2 > 0.0)
                {
                    return Err(Error::Config(
                        "two_gaussian needs finite amplitudes and positive widths".into(),
                    ));
                }
            }
            PotentialModel::Tabulated(table) => {
                if table.x()[0] < 0.0 {
                    return Err(Error::Config("table radii must be non-negative".into()));
                }
            }
        }
        let r_support = match &model {
            PotentialModel::Gaussian { width, .. } => 10.0 * width,
            PotentialModel::SquareWell { radius, .. } => *radius,
            PotentialModel::TwoGaussian { sigma1, sigma2, .. } => 10.0 * sigma1.max(*sigma2),
            PotentialModel::Tabulated(table) => table.last_x(),
        };
        let mut spec = PotentialSpec {
            model,
            lambda_scale,
            norms: Norms::default(),
            sign_changes: Vec::new(),
            r_support,
            numeric_transform: OnceLock::new(),
        };
        spec.sign_changes = spec.find_sign_changes();
        spec.norms = spec.compute_norms()?;
        Ok(spec)
    }

    pub fn gaussian(depth: f64, width: f64) -> Result<Self> {
        Self::new(PotentialModel::Gaussian { depth, width }, 1.0)
    }

    pub fn square_well(depth: f64, radius: f64) -> Result<Self> {
        Self::new(PotentialModel::SquareWell { depth, radius }, 1.0)
    }

    pub fn two_gaussian(amp1: f64, sigma1: f64, amp2: f64, sigma2: f64) -> Result<Self> {
        Self::new(
            PotentialModel::TwoGaussian {
                amp1,
                sigma1,
                amp2,
                sigma2,
            },
            1.0,
        )
    }

    /// Same potential with the coupling multiplier replaced.
    pub fn with_lambda_scale(&self, lambda_scale: f64) -> Result<Self> {
        Self::new(self.model.clone(), lambda_scale)
    }

    pub fn lambda_scale(&self) -> f64 {
        self.lambda_scale
    }

    pub fn model(&self) -> &PotentialModel {
        &self.model
    }

    pub fn norms(&self) -> &Norms {
        &self.norms
    }

    pub fn r_support(&self) -> f64 {
        self.r_support
    }

    pub fn sign_changes(&self) -> &[f64] {
        &self.sign_changes
    }

    /// V(r); `r` is assumed non-negative (checked API: `evaluate_position`).
    pub fn value(&self, r: f64) -> f64 {
        debug_assert!(r >= 0.0);
        let bare = match &self.model {
            PotentialModel::Gaussian { depth, width } => {
                -depth * (-r * r / (2.0 * width * width)).exp()
            }
            PotentialModel::SquareWell { depth, radius } => {
                if r < *radius {
                    -depth
                } else {
                    0.0
                }
            }
            PotentialModel::TwoGaussian {
                amp1,
                sigma1,
                amp2,
                sigma2,
            } => {
                amp1 * (-r * r / (2.0 * sigma1 * sigma1)).exp()
                    + amp2 * (-r * r / (2.0 * sigma2 * sigma2)).exp()
            }
            PotentialModel::Tabulated(table) => table.eval_extend_zero(r),
        };
        self.lambda_scale * bare
    }

    /// V(r) with the domain check on r.
    pub fn evaluate_position(&self, r: f64) -> Result<f64> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::Domain(format!("radius must be >= 0 (got {r})")));
        }
        Ok(self.value(r))
    }

    /// V_+(r) = max(V, 0).
    pub fn value_plus(&self, r: f64) -> f64 {
        self.value(r).max(0.0)
    }

    /// V_-(r) = max(-V, 0), so V = V_+ - V_- with V_+ V_- = 0 pointwise.
    pub fn value_minus(&self, r: f64) -> f64 {
        (-self.value(r)).max(0.0)
    }

    /// Radial Fourier transform Vhat(p) = (2pi)^{-3/2} (4pi/p) int r sin(pr) V(r) dr,
    /// with the p -> 0 limit taken through sinc. Closed forms for the catalog
    /// models, quadrature (cached spline) for tabulated input.
    pub fn fourier(&self, p: f64) -> f64 {
        let p = p.abs();
        let bare = match &self.model {
            PotentialModel::Gaussian { depth, width } => gauss_transform(-depth, *width, p),
            PotentialModel::SquareWell { depth, radius } => well_transform(-depth, *radius, p),
            PotentialModel::TwoGaussian {
                amp1,
                sigma1,
                amp2,
                sigma2,
            } => gauss_transform(*amp1, *sigma1, p) + gauss_transform(*amp2, *sigma2, p),
            PotentialModel::Tabulated(_) => {
                let spline = self.numeric_transform.get_or_init(|| {
                    numeric_transform_spline(
                        |r| self.value(r) / self.lambda_scale_or_one(),
                        self.r_support,
                        &self.sign_changes,
                        50.0,
                    )
                    .expect("transform of a validated table")
                });
                if p <= spline.max_x() {
                    spline.eval(p)
                } else {
                    // beyond the cached range: direct oscillatory quadrature
                    let grid = TransformGrid::build(
                        |r| self.value(r) / self.lambda_scale_or_one(),
                        self.r_support,
                        &self.sign_changes,
                        p,
                    );
                    grid.transform_at(p)
                }
            }
        };
        self.lambda_scale * bare
    }

    fn lambda_scale_or_one(&self) -> f64 {
        if self.lambda_scale == 0.0 {
            1.0
        } else {
            self.lambda_scale
        }
    }

    /// Decomposition report: norms plus the pointwise part evaluators.
    pub fn decompose_and_norms(&self) -> &Norms {
        &self.norms
    }

    fn find_sign_changes(&self) -> Vec<f64> {
        let n = 2048;
        let mut out = Vec::new();
        let mut prev_r = 0.0;
        let mut prev_v = self.value(0.0);
        for i in 1..=n {
            let r = self.r_support * i as f64 / n as f64;
            let v = self.value(r);
            if prev_v * v < 0.0 {
                // bisect the crossing
                let (mut a, mut b) = (prev_r, r);
                let mut fa = prev_v;
                for _ in 0..80 {
                    let m = 0.5 * (a + b);
                    let fm = self.value(m);
                    if fa * fm <= 0.0 {
                        b = m;
                    } else {
                        a = m;
                        fa = fm;
                    }
                }
                out.push(0.5 * (a + b));
            }
            prev_r = r;
            prev_v = v;
        }
        out
    }

    fn quad_breaks(&self) -> Vec<f64> {
        let mut b = self.sign_changes.clone();
        if let PotentialModel::SquareWell { radius, .. } = &self.model {
            b.push(*radius);
        }
        b
    }

    fn compute_norms(&self) -> Result<Norms> {
        let breaks = self.quad_breaks();
        let rs = self.r_support;
        // crude magnitude for tolerance scaling
        let scale: f64 = gauss_legendre(64)
            .integrate(0.0, rs, |r| r * r * self.value(r).abs())
            .abs()
            .max(1e-30);
        let tol = 1e-12 * scale.max(1.0);
        let l1m = 4.0
            * PI
            * quad::integrate_adaptive_with_breaks(
                |r| r * r * self.value_minus(r),
                0.0,
                rs,
                &breaks,
                tol,
            )?;
        let l32m = (4.0
            * PI
            * quad::integrate_adaptive_with_breaks(
                |r| r * r * self.value_minus(r).powf(1.5),
                0.0,
                rs,
                &breaks,
                tol,
            )?)
        .powf(2.0 / 3.0);
        let l1p = 4.0
            * PI
            * quad::integrate_adaptive_with_breaks(
                |r| r * r * self.value_plus(r),
                0.0,
                rs,
                &breaks,
                tol,
            )?;
        let l32p = (4.0
            * PI
            * quad::integrate_adaptive_with_breaks(
                |r| r * r * self.value_plus(r).powf(1.5),
                0.0,
                rs,
                &breaks,
                tol,
            )?)
        .powf(2.0 / 3.0);
        let linf_m = self.sup_minus();
        for v in [l1m, l32m, l1p, l32p, linf_m] {
            if !v.is_finite() {
                return Err(Error::Config(
                    "potential norms did not evaluate to finite values".into(),
                ));
            }
        }
        Ok(Norms {
            l1_minus: l1m,
            l32_minus: l32m,
            linf_minus: linf_m,
            l1_plus: l1p,
            l32_plus: l32p,
        })
    }

    /// sup of V_-: analytic for one-signed catalog models, refined grid sup
    /// otherwise.
    fn sup_minus(&self) -> f64 {
        let ls = self.lambda_scale;
        match &self.model {
            PotentialModel::Gaussian { depth, .. } => (ls * depth).max(0.0),
            PotentialModel::SquareWell { depth, .. } => (ls * depth).max(0.0),
            _ => {
                let n = 4096;
                let mut best_r = 0.0;
                let mut best = self.value_minus(0.0);
                for i in 1..=n {
                    let r = self.r_support * i as f64 / n as f64;
                    let v = self.value_minus(r);
                    if v > best {
                        best = v;
                        best_r = r;
                    }
                }
                // refine around the grid maximiser
                let h = self.r_support / n as f64;
                let (mut a, mut b) = ((best_r - h).max(0.0), best_r + h);
                for _ in 0..60 {
                    let m1 = a + (b - a) / 3.0;
                    let m2 = b - (b - a) / 3.0;
                    if self.value_minus(m1) < self.value_minus(m2) {
                        a = m1;
                    } else {
                        b = m2;
                    }
                }
                best.max(self.value_minus(0.5 * (a + b)))
            }
        }
    }

    /// Derived radial profile (positive part, sqrt of negative part, ...).
    pub fn profile(&self, kind: ProfileKind) -> RadialProfile<'_> {
        RadialProfile { spec: self, kind }
    }

    /// The sector kernel W_l for this potential, valid for momenta with
    /// p + q <= k_max.
    pub fn sector_kernel(&self, ell: usize, k_max: f64) -> Result<SectorKernel> {
        SectorKernel::build(self.profile(ProfileKind::Full), ell, k_max)
    }
}

/// Which pointwise function of V a kernel is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Full,
    PositivePart,
    SqrtNegativePart,
}

/// A radial function derived from a potential, with enough structure to be
/// run through the same transform/kernel pathway as the potential itself.
#[derive(Clone, Copy)]
pub struct RadialProfile<'a> {
    spec: &'a PotentialSpec,
    kind: ProfileKind,
}

impl RadialProfile<'_> {
    pub fn value(&self, r: f64) -> f64 {
        match self.kind {
            ProfileKind::Full => self.spec.value(r),
            ProfileKind::PositivePart => self.spec.value_plus(r),
            ProfileKind::SqrtNegativePart => self.spec.value_minus(r).sqrt(),
        }
    }

    fn r_support(&self) -> f64 {
        // sqrt stretches gaussian tails by sqrt(2); the support hint already
        // has headroom, stretch it once more to be safe.
        match self.kind {
            ProfileKind::SqrtNegativePart => 1.5 * self.spec.r_support,
            _ => self.spec.r_support,
        }
    }

    fn breaks(&self) -> Vec<f64> {
        self.spec.quad_breaks()
    }

    /// True when the profile is identically zero (e.g. V_+ of an attractive
    /// potential), so the kernel can be skipped.
    pub fn is_zero(&self) -> bool {
        match self.kind {
            ProfileKind::Full => self.spec.lambda_scale == 0.0,
            ProfileKind::PositivePart => self.spec.norms.l1_plus == 0.0,
            ProfileKind::SqrtNegativePart => self.spec.norms.l1_minus == 0.0,
        }
    }

    /// Closed-form transform components when the profile stays inside the
    /// catalog (gaussian roots of gaussians, wells of wells), otherwise None.
    fn analytic_components(&self) -> Option<Vec<Component>> {
        let ls = self.spec.lambda_scale;
        match (&self.spec.model, self.kind) {
            (PotentialModel::Gaussian { depth, width }, kind) => {
                let amp = -ls * depth; // signed amplitude of V
                match kind {
                    ProfileKind::Full => Some(vec![Component::Gauss { amp, sigma: *width }]),
                    ProfileKind::PositivePart => Some(if amp > 0.0 {
                        vec![Component::Gauss { amp, sigma: *width }]
                    } else {
                        vec![]
                    }),
                    ProfileKind::SqrtNegativePart => Some(if amp < 0.0 {
                        vec![Component::Gauss {
                            amp: (-amp).sqrt(),
                            sigma: width * std::f64::consts::SQRT_2,
                        }]
                    } else {
                        vec![]
                    }),
                }
            }
            (PotentialModel::SquareWell { depth, radius }, kind) => {
                let height = -ls * depth;
                match kind {
                    ProfileKind::Full => Some(vec![Component::Well {
                        height,
                        radius: *radius,
                    }]),
                    ProfileKind::PositivePart => Some(if height > 0.0 {
                        vec![Component::Well {
                            height,
                            radius: *radius,
                        }]
                    } else {
                        vec![]
                    }),
                    ProfileKind::SqrtNegativePart => Some(if height < 0.0 {
                        vec![Component::Well {
                            height: (-height).sqrt(),
                            radius: *radius,
                        }]
                    } else {
                        vec![]
                    }),
                }
            }
            (
                PotentialModel::TwoGaussian {
                    amp1,
                    sigma1,
                    amp2,
                    sigma2,
                },
                ProfileKind::Full,
            ) => Some(vec![
                Component::Gauss {
                    amp: ls * amp1,
                    sigma: *sigma1,
                },
                Component::Gauss {
                    amp: ls * amp2,
                    sigma: *sigma2,
                },
            ]),
            _ => None,
        }
    }
}

/// Transform building blocks with closed forms.
#[derive(Debug, Clone, Copy)]
enum Component {
    /// amp * exp(-r^2/(2 sigma^2)) -> amp * sigma^3 * exp(-sigma^2 k^2 / 2)
    Gauss { amp: f64, sigma: f64 },
    /// height on [0, radius] -> (2pi)^{-3/2} 4pi height (sin kR - kR cos kR)/k^3
    Well { height: f64, radius: f64 },
}

impl Component {
    fn transform(&self, k: f64) -> f64 {
        match *self {
            Component::Gauss { amp, sigma } => {
                amp * sigma.powi(3) * (-0.5 * sigma * sigma * k * k).exp()
            }
            Component::Well { height, radius } => well_transform(height, radius, k),
        }
    }
}

fn gauss_transform(amp: f64, sigma: f64, k: f64) -> f64 {
    amp * sigma.powi(3) * (-0.5 * sigma * sigma * k * k).exp()
}

fn well_transform(height: f64, radius: f64, k: f64) -> f64 {
    let c = (2.0 * PI).powf(-1.5) * 4.0 * PI;
    let x = k * radius;
    if x < 1e-3 {
        // (sin x - x cos x)/x^3 = 1/3 - x^2/30 + x^4/840
        c * height * radius.powi(3) * (1.0 / 3.0 - x * x / 30.0 + x.powi(4) / 840.0)
    } else {
        c * height * (x.sin() - x * x.cos()) / (k * k * k)
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0 + x.powi(4) / 120.0
    } else {
        x.sin() / x
    }
}

/// Master radial grid for oscillatory transform integrals: composite
/// Gauss-Legendre with panels short enough to resolve sin(k_max r).
struct TransformGrid {
    r: Vec<f64>,
    /// r^2 f(r) * quadrature weight at each node.
    fw: Vec<f64>,
}

impl TransformGrid {
    fn build<F: Fn(f64) -> f64>(f: F, r_max: f64, breaks: &[f64], k_max: f64) -> Self {
        // panel length: at most a quarter period of the fastest oscillation
        let max_len = (0.25 * 2.0 * PI / k_max.max(1.0)).min(r_max / 8.0);
        let mut edges: Vec<f64> = vec![0.0];
        for &b in breaks {
            if b > 0.0 && b < r_max {
                edges.push(b);
            }
        }
        edges.push(r_max);
        edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
        edges.dedup();
        let rule = gauss_legendre(16);
        let mut r = Vec::new();
        let mut fw = Vec::new();
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            let n_sub = ((b - a) / max_len).ceil().max(1.0) as usize;
            for s in 0..n_sub {
                let lo = a + (b - a) * s as f64 / n_sub as f64;
                let hi = a + (b - a) * (s + 1) as f64 / n_sub as f64;
                let half = 0.5 * (hi - lo);
                let mid = 0.5 * (lo + hi);
                for (&x, &wt) in rule.nodes.iter().zip(&rule.weights) {
                    let ri = mid + half * x;
                    r.push(ri);
                    fw.push(half * wt * ri * ri * f(ri));
                }
            }
        }
        TransformGrid { r, fw }
    }

    /// (2pi)^{-3/2} 4pi int r^2 f(r) sinc(kr) dr
    fn transform_at(&self, k: f64) -> f64 {
        let mut acc = 0.0;
        for (&ri, &fwi) in self.r.iter().zip(&self.fw) {
            acc += fwi * sinc(k * ri);
        }
        (2.0 * PI).powf(-1.5) * 4.0 * PI * acc
    }
}

/// Sample the radial transform of `f` on [0, k_max] and spline it. The left
/// end is clamped with derivative zero (transforms of radial functions are
/// even in k).
fn numeric_transform_spline<F: Fn(f64) -> f64>(
    f: F,
    r_max: f64,
    breaks: &[f64],
    k_max: f64,
) -> Result<Arc<ClampedSpline>> {
    let grid = TransformGrid::build(f, r_max, breaks, k_max);
    let n = ((k_max / 0.004).ceil() as usize).clamp(1200, 20_000);
    let ks: Vec<f64> = (0..=n).map(|i| k_max * i as f64 / n as f64).collect();
    let vs: Vec<f64> = ks.iter().map(|&k| grid.transform_at(k)).collect();
    if vs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Quadrature(
            "numeric radial transform produced non-finite values".into(),
        ));
    }
    Ok(Arc::new(ClampedSpline::new(ks, vs, 0.0)))
}

/// How the kernel's angular integral gets at the transform.
enum TransformSource {
    Analytic(Vec<Component>),
    Spline(Arc<ClampedSpline>),
}

impl TransformSource {
    fn eval(&self, k: f64) -> f64 {
        match self {
            TransformSource::Analytic(parts) => parts.iter().map(|c| c.transform(k)).sum(),
            TransformSource::Spline(s) => s.eval(k),
        }
    }
}

/// The momentum-space kernel of one angular-momentum sector:
/// W_l(p,q) = (2pi)^{-1/2} int_{-1}^{1} Vhat(sqrt(p^2+q^2-2pq u)) P_l(u) du,
/// so that (Vhat * h)(p) = int W_0(p,q) h(q) q^2 dq for radial h.
pub struct SectorKernel {
    pub ell: usize,
    source: TransformSource,
    /// Gauss nodes in u paired with weight * P_l(u).
    u_nodes: Vec<f64>,
    u_weights: Vec<f64>,
    k_max: f64,
}

impl SectorKernel {
    /// Build a kernel for the given profile. The angular Gauss order starts
    /// at 64 and doubles until two consecutive orders agree to 1e-10 on probe
    /// momenta (capped at 512).
    pub fn build(profile: RadialProfile<'_>, ell: usize, k_max: f64) -> Result<SectorKernel> {
        if !(k_max.is_finite() && k_max > 0.0) {
            return Err(Error::Config(format!("kernel k_max must be > 0 (got {k_max})")));
        }
        let source = if profile.is_zero() {
            TransformSource::Analytic(vec![])
        } else {
            match profile.analytic_components() {
                Some(parts) => TransformSource::Analytic(parts),
                None => TransformSource::Spline(numeric_transform_spline(
                    |r| profile.value(r),
                    profile.r_support(),
                    &profile.breaks(),
                    k_max,
                )?),
            }
        };
        let mut n_u = 64usize;
        loop {
            let here = Self::with_order(&source, ell, k_max, n_u);
            if n_u >= 512 {
                break Ok(here);
            }
            let finer = Self::with_order(&source, ell, k_max, 2 * n_u);
            let probes = [
                (0.5 * k_max * 0.5, 0.5 * k_max * 0.5),
                (0.35 * k_max, 0.1 * k_max),
                (0.49 * k_max, 0.49 * k_max),
                (0.02 * k_max, 0.3 * k_max),
            ];
            let mut worst = 0.0_f64;
            for &(p, q) in &probes {
                worst = worst.max((here.eval(p, q) - finer.eval(p, q)).abs());
            }
            if worst <= 1e-10 {
                break Ok(here);
            }
            n_u *= 2;
        }
    }

    fn with_order(source: &TransformSource, ell: usize, k_max: f64, n_u: usize) -> SectorKernel {
        let rule = gauss_legendre(n_u);
        let mut u_nodes = Vec::with_capacity(n_u);
        let mut u_weights = Vec::with_capacity(n_u);
        for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
            let pl = special::legendre_all(ell, u)[ell];
            u_nodes.push(u);
            u_weights.push(w * pl);
        }
        SectorKernel {
            ell,
            source: match source {
                TransformSource::Analytic(parts) => TransformSource::Analytic(parts.clone()),
                TransformSource::Spline(s) => TransformSource::Spline(s.clone()),
            },
            u_nodes,
            u_weights,
            k_max,
        }
    }

    /// W_l(p, q); symmetric in (p, q) by construction.
    pub fn eval(&self, p: f64, q: f64) -> f64 {
        debug_assert!(p + q <= self.k_max * (1.0 + 1e-9));
        let p2q2 = p * p + q * q;
        let two_pq = 2.0 * p * q;
        let mut acc = 0.0;
        for (&u, &w) in self.u_nodes.iter().zip(&self.u_weights) {
            let k2 = (p2q2 - two_pq * u).max(0.0);
            acc += w * self.source.eval(k2.sqrt());
        }
        acc / (2.0 * PI).sqrt()
    }
}

/// Independent construction of the same kernel through the double spherical
/// Bessel transform of V itself:
/// W_l(p,q) = (2/pi) int_0^inf r^2 V(r) j_l(pr) j_l(qr) dr.
/// Used as a cross-check oracle for the angular-integral route.
pub struct SectorKernelBessel {
    ell: usize,
    r: Vec<f64>,
    fw: Vec<f64>,
}

impl SectorKernelBessel {
    pub fn build(profile: RadialProfile<'_>, ell: usize, k_max: f64) -> SectorKernelBessel {
        let grid = TransformGrid::build(
            |r| profile.value(r),
            profile.r_support(),
            &profile.breaks(),
            k_max,
        );
        SectorKernelBessel {
            ell,
            r: grid.r,
            fw: grid.fw,
        }
    }

    pub fn eval(&self, p: f64, q: f64) -> f64 {
        let mut acc = 0.0;
        for (&ri, &fwi) in self.r.iter().zip(&self.fw) {
            let jp = special::sph_bessel_all(self.ell, p * ri)[self.ell];
            let jq = special::sph_bessel_all(self.ell, q * ri)[self.ell];
            acc += fwi * jp * jq;
        }
        2.0 / PI * acc
    }
}

/// Read a tabulated potential: two numeric columns (r, V), whitespace- or
/// comma-separated, '#' comments, optional single header line.
pub fn load_table(path: &Path) -> Result<PotentialSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_table(&text)
}

/// Parse table text (see `load_table`).
pub fn parse_table(text: &str) -> Result<PotentialSpec> {
    let mut rs: Vec<f64> = Vec::new();
    let mut vs: Vec<f64> = Vec::new();
    let mut header_skipped = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let parsed: Option<(f64, f64)> = match fields.as_slice() {
            [a, b] => match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => Some((x, y)),
                _ => None,
            },
            _ => None,
        };
        match parsed {
            Some((r, v)) => {
                if !r.is_finite() || !v.is_finite() {
                    return Err(Error::Table {
                        line: line_no,
                        message: "non-finite value".into(),
                    });
                }
                if let Some(&last) = rs.last() {
                    if r == last {
                        return Err(Error::Table {
                            line: line_no,
                            message: format!("duplicated radius {r}"),
                        });
                    }
                    if r < last {
                        return Err(Error::Table {
                            line: line_no,
                            message: format!("radii must be strictly increasing ({r} after {last})"),
                        });
                    }
                }
                rs.push(r);
                vs.push(v);
            }
            None => {
                if rs.is_empty() && !header_skipped {
                    header_skipped = true; // tolerate one header line
                } else {
                    return Err(Error::Table {
                        line: line_no,
                        message: format!("expected two numeric columns, got {line:?}"),
                    });
                }
            }
        }
    }
    if rs.len() < 4 {
        return Err(Error::Table {
            line: 0,
            message: format!("need at least 4 samples, got {}", rs.len()),
        });
    }
    PotentialSpec::new(
        PotentialModel::Tabulated(Arc::new(Pchip::new(rs, vs))),
        1.0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_values() {
        let v = PotentialSpec::gaussian(1.0, 1.0).unwrap();
        assert_eq!(v.value(0.0), -1.0);
        assert!((v.value(1.0) + (-0.5_f64).exp()).abs() < 1e-15);
        assert!(v.evaluate_position(-0.1).is_err());
    }

    #[test]
    fn square_well_values() {
        let v = PotentialSpec::square_well(2.0, 1.0).unwrap();
        assert_eq!(v.value(0.5), -2.0);
        assert_eq!(v.value(1.5), 0.0);
    }

    #[test]
    fn gaussian_transform_closed_form() {
        let v = PotentialSpec::gaussian(1.0, 1.0).unwrap();
        for &p in &[0.0, 0.3, 1.0, 2.0, 5.0] {
            let want = -(-0.5_f64 * p * p).exp();
            assert!((v.fourier(p) - want).abs() < 1e-14);
            assert!(v.fourier(p) < 0.0);
        }
        // width/depth scaling
        let v = PotentialSpec::gaussian(2.5, 0.7).unwrap();
        let want = -2.5 * 0.7_f64.powi(3) * (-0.5_f64 * 0.49 * 4.0).exp();
        assert!((v.fourier(2.0) - want).abs() < 1e-14);
    }

    #[test]
    fn transform_at_zero_matches_volume_integral() {
        // Vhat(0) = (2pi)^{-3/2} * 4pi * int r^2 V dr
        let v = PotentialSpec::gaussian(1.0, 1.0).unwrap();
        let direct = (2.0 * PI).powf(-1.5)
            * 4.0
            * PI
            * quad::integrate_adaptive(|r| r * r * v.value(r), 0.0, 12.0, 1e-12).unwrap();
        assert!((v.fourier(0.0) - direct).abs() < 1e-10);
    }

    #[test]
    fn square_well_transform_changes_sign() {
        let v = PotentialSpec::square_well(1.0, 1.0).unwrap();
        // first zero of sin x - x cos x is at x ~ 4.4934
        assert!(v.fourier(4.0) < 0.0);
        assert!(v.fourier(5.0) > 0.0);
        let (mut a, mut b) = (4.0, 5.0);
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if v.fourier(m) < 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        assert!((0.5 * (a + b) - 4.493409457909064).abs() < 1e-9);
    }

    #[test]
    fn norms_gaussian() {
        let v = PotentialSpec::gaussian(1.0, 1.0).unwrap();
        let n = v.norms();
        assert!((n.l1_minus - (2.0 * PI).powf(1.5)).abs() < 1e-9);
        assert!((n.l32_minus - 4.0 * PI / 3.0).abs() < 1e-9);
        assert_eq!(n.linf_minus, 1.0);
        assert_eq!(n.l1_plus, 0.0);
    }

    #[test]
    fn norms_square_well() {
        let v = PotentialSpec::square_well(2.0, 1.5).unwrap();
        let n = v.norms();
        let vol = 4.0 * PI * 1.5_f64.powi(3) / 3.0;
        assert!((n.l1_minus - 2.0 * vol).abs() < 1e-8);
        assert!((n.l32_minus - 2.0 * vol.powf(2.0 / 3.0)).abs() < 1e-8);
        assert_eq!(n.linf_minus, 2.0);
    }

    #[test]
    fn decomposition_pointwise() {
        let v = PotentialSpec::two_gaussian(-5.0, 1.0, 0.3, 2.0).unwrap();
        let mut r = 0.0;
        while r < 12.0 {
            let (vp, vm) = (v.value_plus(r), v.value_minus(r));
            assert!(vp >= 0.0 && vm >= 0.0);
            assert_eq!(vp * vm, 0.0);
            assert!((vp - vm - v.value(r)).abs() < 1e-15);
            r += 0.013;
        }
        assert_eq!(v.sign_changes().len(), 1);
        assert!((v.sign_changes()[0] - (5.0_f64 / 0.3).ln().sqrt() / 0.375_f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn lambda_scale_scales_everything() {
        let v = PotentialSpec::gaussian(1.0, 1.0).unwrap();
        let v2 = v.with_lambda_scale(2.0).unwrap();
        assert_eq!(v2.value(0.4), 2.0 * v.value(0.4));
        assert_eq!(v2.fourier(0.7), 2.0 * v.fourier(0.7));
        assert!((v2.norms().l1_minus - 2.0 * v.norms().l1_minus).abs() < 1e-8);
        // L^{3/2} norm scales linearly in the coupling
        assert!((v2.norms().l32_minus - 2.0 * v.norms().l32_minus).abs() < 1e-8);
    }

    #[test]
    fn kernel_symmetry_and_sign() {
        let v = PotentialSpec::gaussian(1.0, 1.0).unwrap();
        let k = v.sector_kernel(0, 16.0).unwrap();
        let pairs = [(0.5, 1.5), (0.1, 7.0), (3.3, 3.3), (2.0, 0.01)];
        for &(p, q) in &pairs {
            assert_eq!(k.eval(p, q), k.eval(q, p));
            assert!(k.eval(p, q) < 0.0, "W0 must inherit strict negativity");
        }
    }

    #[test]
    fn tabulated_round_trip_against_gaussian() {
        let mut text = String::from("# r V\n");
        for i in 0..=1200 {
            let r = 10.0 * i as f64 / 1200.0;
            text.push_str(&format!("{:.12e} {:.12e}\n", r, -(-r * r / 2.0_f64).exp()));
        }
        let tab = parse_table(&text).unwrap();
        let exact = PotentialSpec::gaussian(1.0, 1.0).unwrap();
        let mut r = 0.0;
        while r < 5.0 {
            assert!(
                (tab.value(r) - exact.value(r)).abs() < 1e-6,
                "table interpolation off at r={r}"
            );
            r += 0.0173;
        }
        assert!((tab.norms().l1_minus - exact.norms().l1_minus).abs() < 1e-4);
        assert!((tab.norms().l32_minus - exact.norms().l32_minus).abs() < 1e-4);
        // transform via the numeric spline path
        for &p in &[0.0, 0.5, 1.3, 4.0] {
            assert!(
                (tab.fourier(p) - exact.fourier(p)).abs() < 1e-5,
                "transform off at p={p}: {} vs {}",
                tab.fourier(p),
                exact.fourier(p)
            );
        }
    }

    #[test]
    fn table_errors_name_the_line() {
        let text = "0.0 -1.0\n0.5 -0.9\n0.5 -0.8\n1.0 -0.5\n";
        match parse_table(text) {
            Err(Error::Table { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected duplicate-radius error, got {other:?}"),
        }
        let text = "0.0 -1.0\n0.5 banana\n";
        match parse_table(text) {
            Err(Error::Table { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn well_formed_table_parses() {
        let mut text = String::from("r,V\n");
        for i in 0..100 {
            text.push_str(&format!("{},{}\n", 0.1 * i as f64, -1.0 / (1.0 + i as f64)));
        }
        let spec = parse_table(&text).unwrap();
        match spec.model() {
            PotentialModel::Tabulated(t) => assert_eq!(t.x().len(), 100),
            _ => unreachable!(),
        }
    }

    #[test]
    fn zero_profile_detection() {
        let attractive = PotentialSpec::gaussian(1.0, 1.0).unwrap();
        assert!(attractive.profile(ProfileKind::PositivePart).is_zero());
        assert!(!attractive.profile(ProfileKind::SqrtNegativePart).is_zero());
        let repulsive = PotentialSpec::gaussian(-1.0, 1.0).unwrap();
        assert!(repulsive.profile(ProfileKind::SqrtNegativePart).is_zero());
        assert!(!repulsive.profile(ProfileKind::PositivePart).is_zero());
    }
}
