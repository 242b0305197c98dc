//! Radial momentum grids with Fermi-surface grading and assembly of the dense
//! symmetric sector matrices for K_{beta,mu} + V and the Birman-Schwinger
//! sandwich.
//!
//! Matrices live in the symmetrised basis e_i = p_i sqrt(w_i) * (value at p_i),
//! in which the quadrature approximation of the radial quadratic form
//! int k |h|^2 q^2 dq + int int h W h p^2 q^2 dp dq becomes <c, H c>.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::potential::{PotentialSpec, ProfileKind, SectorKernel};
use crate::quad::gauss_legendre;
use crate::symbols::{k_symbol, ThermoParams};
#[cfg(test)]
use crate::symbols::Beta;

/// Default number of base panels on [0, p_max].
pub const BASE_PANELS: usize = 5;
/// Default nodes per panel.
pub const DEFAULT_N_PER_PANEL: usize = 16;
/// Default dyadic grading depth toward the Fermi surface.
pub const DEFAULT_GRADING_LEVELS: usize = 6;

/// Quadrature grid on [0, p_max]: composite Gauss-Legendre panels, dyadically
/// graded toward p = sqrt(mu) when mu > 0.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    panels: Vec<(f64, f64)>,
    p_max: f64,
    n_per_panel: usize,
    grading_levels: usize,
}

impl RadialGrid {
    /// Momentum nodes, strictly increasing, strictly inside (0, p_max).
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Plain dp quadrature weights; integrals against q^2 dq use w_i p_i^2.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn panels(&self) -> &[(f64, f64)] {
        &self.panels
    }

    pub fn n_per_panel(&self) -> usize {
        self.n_per_panel
    }

    pub fn grading_levels(&self) -> usize {
        self.grading_levels
    }

    /// Width of the narrowest panel touching the Fermi surface.
    pub fn fermi_panel_width(&self, mu: f64) -> Option<f64> {
        if mu <= 0.0 {
            return None;
        }
        let pf = mu.sqrt();
        self.panels
            .iter()
            .filter(|(a, b)| (*a - pf).abs() < 1e-12 * self.p_max || (*b - pf).abs() < 1e-12 * self.p_max)
            .map(|(a, b)| b - a)
            .fold(None, |acc: Option<f64>, w| Some(acc.map_or(w, |v| v.min(w))))
    }

    /// Quadrature of int_0^{p_max} f(p) p^2 dp on this grid.
    pub fn integrate_p2<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * p * p * f(p))
            .sum()
    }
}

/// Composite Gauss-Legendre grid with dyadic Fermi-surface grading.
///
/// `BASE_PANELS` uniform panels cover [0, p_max]; when mu > 0 the panel
/// containing sqrt(mu) is split there and replaced by panels whose widths
/// halve toward the surface `grading_levels` times on each side.
pub fn build_grid(
    n_per_panel: usize,
    p_max: f64,
    mu: f64,
    grading_levels: usize,
) -> Result<RadialGrid> {
    if n_per_panel < 4 {
        return Err(Error::Config(format!(
            "n_per_panel must be at least 4 (got {n_per_panel})"
        )));
    }
    if !(p_max.is_finite() && p_max > 0.0) {
        return Err(Error::Config(format!("p_max must be positive (got {p_max})")));
    }
    if mu > 0.0 && p_max * p_max <= mu {
        return Err(Error::Config(format!(
            "p_max^2 = {:.6e} must exceed mu = {mu:.6e}",
            p_max * p_max
        )));
    }
    let base: Vec<f64> = (0..=BASE_PANELS)
        .map(|i| p_max * i as f64 / BASE_PANELS as f64)
        .collect();
    let mut panels: Vec<(f64, f64)> = Vec::new();
    let pf = if mu > 0.0 { Some(mu.sqrt()) } else { None };
    let snap = 1e-12 * p_max;
    for i in 0..BASE_PANELS {
        let (a, b) = (base[i], base[i + 1]);
        match pf {
            Some(pf) if (pf - a).abs() <= snap && i > 0 => {
                // surface sits on the left edge; grade this panel toward it
                grade_panel(&mut panels, a, b, grading_levels, false);
            }
            Some(pf) if (pf - b).abs() <= snap && i + 1 < BASE_PANELS => {
                grade_panel(&mut panels, a, b, grading_levels, true);
            }
            Some(pf) if pf > a + snap && pf < b - snap => {
                grade_panel(&mut panels, a, pf, grading_levels, true);
                grade_panel(&mut panels, pf, b, grading_levels, false);
            }
            _ => panels.push((a, b)),
        }
    }
    let rule = gauss_legendre(n_per_panel);
    let mut nodes = Vec::with_capacity(panels.len() * n_per_panel);
    let mut weights = Vec::with_capacity(panels.len() * n_per_panel);
    for &(a, b) in &panels {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            nodes.push(mid + half * x);
            weights.push(half * w);
        }
    }
    Ok(RadialGrid {
        nodes,
        weights,
        panels,
        p_max,
        n_per_panel,
        grading_levels,
    })
}

/// Append panels covering [a, b] with widths halving toward the right end
/// (`toward_right`) or the left end.
fn grade_panel(panels: &mut Vec<(f64, f64)>, a: f64, b: f64, levels: usize, toward_right: bool) {
    let len = b - a;
    let mut edges = vec![a];
    if toward_right {
        // a, a + L/2, a + 3L/4, ..., b - L/2^levels, b
        for j in 1..=levels {
            edges.push(b - len * 0.5_f64.powi(j as i32));
        }
    } else {
        for j in (1..=levels).rev() {
            edges.push(a + len * 0.5_f64.powi(j as i32));
        }
    }
    edges.push(b);
    for w in edges.windows(2) {
        panels.push((w[0], w[1]));
    }
}

/// Grid with the library defaults: p_max = 8 max(sqrt(mu), 1), five base
/// panels, grading depth 6, 16 nodes per panel.
pub fn default_grid(mu: f64) -> Result<RadialGrid> {
    build_grid(
        DEFAULT_N_PER_PANEL,
        default_p_max(mu),
        mu,
        DEFAULT_GRADING_LEVELS,
    )
}

pub fn default_p_max(mu: f64) -> f64 {
    8.0 * mu.max(0.0).sqrt().max(1.0)
}

/// The kernel part of a sector matrix, p_i sqrt(w_i) W_l(p_i,p_j) p_j sqrt(w_j).
/// Temperature-independent, so bisections in T reuse it across assemblies.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub ell: usize,
    mat: DMatrix<f64>,
    grid: Arc<RadialGrid>,
}

impl KernelMatrix {
    pub fn build(grid: &Arc<RadialGrid>, kernel: &SectorKernel) -> KernelMatrix {
        let n = grid.len();
        let p = grid.nodes();
        let s: Vec<f64> = p
            .iter()
            .zip(grid.weights())
            .map(|(&pi, &wi)| pi * wi.sqrt())
            .collect();
        let mut mat = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = s[i] * kernel.eval(p[i], p[j]) * s[j];
                mat[(i, j)] = v;
                mat[(j, i)] = v;
            }
        }
        KernelMatrix {
            ell: kernel.ell,
            mat,
            grid: grid.clone(),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    /// H = diag(K_{beta,mu}(p_i^2)) + kernel part.
    pub fn assemble(&self, params: ThermoParams) -> SectorOperator {
        let mut h = self.mat.clone();
        for (i, &p) in self.grid.nodes().iter().enumerate() {
            h[(i, i)] += k_symbol(p * p, &params);
        }
        SectorOperator {
            ell: self.ell,
            params,
            matrix: h,
            grid: self.grid.clone(),
        }
    }
}

/// Dense symmetric matrix of K_{beta,mu} + V in one angular-momentum sector.
#[derive(Debug, Clone)]
pub struct SectorOperator {
    pub ell: usize,
    pub params: ThermoParams,
    matrix: DMatrix<f64>,
    grid: Arc<RadialGrid>,
}

impl SectorOperator {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// Quadratic form <c, H c> for coefficients in the symmetrised basis.
    pub fn quadratic_form(&self, c: &[f64]) -> f64 {
        let n = self.n();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += c[i] * self.matrix[(i, j)] * c[j];
            }
        }
        acc
    }

    /// Coefficients of a radial function's values at the nodes.
    pub fn coefficients_of<F: Fn(f64) -> f64>(&self, h: F) -> Vec<f64> {
        self.grid
            .nodes()
            .iter()
            .zip(self.grid.weights())
            .map(|(&p, &w)| h(p) * p * w.sqrt())
            .collect()
    }
}

/// Assemble K_{beta,mu} + V in sector `ell` (at T=0 the diagonal carries
/// |p^2 - mu|).
pub fn assemble_sector_operator(
    grid: &Arc<RadialGrid>,
    spec: &PotentialSpec,
    ell: usize,
    params: ThermoParams,
) -> Result<SectorOperator> {
    let kernel = spec.sector_kernel(ell, kernel_k_max(grid))?;
    Ok(KernelMatrix::build(grid, &kernel).assemble(params))
}

pub fn kernel_k_max(grid: &RadialGrid) -> f64 {
    2.0 * grid.p_max() * (1.0 + 1e-9)
}

/// The Birman-Schwinger sandwich B = M(sqrt(V-)) (M_K + M(V+) + e)^{-1} M(sqrt(V-))
/// in one sector, as a dense symmetric matrix.
#[derive(Debug, Clone)]
pub struct BsOperator {
    pub ell: usize,
    pub params: ThermoParams,
    pub e_shift: f64,
    matrix: DMatrix<f64>,
}

impl BsOperator {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

/// Reusable pieces of the sandwich: the sqrt(V-) and V+ kernel matrices are
/// temperature-independent, only the diagonal resolvent changes.
pub struct BsAssembler {
    grid: Arc<RadialGrid>,
    sqrt_minus: KernelMatrix,
    plus: Option<KernelMatrix>,
}

impl BsAssembler {
    pub fn new(grid: &Arc<RadialGrid>, spec: &PotentialSpec, ell: usize) -> Result<BsAssembler> {
        let k_max = kernel_k_max(grid);
        let sqrt_minus_kernel =
            SectorKernel::build(spec.profile(ProfileKind::SqrtNegativePart), ell, k_max)?;
        let sqrt_minus = KernelMatrix::build(grid, &sqrt_minus_kernel);
        let plus_profile = spec.profile(ProfileKind::PositivePart);
        let plus = if plus_profile.is_zero() {
            None
        } else {
            let k = SectorKernel::build(plus_profile, ell, k_max)?;
            Some(KernelMatrix::build(grid, &k))
        };
        Ok(BsAssembler {
            grid: grid.clone(),
            sqrt_minus,
            plus,
        })
    }

    /// Assemble B at the given temperature and shift. Preconditions: e > 0 at
    /// T=0 (the unshifted |p^2-mu| is singular on the Fermi surface); e >= 0
    /// otherwise.
    pub fn assemble(&self, params: ThermoParams, e_shift: f64) -> Result<BsOperator> {
        if e_shift < 0.0 {
            return Err(Error::Domain(format!("e_shift must be >= 0 (got {e_shift})")));
        }
        if params.beta.is_zero_temperature() && e_shift == 0.0 {
            return Err(Error::Domain(
                "at T=0 the Birman-Schwinger sandwich needs e_shift > 0".into(),
            ));
        }
        let n = self.grid.len();
        let mut inner = match &self.plus {
            Some(kp) => kp.matrix().clone(),
            None => DMatrix::zeros(n, n),
        };
        for (i, &p) in self.grid.nodes().iter().enumerate() {
            inner[(i, i)] += k_symbol(p * p, &params) + e_shift;
        }
        let lu = inner.lu();
        let solved = lu.solve(self.sqrt_minus.matrix()).ok_or_else(|| {
            Error::Singular("K + V_+ + e is singular; increase e_shift".into())
        })?;
        let mut b = self.sqrt_minus.matrix() * solved;
        // exact symmetry by averaging (the solve introduces rounding asymmetry)
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (b[(i, j)] + b[(j, i)]);
                b[(i, j)] = v;
                b[(j, i)] = v;
            }
        }
        Ok(BsOperator {
            ell: self.sqrt_minus.ell,
            params,
            e_shift,
            matrix: b,
        })
    }
}

/// One-call convenience over `BsAssembler`.
pub fn assemble_birman_schwinger(
    grid: &Arc<RadialGrid>,
    spec: &PotentialSpec,
    ell: usize,
    params: ThermoParams,
    e_shift: f64,
) -> Result<BsOperator> {
    BsAssembler::new(grid, spec, ell)?.assemble(params, e_shift)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_quadrature_exactness() {
        let grid = build_grid(16, 8.0, 1.0, 6).unwrap();
        // int_0^8 p^2 dp and higher even powers, well within Gauss order
        for k in [1usize, 2, 5, 10] {
            let exact = 8.0_f64.powi(2 * k as i32 + 1) / (2.0 * k as f64 + 1.0);
            let got: f64 = grid
                .nodes()
                .iter()
                .zip(grid.weights())
                .map(|(&p, &w)| w * p.powi(2 * k as i32))
                .sum();
            assert!(
                ((got - exact) / exact).abs() < 1e-12,
                "p^{} integral: {got} vs {exact}",
                2 * k
            );
        }
    }

    #[test]
    fn grid_shape_and_grading() {
        let grid = build_grid(16, 8.0, 1.0, 6).unwrap();
        // 4 plain base panels + 2 * (6 + 1) graded panels
        assert_eq!(grid.panels().len(), 4 + 2 * 7);
        assert_eq!(grid.len(), 18 * 16);
        // nodes strictly increasing and interior
        for w in grid.nodes().windows(2) {
            assert!(w[0] < w[1]);
        }
        assert!(grid.nodes()[0] > 0.0);
        assert!(*grid.nodes().last().unwrap() < 8.0);
        assert!(grid.weights().iter().all(|&w| w > 0.0));
        // the panel touching sqrt(mu)=1 has width (1.6-1.0)*2^-6 on the right,
        // 1.0*2^-6 on the left; the reported minimum is the right one
        let w = grid.fermi_panel_width(1.0).unwrap();
        assert!((w - 0.6 / 64.0).abs() < 1e-12, "fermi panel width {w}");
    }

    #[test]
    fn grid_without_grading_for_negative_mu() {
        let grid = build_grid(8, 4.0, -1.0, 6).unwrap();
        assert_eq!(grid.panels().len(), BASE_PANELS);
        assert_eq!(grid.len(), BASE_PANELS * 8);
    }

    #[test]
    fn grid_rejects_bad_config() {
        assert!(build_grid(3, 8.0, 1.0, 6).is_err());
        assert!(build_grid(16, 0.5, 1.0, 6).is_err()); // p_max^2 < mu
        assert!(build_grid(16, -1.0, 0.0, 6).is_err());
    }

    #[test]
    fn grid_with_surface_on_base_edge() {
        // p_max = 5, mu = 1: sqrt(mu) = 1.0 is exactly the first base edge.
        let grid = build_grid(8, 5.0, 1.0, 4).unwrap();
        let w = grid.fermi_panel_width(1.0).unwrap();
        assert!((w - 1.0 * 0.5_f64.powi(4)).abs() < 1e-12);
        let total: f64 = grid.panels().iter().map(|(a, b)| b - a).sum();
        assert!((total - 5.0).abs() < 1e-12);
    }

    #[test]
    fn operator_diagonal_when_v_zero() {
        let grid = Arc::new(build_grid(8, 8.0, 1.0, 3).unwrap());
        let spec = PotentialSpec::gaussian(0.0, 1.0).unwrap();
        let params = ThermoParams::new(Beta::Finite(2.0), 1.0).unwrap();
        let op = assemble_sector_operator(&grid, &spec, 0, params).unwrap();
        for i in 0..op.n() {
            for j in 0..op.n() {
                if i == j {
                    let p = grid.nodes()[i];
                    assert_eq!(op.matrix()[(i, i)], k_symbol(p * p, &params));
                    assert!(op.matrix()[(i, i)] >= 2.0 / 2.0);
                } else {
                    assert_eq!(op.matrix()[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn operator_symmetry_is_exact() {
        let grid = Arc::new(build_grid(8, 8.0, 1.0, 3).unwrap());
        let spec = PotentialSpec::gaussian(5.0, 1.0).unwrap();
        let params = ThermoParams::new(Beta::Finite(10.0), 1.0).unwrap();
        let op = assemble_sector_operator(&grid, &spec, 0, params).unwrap();
        let m = op.matrix();
        for i in 0..op.n() {
            for j in 0..op.n() {
                assert_eq!(m[(i, j)], m[(j, i)]);
            }
        }
    }

    #[test]
    fn bs_requires_shift_at_zero_temperature() {
        let grid = Arc::new(build_grid(8, 8.0, 1.0, 3).unwrap());
        let spec = PotentialSpec::gaussian(5.0, 1.0).unwrap();
        let params = ThermoParams::zero_temperature(1.0).unwrap();
        assert!(assemble_birman_schwinger(&grid, &spec, 0, params, 0.0).is_err());
        assert!(assemble_birman_schwinger(&grid, &spec, 0, params, 0.1).is_ok());
    }
}
