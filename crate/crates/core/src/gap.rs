//! The nonlinear side: damped self-consistent solution of the gap equation
//! Delta = -Vhat * (Delta/E tanh(beta E/2)), reconstruction of the pair
//! (gamma, alpha-hat), the free-energy functional and entropy, the energy gap,
//! and stationarity diagnostics.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::discretize::{kernel_k_max, KernelMatrix, RadialGrid};
use crate::error::{Error, Result};
use crate::linear::lowest_eigenpair;
use crate::potential::PotentialSpec;
use crate::symbols::{dispersion, e_coth_half_beta, gamma0, Beta, ThermoParams};

/// Starting point of the fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedMode {
    /// Delta identically 0.1 |mu|.
    Constant,
    /// Lowest eigenvector of the l=0 sector operator, rescaled to peak 0.1 |mu|.
    LinearMode,
}

/// Knobs of the damped iteration.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Mixing weight theta in (0, 1]; the iterate moves by theta toward G(Delta).
    pub damping: f64,
    /// Relative residual target: stop when sup|Delta - G| <= tol (sup|Delta| + |mu|).
    pub tol: f64,
    pub max_iter: usize,
    pub seed: SeedMode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            damping: 0.5,
            tol: 1e-10,
            max_iter: 20_000,
            seed: SeedMode::Constant,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!(
                "damping must lie in (0, 1] (got {})",
                self.damping
            )));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Config(format!("tol must be positive (got {})", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// A converged solution of the gap equation on the grid, with everything
/// reconstructed from it.
#[derive(Debug, Clone)]
pub struct GapState {
    pub params: ThermoParams,
    pub delta: Vec<f64>,
    /// Quasi-particle energies E_i = sqrt((p_i^2-mu)^2 + Delta_i^2).
    pub energy: Vec<f64>,
    pub gamma: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Energy gap Xi = inf_p E(p).
    pub xi: f64,
    pub f_value: f64,
    pub f_normal: f64,
    /// sup|Delta - G(Delta)| / (sup|Delta| + |mu|) at the accepted iterate.
    pub residual_sup: f64,
    pub iterations: usize,
    pub converged_to_trivial: bool,
    grid: Arc<RadialGrid>,
}

impl GapState {
    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    /// Peak gap value max_i |Delta_i|.
    pub fn delta_peak(&self) -> f64 {
        self.delta.iter().fold(0.0, |m, &d| m.max(d.abs()))
    }

    /// Delta at the node nearest the Fermi momentum.
    pub fn delta_at_fermi(&self) -> f64 {
        if self.params.mu <= 0.0 {
            return self.delta.first().copied().unwrap_or(0.0);
        }
        let pf = self.params.mu.sqrt();
        let mut best = (f64::INFINITY, 0.0);
        for (&p, &d) in self.grid.nodes().iter().zip(&self.delta) {
            let dist = (p - pf).abs();
            if dist < best.0 {
                best = (dist, d);
            }
        }
        best.1
    }
}

/// The raw (unsymmetrised) l=0 kernel values W_0(p_i, p_j) together with the
/// q^2 dq quadrature weights; G(Delta) is one matrix-vector product.
pub struct GapKernel {
    grid: Arc<RadialGrid>,
    w0: DMatrix<f64>,
    /// p_j^2 w_j
    q2w: Vec<f64>,
}

impl GapKernel {
    pub fn build(grid: &Arc<RadialGrid>, spec: &PotentialSpec) -> Result<GapKernel> {
        let kernel = spec.sector_kernel(0, kernel_k_max(grid))?;
        let n = grid.len();
        let p = grid.nodes();
        let mut w0 = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = kernel.eval(p[i], p[j]);
                w0[(i, j)] = v;
                w0[(j, i)] = v;
            }
        }
        let q2w = p
            .iter()
            .zip(grid.weights())
            .map(|(&pj, &wj)| pj * pj * wj)
            .collect();
        Ok(GapKernel {
            grid: grid.clone(),
            w0,
            q2w,
        })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    /// (Vhat * h)(p_i) = sum_j W_0(p_i, p_j) h_j p_j^2 w_j for radial h.
    pub fn convolve(&self, h: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.w0[(i, j)] * h[j] * self.q2w[j];
            }
            out[i] = acc;
        }
        out
    }

    /// One gap-equation application G(Delta)_i = -sum_j W_0(p_i,p_j)
    /// (Delta_j/E_j) tanh(beta E_j/2) p_j^2 w_j (tanh factor = 1 at T=0).
    pub fn apply(&self, delta: &[f64], params: &ThermoParams) -> Vec<f64> {
        let t: Vec<f64> = self
            .grid
            .nodes()
            .iter()
            .zip(delta)
            .map(|(&p, &d)| {
                let e = dispersion(p * p, d, params.mu);
                let ratio = if e > 0.0 { d / e } else { 0.0 };
                match params.beta {
                    Beta::Infinite => ratio,
                    Beta::Finite(b) => ratio * (0.5 * b * e).tanh(),
                }
            })
            .collect();
        let mut g = self.convolve(&t);
        for v in g.iter_mut() {
            *v = -*v;
        }
        g
    }
}

/// Solve the gap equation by damped fixed-point iteration.
///
/// The iteration is Delta <- (1-theta) Delta + theta G(Delta); theta halves
/// (up to four times) whenever the residual increases. A collapse of
/// sup|Delta| below 1e-12 |mu| is reported as the trivial solution.
pub fn solve_gap(
    grid: &Arc<RadialGrid>,
    spec: &PotentialSpec,
    params: ThermoParams,
    opts: &SolverOptions,
) -> Result<GapState> {
    opts.validate()?;
    let kernel = GapKernel::build(grid, spec)?;
    solve_gap_with_kernel(&kernel, spec, params, opts)
}

/// `solve_gap` with a prebuilt kernel (reused across temperatures).
pub fn solve_gap_with_kernel(
    kernel: &GapKernel,
    spec: &PotentialSpec,
    params: ThermoParams,
    opts: &SolverOptions,
) -> Result<GapState> {
    opts.validate()?;
    let grid = kernel.grid().clone();
    let n = grid.len();
    let mu_scale = if params.mu != 0.0 { params.mu.abs() } else { 1.0 };
    let seed_peak = 0.1 * mu_scale;
    let mut delta: Vec<f64> = match opts.seed {
        SeedMode::Constant => vec![seed_peak; n],
        SeedMode::LinearMode => {
            let op = {
                let k = spec.sector_kernel(0, kernel_k_max(&grid))?;
                KernelMatrix::build(&grid, &k).assemble(params)
            };
            let (_, v) = lowest_eigenpair(op.matrix())?;
            let mut d: Vec<f64> = grid
                .nodes()
                .iter()
                .zip(grid.weights())
                .enumerate()
                .map(|(i, (&p, &w))| v[i] / (p * w.sqrt()))
                .collect();
            let (mut peak, mut peak_abs) = (0.0, 0.0);
            for &x in &d {
                if x.abs() > peak_abs {
                    peak_abs = x.abs();
                    peak = x;
                }
            }
            if peak_abs == 0.0 {
                d = vec![seed_peak; n];
            } else {
                let scale = seed_peak / peak;
                for x in d.iter_mut() {
                    *x *= scale;
                }
            }
            d
        }
    };

    let mut theta = opts.damping;
    let mut halvings = 0;
    let mut prev_residual = f64::INFINITY;
    let mut history = Vec::new();
    let trivial_cut = 1e-12 * mu_scale;
    // A collapsing iterate can meet the residual test on its way to zero
    // (residual ~ sup|Delta| there); only iterates of physical size are
    // accepted as nontrivial solutions, anything below keeps shrinking until
    // the trivial cut fires.
    let promotion_cut = 1e-6 * mu_scale;

    for iter in 1..=opts.max_iter {
        let g = kernel.apply(&delta, &params);
        let mut residual = 0.0_f64;
        let mut sup = 0.0_f64;
        for (d, gi) in delta.iter().zip(&g) {
            residual = residual.max((d - gi).abs());
            sup = sup.max(d.abs());
        }
        history.push(residual);
        let scale = sup + params.mu.abs();
        if residual <= opts.tol * scale && sup >= promotion_cut {
            return finish(kernel, params, delta, residual / scale, iter, &grid);
        }
        if residual > prev_residual && halvings < 4 {
            theta *= 0.5;
            halvings += 1;
        }
        prev_residual = residual;
        for (d, gi) in delta.iter_mut().zip(&g) {
            *d = (1.0 - theta) * *d + theta * gi;
        }
        if delta.iter().fold(0.0_f64, |m, &d| m.max(d.abs())) < trivial_cut {
            delta = vec![0.0; n];
            return finish(kernel, params, delta, 0.0, iter, &grid);
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual: *history.last().unwrap(),
        history,
    })
}

fn finish(
    kernel: &GapKernel,
    params: ThermoParams,
    delta: Vec<f64>,
    residual_sup: f64,
    iterations: usize,
    grid: &Arc<RadialGrid>,
) -> Result<GapState> {
    let converged_to_trivial = delta.iter().all(|&d| d == 0.0);
    let energy: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(&delta)
        .map(|(&p, &d)| dispersion(p * p, d, params.mu))
        .collect();
    let (gamma, alpha) = reconstruct_state(&delta, grid, &params);
    let xi = energy_gap_from(&energy, grid, params.mu, converged_to_trivial);
    let f_value = free_energy_with_kernel(kernel, &gamma, &alpha, &params)?;
    let f_normal = free_energy_normal(grid, &params);
    Ok(GapState {
        params,
        delta,
        energy,
        gamma,
        alpha,
        xi,
        f_value,
        f_normal,
        residual_sup,
        iterations,
        converged_to_trivial,
        grid: grid.clone(),
    })
}

/// Reconstruct (gamma, alpha-hat) from Delta:
/// gamma = (1 - (p^2-mu)/E tanh(beta E/2))/2, alpha = Delta/(2E) tanh(beta E/2),
/// with the T=0 limit tanh -> 1; where Delta = 0 and p^2 = mu, gamma = 1/2.
pub fn reconstruct_state(
    delta: &[f64],
    grid: &RadialGrid,
    params: &ThermoParams,
) -> (Vec<f64>, Vec<f64>) {
    let n = grid.len();
    let mut gamma = vec![0.0; n];
    let mut alpha = vec![0.0; n];
    for (i, (&p, &d)) in grid.nodes().iter().zip(delta).enumerate() {
        let x = p * p - params.mu;
        let e = dispersion(p * p, d, params.mu);
        if e == 0.0 {
            gamma[i] = 0.5;
            alpha[i] = 0.0;
            continue;
        }
        let tanh = match params.beta {
            Beta::Infinite => 1.0,
            Beta::Finite(b) => (0.5 * b * e).tanh(),
        };
        gamma[i] = 0.5 * (1.0 - (x / e) * tanh);
        alpha[i] = 0.5 * (d / e) * tanh;
    }
    (gamma, alpha)
}

/// The free energy F(gamma, alpha) = int (p^2-mu) gamma dp + int V |alpha|^2 dx
/// - S/beta as an honest three-dimensional integral over radial functions;
/// the entropy term is dropped at T=0.
///
/// Errors when (gamma, alpha) violate the admissibility constraints by more
/// than 1e-10.
pub fn free_energy(
    grid: &Arc<RadialGrid>,
    spec: &PotentialSpec,
    gamma: &[f64],
    alpha: &[f64],
    params: &ThermoParams,
) -> Result<f64> {
    let kernel = GapKernel::build(grid, spec)?;
    free_energy_with_kernel(&kernel, gamma, alpha, params)
}

/// `free_energy` with a prebuilt l=0 kernel.
pub fn free_energy_with_kernel(
    kernel: &GapKernel,
    gamma: &[f64],
    alpha: &[f64],
    params: &ThermoParams,
) -> Result<f64> {
    let grid = kernel.grid();
    let four_pi = 4.0 * std::f64::consts::PI;
    let mut kinetic = 0.0;
    for ((&p, &w), &g) in grid.nodes().iter().zip(grid.weights()).zip(gamma) {
        if !(-1e-10..=1.0 + 1e-10).contains(&g) {
            return Err(Error::Domain(format!("gamma out of [0,1]: {g}")));
        }
        kinetic += w * p * p * (p * p - params.mu) * g;
    }
    let conv = kernel.convolve(alpha);
    let mut interaction = 0.0;
    for ((&p, &w), (&a, &c)) in grid
        .nodes()
        .iter()
        .zip(grid.weights())
        .zip(alpha.iter().zip(&conv))
    {
        interaction += w * p * p * a * c;
    }
    let mut f = four_pi * (kinetic + interaction);
    if let Beta::Finite(beta) = params.beta {
        let mut entropy = 0.0;
        for ((&p, &w), (&g, &a)) in grid
            .nodes()
            .iter()
            .zip(grid.weights())
            .zip(gamma.iter().zip(alpha))
        {
            let gap2 = g * (1.0 - g) - a * a;
            if gap2 < -1e-10 {
                return Err(Error::Domain(format!(
                    "admissibility violated: |alpha|^2 - gamma(1-gamma) = {:e}",
                    -gap2
                )));
            }
            // s solves s(1-s) = gamma(1-gamma) - |alpha|^2; the entropy
            // summand is root-symmetric, take the larger root.
            let disc = (0.25 - gap2).max(0.0);
            let s = 0.5 + disc.sqrt();
            entropy -= w * p * p * (xlnx(s) + xlnx(1.0 - s));
        }
        f -= four_pi * entropy / beta;
    }
    Ok(f)
}

fn xlnx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// F(gamma_0, 0): kinetic plus entropy of the Fermi-Dirac normal state (no
/// interaction since alpha = 0).
pub fn free_energy_normal(grid: &RadialGrid, params: &ThermoParams) -> f64 {
    let four_pi = 4.0 * std::f64::consts::PI;
    let mut acc = 0.0;
    for (&p, &w) in grid.nodes().iter().zip(grid.weights()) {
        let g = gamma0(p * p, params);
        acc += w * p * p * (p * p - params.mu) * g;
        if let Beta::Finite(beta) = params.beta {
            acc += w * p * p * (xlnx(g) + xlnx(1.0 - g)) / beta;
        }
    }
    four_pi * acc
}

/// Stationarity defects of a state, normalised by |mu|.
#[derive(Debug, Clone, Copy)]
pub struct StationarityResiduals {
    /// sup-defect of (Vhat*alpha)(p) - (p^2-mu) alpha/(2 gamma - 1) = 0.
    pub r_alpha: f64,
    /// sup-defect of (p^2-mu)/(2 gamma - 1) + E coth(beta E/2) = 0.
    pub r_gamma: f64,
}

/// Evaluate the first-order stationarity relations on the grid, skipping
/// nodes with |2 gamma - 1| <= 1e-6 where the division degenerates.
pub fn stationarity_residuals(state: &GapState, kernel: &GapKernel) -> StationarityResiduals {
    let params = &state.params;
    let mu_scale = if params.mu != 0.0 { params.mu.abs() } else { 1.0 };
    let conv = kernel.convolve(&state.alpha);
    let mut r_alpha = 0.0_f64;
    let mut r_gamma = 0.0_f64;
    for (i, &p) in state.grid.nodes().iter().enumerate() {
        let x = p * p - params.mu;
        let two_g = 2.0 * state.gamma[i] - 1.0;
        if two_g.abs() <= 1e-6 {
            continue;
        }
        r_alpha = r_alpha.max((conv[i] - x * state.alpha[i] / two_g).abs());
        r_gamma = r_gamma.max((x / two_g + e_coth_half_beta(state.energy[i], params.beta)).abs());
    }
    StationarityResiduals {
        r_alpha: r_alpha / mu_scale,
        r_gamma: r_gamma / mu_scale,
    }
}

/// Continuity diagnostic: the jump of gamma across the Fermi surface, i.e.
/// between the last node below sqrt(mu) and the first node above. Shrinks in
/// proportion to the graded node spacing for continuous minimisers.
pub fn gamma_jump_at_fermi(state: &GapState) -> Option<f64> {
    let mu = state.params.mu;
    if mu <= 0.0 {
        return None;
    }
    let pf = mu.sqrt();
    let nodes = state.grid.nodes();
    let k = nodes.partition_point(|&p| p < pf);
    if k == 0 || k >= nodes.len() {
        return None;
    }
    Some((state.gamma[k] - state.gamma[k - 1]).abs())
}

/// Energy gap Xi = inf_p E(p). For nontrivial states the discrete minimum is
/// refined by the parabola through the three surrounding nodes; trivial
/// states have the exact values 0 (mu >= 0) or |mu| (mu < 0).
pub fn energy_gap(state: &GapState) -> f64 {
    energy_gap_from(
        &state.energy,
        &state.grid,
        state.params.mu,
        state.converged_to_trivial,
    )
}

fn energy_gap_from(energy: &[f64], grid: &RadialGrid, mu: f64, trivial: bool) -> f64 {
    if trivial {
        return (-mu).max(0.0);
    }
    let n = energy.len();
    let mut k = 0;
    for (i, &e) in energy.iter().enumerate() {
        if e < energy[k] {
            k = i;
        }
    }
    if k == 0 || k == n - 1 {
        return energy[k];
    }
    let p = grid.nodes();
    let (x0, x1, x2) = (p[k - 1], p[k], p[k + 1]);
    let (y0, y1, y2) = (energy[k - 1], energy[k], energy[k + 1]);
    // vertex of the interpolating parabola, clamped to the bracket
    let d1 = (y1 - y0) / (x1 - x0);
    let d2 = (y2 - y1) / (x2 - x1);
    let curv = (d2 - d1) / (x2 - x0);
    if curv <= 0.0 {
        return y1;
    }
    let xv = 0.5 * (x0 + x1 - d1 / curv);
    let xv = xv.clamp(x0, x2);
    let yv = y0 + d1 * (xv - x0) + curv * (xv - x0) * (xv - x1);
    yv.min(y1).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::build_grid;

    fn small_grid(mu: f64) -> Arc<RadialGrid> {
        Arc::new(build_grid(8, 8.0, mu, 4).unwrap())
    }

    #[test]
    fn v_zero_converges_to_trivial() {
        let grid = small_grid(1.0);
        let spec = PotentialSpec::gaussian(0.0, 1.0).unwrap();
        let params = ThermoParams::new(Beta::Finite(2.0), 1.0).unwrap();
        let state = solve_gap(&grid, &spec, params, &SolverOptions::default()).unwrap();
        assert!(state.converged_to_trivial);
        assert_eq!(state.delta_peak(), 0.0);
        assert_eq!(state.xi, 0.0);
        assert!((state.f_value - state.f_normal).abs() < 1e-12 * state.f_normal.abs());
    }

    #[test]
    fn trivial_state_reconstruction_is_fermi_dirac() {
        let grid = small_grid(1.0);
        let params = ThermoParams::new(Beta::Finite(3.0), 1.0).unwrap();
        let delta = vec![0.0; grid.len()];
        let (gamma, alpha) = reconstruct_state(&delta, &grid, &params);
        for ((&p, &g), &a) in grid.nodes().iter().zip(&gamma).zip(&alpha) {
            let g0 = gamma0(p * p, &params);
            assert!((g - g0).abs() < 1e-15, "gamma({p}) = {g} vs gamma0 = {g0}");
            assert_eq!(a, 0.0);
        }
    }

    #[test]
    fn zero_temperature_reconstruction_is_pure() {
        let grid = small_grid(1.0);
        let params = ThermoParams::zero_temperature(1.0).unwrap();
        let delta: Vec<f64> = grid.nodes().iter().map(|&p| 0.3 * (-p).exp() + 0.1).collect();
        let (gamma, alpha) = reconstruct_state(&delta, &grid, &params);
        for (&g, &a) in gamma.iter().zip(&alpha) {
            assert!((g * (1.0 - g) - a * a).abs() < 1e-12, "not a pure state");
        }
    }

    #[test]
    fn trivial_gap_values_by_sign_of_mu() {
        let grid = small_grid(1.0);
        let e: Vec<f64> = grid.nodes().iter().map(|&p| (p * p - 1.0).abs()).collect();
        assert_eq!(energy_gap_from(&e, &grid, 1.0, true), 0.0);
        let grid_neg = Arc::new(build_grid(8, 4.0, -0.5, 4).unwrap());
        let e: Vec<f64> = grid_neg.nodes().iter().map(|&p| p * p + 0.5).collect();
        assert_eq!(energy_gap_from(&e, &grid_neg, -0.5, true), 0.5);
    }

    #[test]
    fn normal_free_energy_matches_closed_form_quadrature() {
        // F(gamma_0, 0) = -(4 pi / beta) int p^2 ln(1 + e^{-beta(p^2-mu)}) dp
        let grid = small_grid(1.0);
        let beta = 2.0;
        let params = ThermoParams::new(Beta::Finite(beta), 1.0).unwrap();
        let got = free_energy_normal(&grid, &params);
        let want = -(4.0 * std::f64::consts::PI / beta)
            * crate::quad::integrate_adaptive(
                |p: f64| p * p * (-beta * (p * p - 1.0)).exp().ln_1p(),
                0.0,
                8.0,
                1e-12,
            )
            .unwrap();
        assert!(
            ((got - want) / want).abs() < 1e-7,
            "F_normal = {got:.12e}, quadrature oracle = {want:.12e}"
        );
    }

    #[test]
    fn normal_state_minimizes_without_potential() {
        use rand::Rng;
        use rand::SeedableRng;
        let grid = small_grid(1.0);
        let spec = PotentialSpec::gaussian(0.0, 1.0).unwrap();
        let params = ThermoParams::new(Beta::Finite(2.0), 1.0).unwrap();
        let f0 = free_energy_normal(&grid, &params);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..25 {
            let mut gamma = Vec::with_capacity(grid.len());
            let mut alpha = Vec::with_capacity(grid.len());
            for &p in grid.nodes() {
                let g0 = gamma0(p * p, &params);
                let g = (g0 + 0.2 * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0);
                let cap = (g * (1.0 - g)).sqrt();
                alpha.push(cap * (rng.random::<f64>() - 0.5));
                gamma.push(g);
            }
            let f = free_energy(&grid, &spec, &gamma, &alpha, &params).unwrap();
            assert!(
                f >= f0 - 1e-12 * f0.abs(),
                "normal state not minimal: {f} < {f0}"
            );
        }
    }

    #[test]
    fn free_energy_rejects_inadmissible_pairs() {
        let grid = small_grid(1.0);
        let spec = PotentialSpec::gaussian(1.0, 1.0).unwrap();
        let params = ThermoParams::new(Beta::Finite(2.0), 1.0).unwrap();
        let gamma = vec![0.5; grid.len()];
        let alpha = vec![0.6; grid.len()]; // |alpha|^2 > 1/4
        assert!(free_energy(&grid, &spec, &gamma, &alpha, &params).is_err());
    }

    #[test]
    fn solver_rejects_bad_options() {
        let opts = SolverOptions {
            damping: 0.0,
            ..Default::default()
        };
        assert!(opts.validate().is_err());
        let opts = SolverOptions {
            damping: 1.5,
            ..Default::default()
        };
        assert!(opts.validate().is_err());
    }
}
