//! The linear side of the theory: lowest eigenvalue of K_{beta,mu} + V per
//! sector, the pairing-instability verdict, and Birman-Schwinger norms.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::discretize::{BsOperator, SectorOperator};
use crate::error::{Error, Result};
use crate::symbols::ThermoParams;

/// All eigenvalues of a dense symmetric matrix, sorted ascending.
pub fn symmetric_eigenvalues_sorted(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen(format!("no convergence on a {0}x{0} matrix", m.nrows())))?;
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(vals)
}

/// Lowest eigenvalue and its eigenvector.
pub fn lowest_eigenpair(m: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen(format!("no convergence on a {0}x{0} matrix", m.nrows())))?;
    let mut idx = 0;
    let mut best = f64::INFINITY;
    for (i, &v) in eig.eigenvalues.iter().enumerate() {
        if v < best {
            best = v;
            idx = i;
        }
    }
    Ok((best, eig.eigenvectors.column(idx).into_owned()))
}

/// Smallest eigenvalue of an assembled sector operator.
pub fn lowest_eigenvalue(op: &SectorOperator) -> Result<f64> {
    Ok(*symmetric_eigenvalues_sorted(op.matrix())?
        .first()
        .expect("nonempty spectrum"))
}

/// Per-sector lowest eigenvalue.
#[derive(Debug, Clone, Copy)]
pub struct SectorEigenvalue {
    pub ell: usize,
    pub lambda_min: f64,
}

/// Outcome of the instability scan over sectors l = 0..=ell_max.
#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub per_ell: Vec<SectorEigenvalue>,
    /// True when some sector has lambda_min < -tol_eig.
    pub unstable: bool,
    /// True when the extreme eigenvalue lies inside the +-tol_eig band, i.e.
    /// the verdict is not resolved at this grid resolution.
    pub indeterminate: bool,
    pub minimizing_ell: usize,
    pub tol_eig: f64,
}

impl CriterionReport {
    pub fn min_lambda(&self) -> f64 {
        self.per_ell
            .iter()
            .map(|s| s.lambda_min)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Eigenvalue band treated as numerically unresolved around zero.
pub fn tol_eig(params: &ThermoParams) -> f64 {
    1e-9 * (params.mu.abs() + params.beta.recip_or_zero())
}

/// Scan sectors 0..=ell_max from prebuilt kernel matrices and report the
/// pairing-instability verdict.
pub fn verdict_from_kernels(
    kernels: &[crate::discretize::KernelMatrix],
    params: ThermoParams,
) -> Result<CriterionReport> {
    let mut per_ell = Vec::with_capacity(kernels.len());
    for km in kernels {
        let op = km.assemble(params);
        per_ell.push(SectorEigenvalue {
            ell: km.ell,
            lambda_min: lowest_eigenvalue(&op)?,
        });
    }
    let tol = tol_eig(&params);
    let (mut min_ell, mut min_val) = (0usize, f64::INFINITY);
    for s in &per_ell {
        if s.lambda_min < min_val {
            min_val = s.lambda_min;
            min_ell = s.ell;
        }
    }
    Ok(CriterionReport {
        per_ell,
        unstable: min_val < -tol,
        indeterminate: min_val.abs() <= tol,
        minimizing_ell: min_ell,
        tol_eig: tol,
    })
}

/// Assemble sectors 0..=ell_max for the given potential and report the
/// instability verdict at `params`.
pub fn instability_verdict(
    grid: &std::sync::Arc<crate::discretize::RadialGrid>,
    spec: &crate::potential::PotentialSpec,
    params: ThermoParams,
    ell_max: usize,
) -> Result<CriterionReport> {
    let k_max = crate::discretize::kernel_k_max(grid);
    let mut kernels = Vec::with_capacity(ell_max + 1);
    for ell in 0..=ell_max {
        let kernel = spec.sector_kernel(ell, k_max)?;
        kernels.push(crate::discretize::KernelMatrix::build(grid, &kernel));
    }
    verdict_from_kernels(&kernels, params)
}

/// Operator norm of the Birman-Schwinger sandwich. B is symmetric positive
/// semidefinite up to quadrature error, so the norm is the top eigenvalue.
pub fn bs_norm(op: &BsOperator) -> Result<f64> {
    let vals = symmetric_eigenvalues_sorted(op.matrix())?;
    Ok(*vals.last().expect("nonempty spectrum"))
}
