//! Lowest eigenpairs of sparse Hermitian matrices with certified residuals,
//! exact eigenvalue counts by inertia, and a dense oracle.

pub mod dense;
mod lanczos;
pub mod ldlt;

pub use lanczos::{lowest_eigenpairs_with, nearest_eigenpairs};

use alloc::vec::Vec;

use crate::lattice::{MagneticOperator, SparseHermitian};
use crate::C64;
use ldlt::LdltFactor;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EigenError {
    #[error("factorization broke down at shift {shift} (pivot {pivot}); the shift is too close to an eigenvalue")]
    Breakdown { shift: f64, pivot: usize },
    #[error("threshold {threshold} coincides with an eigenvalue to within 1e-12; perturb the threshold")]
    ThresholdOnEigenvalue { threshold: f64 },
    #[error("requested {count} eigenpairs of a {dim}-dimensional matrix")]
    BadCount { count: usize, dim: usize },
    #[error("Lanczos did not converge: {converged} of {count} pairs after {iterations} iterations")]
    NotConverged {
        count: usize,
        converged: usize,
        iterations: usize,
    },
    #[error("eigenvalue threshold must be nonnegative (got {0})")]
    NegativeThreshold(f64),
}

/// Solver settings.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    /// Relative residual tolerance: `‖Hv − λv‖ ≤ tol · ‖H‖₁`.
    pub tol: f64,
    /// Seed of the ChaCha stream for start vectors.
    pub seed: u64,
    /// Shift for shift-invert; `None` uses the problem's default.
    pub shift: Option<f64>,
    /// Cap on Lanczos runs (each from a fresh start vector).
    pub max_runs: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            seed: 0x5EED,
            shift: None,
            max_runs: 60,
        }
    }
}

/// Bookkeeping of a solve.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverMeta {
    /// Total Lanczos steps over all runs.
    pub iterations: usize,
    pub runs: usize,
    pub factorizations: usize,
    /// Shift actually used.
    pub shift: f64,
    pub tol: f64,
    /// `‖H‖₁`; residuals are certified against `tol · norm_one`.
    pub norm_one: f64,
    pub seed: u64,
}

/// Eigenpairs sorted ascending with residual norms `‖Hv − λv‖`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<C64>>,
    pub residuals: Vec<f64>,
    pub meta: SolverMeta,
}

impl EigenResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// A Hermitian matrix together with a sensible default shift below the part
/// of the spectrum of interest.
pub trait HermitianProblem {
    fn matrix(&self) -> &SparseHermitian;
    fn default_shift(&self) -> f64;
}

impl HermitianProblem for SparseHermitian {
    fn matrix(&self) -> &SparseHermitian {
        self
    }

    /// Gershgorin lower bound, below the whole spectrum.
    fn default_shift(&self) -> f64 {
        gershgorin_lower(self)
    }
}

impl HermitianProblem for MagneticOperator {
    fn matrix(&self) -> &SparseHermitian {
        MagneticOperator::matrix(self)
    }

    /// `½ h b₀` with `b₀` the smallest intensity over the domain.
    fn default_shift(&self) -> f64 {
        0.5 * self.h() * self.b_min()
    }
}

pub(crate) fn gershgorin_lower(a: &SparseHermitian) -> f64 {
    (0..a.dim())
        .map(|i| {
            let mut diag = 0.0;
            let mut off = 0.0;
            for (j, v) in a.row(i) {
                if j == i {
                    diag = v.re;
                } else {
                    off += v.norm();
                }
            }
            diag - off
        })
        .fold(f64::INFINITY, f64::min)
}

/// The `count` lowest eigenpairs with residuals at most `tol · ‖H‖₁`.
pub fn lowest_eigenpairs<P: HermitianProblem + ?Sized>(
    op: &P,
    count: usize,
    tol: f64,
) -> Result<EigenResult, EigenError> {
    let opts = SolverOptions {
        tol,
        ..SolverOptions::default()
    };
    lowest_eigenpairs_with(op, count, &opts)
}

/// Exact number of eigenvalues below `threshold`, from the inertia of
/// `H − threshold·I`.
pub fn eigen_count_below<P: HermitianProblem + ?Sized>(op: &P, threshold: f64) -> Result<usize, EigenError> {
    if !(threshold >= 0.0) {
        return Err(EigenError::NegativeThreshold(threshold));
    }
    count_below_unchecked(op.matrix(), threshold)
}

pub(crate) fn count_below_unchecked(a: &SparseHermitian, threshold: f64) -> Result<usize, EigenError> {
    let guard = 1e-12;
    match LdltFactor::new(a, threshold, guard) {
        Ok(f) => Ok(f.negative_count()),
        Err(EigenError::Breakdown { .. }) => Err(EigenError::ThresholdOnEigenvalue { threshold }),
        Err(e) => Err(e),
    }
}

/// All eigenvalues of a small matrix by dense diagonalization.
pub fn dense_eigenvalues(a: &SparseHermitian) -> Vec<f64> {
    dense::hermitian_eigvalsh(&a.to_dense(), a.dim())
}

/// Relative differences beyond which two sorted spectra disagree.
pub fn max_relative_difference(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_on_diagonal_matrix() {
        let a = SparseHermitian::from_diagonal(&[1.0, 2.0, 3.0]);
        assert_eq!(eigen_count_below(&a, 2.5).unwrap(), 2);
        assert_eq!(eigen_count_below(&a, 0.0).unwrap(), 0);
        assert!(matches!(
            eigen_count_below(&a, 2.0),
            Err(EigenError::ThresholdOnEigenvalue { .. })
        ));
        assert!(eigen_count_below(&a, -1.0).is_err());
    }
}
