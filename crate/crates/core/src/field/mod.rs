//! Periodic magnetic fields on the plane.
//!
//! A field is a `Z²`-periodic two-form `B = b(x) dx₁∧dx₂`. In two dimensions
//! the intensity `Tr⁺B(x)` is `|b(x)|`; [`tr_plus`] computes it for a general
//! antisymmetric matrix so that the same definition is available in any
//! dimension.

mod gauge;
mod model;
mod wells;

pub use gauge::{GaugeField, GaugeKind, QuadraticGauge};
pub use model::{FieldModel, TabulatedField};
pub use wells::{
    check_assumptions, detect_wells, find_b0, AssumptionReport, Violation, Well, WellSet,
};

#[allow(unused_imports)] // shadowed by std float methods when std is in the graph
use num_traits::Float;
use alloc::string::String;
use alloc::vec::Vec;

use crate::eigensolve::dense::hermitian_eigh;
use crate::{Point, C64};

/// Tolerance for the antisymmetry check in [`tr_plus`].
pub const ANTISYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error("matrix is not antisymmetric: entry ({row}, {col}) = {value} but ({col}, {row}) = {mirror}")]
    NotAntisymmetric {
        row: usize,
        col: usize,
        value: f64,
        mirror: f64,
    },
    #[error("matrix data has {len} entries, expected {n}x{n}")]
    BadShape { len: usize, n: usize },
    #[error("thresholds must satisfy 0 < eps1 < eps0 (got eps0 = {eps0}, eps1 = {eps1})")]
    InvalidThresholds { eps0: f64, eps1: f64 },
    #[error("resolution {got} is below the minimum {min}")]
    ResolutionTooLow { got: usize, min: usize },
    #[error("no node satisfies Tr+B < b0 + {eps1}; the threshold is too small for the resolution")]
    EmptyWellSet { eps1: f64 },
    #[error("standing assumption violated: {0}")]
    Assumption(Violation),
    #[error("invalid field model: {0}")]
    InvalidModel(String),
    #[error("field is not periodic at ({x}, {y}): deviation {deviation:e}")]
    NotPeriodic { x: f64, y: f64, deviation: f64 },
}

/// Intensity `Tr⁺B = ½ Tr([BᵀB]^{1/2})` of an antisymmetric `n×n` matrix
/// given in row-major order.
///
/// The nonzero singular values of an antisymmetric matrix come in equal
/// pairs `|λ_j|`, so half their sum is the sum of the positive `λ_j`.
pub fn tr_plus(matrix: &[f64], n: usize) -> Result<f64, FieldError> {
    if matrix.len() != n * n {
        return Err(FieldError::BadShape {
            len: matrix.len(),
            n,
        });
    }
    for i in 0..n {
        for j in i..n {
            let a = matrix[i * n + j];
            let b = matrix[j * n + i];
            if (a + b).abs() > ANTISYMMETRY_TOL {
                return Err(FieldError::NotAntisymmetric {
                    row: i,
                    col: j,
                    value: a,
                    mirror: b,
                });
            }
        }
    }
    if n == 0 {
        return Ok(0.0);
    }
    // BᵀB is symmetric positive semidefinite.
    let mut gram = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let s: f64 = (0..n).map(|k| matrix[k * n + i] * matrix[k * n + j]).sum();
            gram.push(C64::new(s, 0.0));
        }
    }
    let (values, _) = hermitian_eigh(&gram, n);
    Ok(0.5 * values.iter().map(|v| v.max(0.0).sqrt()).sum::<f64>())
}

/// Evaluates the scalar field `b(x)` of a model.
pub fn eval_field(model: &FieldModel, point: Point) -> f64 {
    model.b(point)
}

/// Verifies `b(x + γ) = b(x)` for the lattice translations `γ ∈ {e₁, e₂, e₁+e₂}`
/// on the given sample points.
pub fn check_periodicity(model: &FieldModel, samples: &[Point], tol: f64) -> Result<(), FieldError> {
    for &[x, y] in samples {
        let base = model.b([x, y]);
        for (dx, dy) in [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (-2.0, 3.0)] {
            let deviation = (model.b([x + dx, y + dy]) - base).abs();
            if deviation > tol {
                return Err(FieldError::NotPeriodic { x, y, deviation });
            }
        }
    }
    Ok(())
}
