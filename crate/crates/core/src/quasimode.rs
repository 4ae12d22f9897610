//! Localized approximate eigenfunctions at a point `y` of a well.
//!
//! `u(x) = χ(|x−y|/r) e^{iψ(x)/h} e^{−b(y)|x−y|²/(4h)}` with the radius
//! `r = r₀ h^{1/3}` and the gauge corrector
//! `ψ(x) = A(y)·X + ½ Xᵀ Sym(DA(y)) X`, `X = x − y`. After the phase, the
//! potential seen by the Gaussian is the symmetric gauge of the constant
//! field `b(y)` up to `O(|X|²)`, for which the Gaussian is the ground state
//! with energy `h b(y)`.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by std float methods when std is in the graph
use num_traits::Float;

use crate::eigensolve::EigenResult;
use crate::field::GaugeField;
use crate::lattice::{DomainMask, Grid, MagneticOperator};
use crate::{Point, C64};

/// Default cutoff constant in `r = r₀ h^{1/3}`.
pub const DEFAULT_R0: f64 = 0.35;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuasimodeError {
    #[error("field at the center must be positive (b(y) = {0})")]
    NonPositiveField(f64),
    #[error("cutoff ball of radius {radius} leaves the domain (clearance {clearance})")]
    SupportLeavesMask { radius: f64, clearance: f64 },
    #[error("quasimode and operator live on different grids")]
    GridMismatch,
    #[error("quasimode support meets node {node}, which is outside the operator domain")]
    SupportOutsideDomain { node: usize },
    #[error("semiclassical parameter and cutoff constant must be positive (h = {h}, r0 = {r0})")]
    InvalidParameters { h: f64, r0: f64 },
    #[error("no eigenvalues to compare against")]
    NoEigenvalues,
}

/// `C²` bump: 1 on `[0, ½]`, 0 on `[1, ∞)`, quintic smoothstep between.
pub fn bump(s: f64) -> f64 {
    if s <= 0.5 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        let t = 2.0 * s - 1.0;
        1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Quasimode {
    pub center: Point,
    pub h: f64,
    /// `μ = b(y)`.
    pub mu: f64,
    pub radius: f64,
    /// Grid-indexed, unit norm in the discrete `ℓ²` sense.
    pub u: Vec<C64>,
    grid: Grid,
}

impl Quasimode {
    /// Target energy `h μ`.
    pub fn target(&self) -> f64 {
        self.h * self.mu
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Nodes where `u ≠ 0`.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.u.iter().enumerate().filter(|(_, z)| z.norm_sqr() > 0.0).map(|(k, _)| k)
    }

    /// Multiplies by a unit complex number.
    pub fn with_phase(&self, phase: C64) -> Self {
        let mut q = self.clone();
        for z in &mut q.u {
            *z *= phase;
        }
        q
    }

    /// Restriction to the rows of `op`, checking the support.
    pub fn rows(&self, op: &MagneticOperator) -> Result<Vec<C64>, QuasimodeError> {
        if op.grid() != &self.grid {
            return Err(QuasimodeError::GridMismatch);
        }
        if let Some(node) = self.support().find(|&k| !op.mask().is_active(k)) {
            return Err(QuasimodeError::SupportOutsideDomain { node });
        }
        Ok(op.gather(&self.u))
    }
}

/// Builds the quasimode centred at `y`.
pub fn build_quasimode(
    gauge: &GaugeField,
    grid: &Grid,
    mask: &DomainMask,
    y: Point,
    h: f64,
    r0: f64,
) -> Result<Quasimode, QuasimodeError> {
    if !(h > 0.0 && r0 > 0.0) {
        return Err(QuasimodeError::InvalidParameters { h, r0 });
    }
    let mu = gauge.model().b(y);
    if !(mu > 0.0) {
        return Err(QuasimodeError::NonPositiveField(mu));
    }
    let radius = r0 * h.cbrt();
    let clearance = mask.clearance(y);
    if radius >= clearance {
        return Err(QuasimodeError::SupportLeavesMask { radius, clearance });
    }
    let a0 = gauge.potential(y);
    let jac = gauge.jacobian(y, grid.spacing());
    let sym = [
        [jac[0][0], 0.5 * (jac[0][1] + jac[1][0])],
        [0.5 * (jac[0][1] + jac[1][0]), jac[1][1]],
    ];
    let mut u: Vec<C64> = (0..grid.len())
        .map(|k| {
            let p = grid.point(k);
            let x = [p[0] - y[0], p[1] - y[1]];
            let r2 = x[0] * x[0] + x[1] * x[1];
            let cut = bump(r2.sqrt() / radius);
            if cut == 0.0 || !mask.is_active(k) {
                return C64::new(0.0, 0.0);
            }
            let psi = a0[0] * x[0]
                + a0[1] * x[1]
                + 0.5 * (sym[0][0] * x[0] * x[0] + 2.0 * sym[0][1] * x[0] * x[1] + sym[1][1] * x[1] * x[1]);
            C64::from_polar(cut * (-mu * r2 / (4.0 * h)).exp(), psi / h)
        })
        .collect();
    let norm = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut u {
        *z /= norm;
    }
    Ok(Quasimode {
        center: y,
        h,
        mu,
        radius,
        u,
        grid: *grid,
    })
}

/// `‖(H − hμ)u‖ / ‖u‖`.
pub fn residual_ratio(q: &Quasimode, op: &MagneticOperator) -> Result<f64, QuasimodeError> {
    let u = q.rows(op)?;
    let hu = op.apply(&u);
    let target = q.target();
    let num = hu
        .iter()
        .zip(&u)
        .map(|(a, b)| (a - b * target).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Ok(num / den)
}

/// Outcome of [`spectral_hit_check`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralHit {
    pub residual_ratio: f64,
    /// `min_j |λ_j − hμ|`.
    pub distance: f64,
    pub pass: bool,
}

/// Compares the distance from `hμ` to the computed eigenvalues with the
/// residual ratio, which bounds it for a Hermitian operator.
///
/// `eig` must come from `op` and contain the eigenvalue nearest to `hμ`.
pub fn spectral_hit_check(
    q: &Quasimode,
    op: &MagneticOperator,
    eig: &EigenResult,
) -> Result<SpectralHit, QuasimodeError> {
    let rho = residual_ratio(q, op)?;
    let target = q.target();
    let distance = eig
        .eigenvalues
        .iter()
        .map(|l| (l - target).abs())
        .fold(f64::INFINITY, f64::min);
    if !distance.is_finite() {
        return Err(QuasimodeError::NoEigenvalues);
    }
    Ok(SpectralHit {
        residual_ratio: rho,
        distance,
        pass: distance <= rho,
    })
}
