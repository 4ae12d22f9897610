//! Verdicts computed from spectra: clustering near the well spectrum, gap
//! census, spacing inside a window, eigenvalue counting and the lower bound
//! away from the wells.
//!
//! Every report can be rebuilt from raw eigenvalue lists through its
//! `from_values` constructor.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by std float methods when std is in the graph
use num_traits::Float;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agmon::WeightFunction;
use crate::eigensolve::ldlt::{LdltFactor, LduFactor};
use crate::eigensolve::{lowest_eigenpairs_with, EigenError, EigenResult, SolverOptions};
use crate::field::GaugeField;
use crate::lattice::{assemble, DomainMask, Grid, LatticeError, MagneticOperator};
use crate::C64;

/// Gap exponent used unless configured otherwise.
pub const DEFAULT_M: f64 = 4.0;

/// Gaps narrower than this many solver residuals are never asserted.
pub const GUARD_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectraError {
    #[error("no supercell eigenvalue in the window [{lo}, {hi}] at h = {h}")]
    WindowEmpty { h: f64, lo: f64, hi: f64 },
    #[error("reference spectrum is empty")]
    EmptyReference,
    #[error("invalid window [{lo}, {hi}]")]
    BadWindow { lo: f64, hi: f64 },
    #[error("inertia certifies {certified} eigenvalues in the window but {found} were computed")]
    CountMismatch { certified: usize, found: usize },
    #[error("need at least two eigenvalues in the window, found {found}")]
    TooFewEigenvalues { found: usize },
    #[error("domain mask has no active node")]
    EmptyMask,
    #[error("z = {re} + {im}i is too close to the spectrum")]
    NearSpectrum { re: f64, im: f64 },
    #[error("weight and operator live on different grids")]
    GridMismatch,
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

fn in_window(values: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|&x| x >= lo && x <= hi).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Supercell eigenvalues in `[0, h(b₀+ε₁)]` against the well spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterReport {
    pub h: f64,
    pub window: (f64, f64),
    pub supercell: Vec<f64>,
    pub wells: Vec<f64>,
    /// `min_j |λ − λ_j|` for each supercell eigenvalue in the window.
    pub distances: Vec<f64>,
    /// `δ(h)`, the largest distance.
    pub delta: f64,
    /// Largest solver residual of either list.
    pub resolution: f64,
    /// `δ(h)` is below [`GUARD_FACTOR`] residuals and only bounds the
    /// true distance from above.
    pub resolution_limited: bool,
}

impl ClusterReport {
    pub fn from_values(
        h: f64,
        b0: f64,
        eps1: f64,
        supercell: &[f64],
        wells: &[f64],
        resolution: f64,
    ) -> Result<Self, SpectraError> {
        let window = (0.0, h * (b0 + eps1));
        let inside = in_window(supercell, window.0, window.1);
        if inside.is_empty() {
            return Err(SpectraError::WindowEmpty {
                h,
                lo: window.0,
                hi: window.1,
            });
        }
        if wells.is_empty() {
            return Err(SpectraError::EmptyReference);
        }
        let mut wells = wells.to_vec();
        wells.sort_by(f64::total_cmp);
        let distances: Vec<f64> = inside
            .iter()
            .map(|l| wells.iter().map(|w| (l - w).abs()).fold(f64::INFINITY, f64::min))
            .collect();
        let delta = distances.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            h,
            window,
            supercell: inside,
            wells,
            distances,
            delta,
            resolution,
            resolution_limited: delta < GUARD_FACTOR * resolution,
        })
    }
}

/// `wells` should hold every well eigenvalue up to somewhat above the window
/// top, so each in-window supercell eigenvalue meets its partner.
pub fn cluster_check(
    supercell: &EigenResult,
    wells: &EigenResult,
    h: f64,
    b0: f64,
    eps1: f64,
) -> Result<ClusterReport, SpectraError> {
    ClusterReport::from_values(
        h,
        b0,
        eps1,
        &supercell.eigenvalues,
        &wells.eigenvalues,
        supercell.max_residual().max(wells.max_residual()),
    )
}

/// Gaps of a spectrum inside a window.
#[derive(Clone, Debug, PartialEq)]
pub struct GapCensus {
    pub h: f64,
    pub window: (f64, f64),
    /// Sorted eigenvalues inside the window.
    pub eigenvalues: Vec<f64>,
    /// Eigenvalue-free open intervals wider than the guard band, edge
    /// segments included.
    pub gaps: Vec<(f64, f64)>,
    pub m_exponent: f64,
    /// `h^M`.
    pub threshold: f64,
    /// Number of gaps strictly wider than `h^M`.
    pub count: usize,
    pub guard: f64,
    /// Largest consecutive spacing inside the window.
    pub max_spacing: Option<f64>,
}

impl GapCensus {
    pub fn from_values(
        values: &[f64],
        residual: f64,
        h: f64,
        window: (f64, f64),
        m: f64,
    ) -> Result<Self, SpectraError> {
        let (lo, hi) = window;
        if !(lo < hi) {
            return Err(SpectraError::BadWindow { lo, hi });
        }
        let eigenvalues = in_window(values, lo, hi);
        let guard = GUARD_FACTOR * residual;
        let mut edges = Vec::with_capacity(eigenvalues.len() + 2);
        edges.push(lo);
        edges.extend_from_slice(&eigenvalues);
        edges.push(hi);
        let gaps: Vec<(f64, f64)> = edges
            .windows(2)
            .map(|w| (w[0], w[1]))
            .filter(|(a, b)| b - a > guard && b > a)
            .collect();
        let threshold = h.powf(m);
        let count = gaps.iter().filter(|(a, b)| b - a > threshold).count();
        let max_spacing = eigenvalues
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.max(s))));
        Ok(Self {
            h,
            window,
            eigenvalues,
            gaps,
            m_exponent: m,
            threshold,
            count,
            guard,
            max_spacing,
        })
    }
}

/// Gap census of `eig` in `window`. `certified` is the inertia count of
/// eigenvalues in the window; a different number of computed eigenvalues
/// there is an error.
pub fn gap_census(
    eig: &EigenResult,
    certified: usize,
    h: f64,
    window: (f64, f64),
    m: f64,
) -> Result<GapCensus, SpectraError> {
    let census = GapCensus::from_values(&eig.eigenvalues, eig.max_residual(), h, window, m)?;
    if census.eigenvalues.len() != certified {
        return Err(SpectraError::CountMismatch {
            certified,
            found: census.eigenvalues.len(),
        });
    }
    Ok(census)
}

/// Spacing of the well spectrum inside `[hα, hβ]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpacingReport {
    pub h: f64,
    pub window: (f64, f64),
    pub eigenvalues: Vec<f64>,
    pub max_spacing: f64,
    /// `(λ_first − hα, hβ − λ_last)`.
    pub edge_gaps: (f64, f64),
}

impl SpacingReport {
    pub fn from_values(values: &[f64], h: f64, alpha: f64, beta: f64) -> Result<Self, SpectraError> {
        let window = (h * alpha, h * beta);
        if !(window.0 < window.1) {
            return Err(SpectraError::BadWindow {
                lo: window.0,
                hi: window.1,
            });
        }
        let eigenvalues = in_window(values, window.0, window.1);
        if eigenvalues.len() < 2 {
            return Err(SpectraError::TooFewEigenvalues {
                found: eigenvalues.len(),
            });
        }
        let max_spacing = eigenvalues.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        let edge_gaps = (
            eigenvalues[0] - window.0,
            window.1 - eigenvalues[eigenvalues.len() - 1],
        );
        Ok(Self {
            h,
            window,
            eigenvalues,
            max_spacing,
            edge_gaps,
        })
    }
}

pub fn spacing_bound_check(wells: &EigenResult, h: f64, alpha: f64, beta: f64) -> Result<SpacingReport, SpectraError> {
    SpacingReport::from_values(&wells.eigenvalues, h, alpha, beta)
}

/// `N(h) hⁿ` along a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct WeylReport {
    pub n: i32,
    /// `(h, N(h) hⁿ)` in input order.
    pub products: Vec<(f64, f64)>,
    pub sup: f64,
    /// Larger over smaller product at the two finest `h`.
    pub finest_ratio: Option<f64>,
}

pub fn weyl_count_check(counts: &[(f64, usize)], n: i32) -> WeylReport {
    let products: Vec<(f64, f64)> = counts.iter().map(|&(h, c)| (h, c as f64 * h.powi(n))).collect();
    let sup = products.iter().map(|p| p.1).fold(0.0, f64::max);
    let mut by_h = products.clone();
    by_h.sort_by(|a, b| a.0.total_cmp(&b.0));
    let finest_ratio = match by_h.as_slice() {
        [a, b, ..] => {
            let (lo, hi) = (a.1.min(b.1), a.1.max(b.1));
            Some(if lo > 0.0 { hi / lo } else if hi > 0.0 { f64::INFINITY } else { 1.0 })
        }
        _ => None,
    };
    WeylReport {
        n,
        products,
        sup,
        finest_ratio,
    }
}

/// Bottom of the spectrum on `{Tr⁺B ≥ b₀+ε₁+η}`.
#[derive(Clone, Debug, PartialEq)]
pub struct AwayReport {
    pub h: f64,
    pub lambda_min: f64,
    pub residual: f64,
    /// Smallest intensity over the away region.
    pub b0_m0: f64,
    /// `(h b₀(M₀) − λ_min) / h^{5/4}`.
    pub normalized_deficit: f64,
    /// `h(b₀+ε₁)`.
    pub window_top: f64,
    /// `λ_min` falls inside the clustering window.
    pub pollutes: bool,
    pub nodes: usize,
}

#[allow(clippy::too_many_arguments)]
pub fn away_region_check(
    gauge: &GaugeField,
    grid: &Grid,
    h: f64,
    b0: f64,
    eps1: f64,
    eta: f64,
    opts: &SolverOptions,
) -> Result<AwayReport, SpectraError> {
    let mask = DomainMask::away(grid, gauge.model(), b0, eps1, eta);
    if mask.active_count() == 0 {
        return Err(SpectraError::EmptyMask);
    }
    let op = assemble(gauge, grid, &mask, h)?;
    away_region_from_operator(&op, b0, eps1, opts)
}

/// Same as [`away_region_check`] for an already assembled away operator.
pub fn away_region_from_operator(
    op: &MagneticOperator,
    b0: f64,
    eps1: f64,
    opts: &SolverOptions,
) -> Result<AwayReport, SpectraError> {
    if op.dim() == 0 {
        return Err(SpectraError::EmptyMask);
    }
    let eig = lowest_eigenpairs_with(op, 1, opts)?;
    let h = op.h();
    let lambda_min = eig.eigenvalues[0];
    let b0_m0 = op.b_min();
    let window_top = h * (b0 + eps1);
    Ok(AwayReport {
        h,
        lambda_min,
        residual: eig.max_residual(),
        b0_m0,
        normalized_deficit: (h * b0_m0 - lambda_min) / h.powf(1.25),
        window_top,
        pollutes: lambda_min <= window_top,
        nodes: op.dim(),
    })
}

/// Power iteration settings for [`conjugated_resolvent_norm`].
#[derive(Clone, Debug, PartialEq)]
pub struct ResolventOptions {
    /// Stop when successive estimates agree to this relative accuracy.
    pub tol: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for ResolventOptions {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_iterations: 2000,
            seed: 0x5EED,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResolventReport {
    pub z: C64,
    /// `‖e^{Φ/√h}(H−z)^{-1}e^{−Φ/√h}‖`.
    pub norm: f64,
    pub h_times_norm: f64,
    /// `α` with `Re z = h(b_min − α)`, `b_min` the smallest intensity on
    /// the domain.
    pub alpha: f64,
    pub iterations: usize,
    pub converged: bool,
}

enum Resolvent {
    Real(LdltFactor),
    Complex(LduFactor),
}

impl Resolvent {
    fn solve(&self, x: &mut [C64]) {
        match self {
            Resolvent::Real(f) => f.solve_in_place(x),
            Resolvent::Complex(f) => f.solve_in_place(x),
        }
    }

    fn solve_adjoint(&self, x: &mut [C64]) {
        match self {
            Resolvent::Real(f) => f.solve_in_place(x),
            Resolvent::Complex(f) => f.solve_adjoint_in_place(x),
        }
    }
}

/// Norm of the conjugated resolvent, by power iteration on `KᴴK` with
/// `K = W (H−z)^{-1} W^{-1}` and `W = e^{Φ/√h}`.
pub fn conjugated_resolvent_norm(
    op: &MagneticOperator,
    phi: &WeightFunction,
    z: C64,
    opts: &ResolventOptions,
) -> Result<ResolventReport, SpectraError> {
    if op.grid() != phi.grid() {
        return Err(SpectraError::GridMismatch);
    }
    let n = op.dim();
    if n == 0 {
        return Err(SpectraError::EmptyMask);
    }
    let guard = 1e-12;
    let near = |_| SpectraError::NearSpectrum { re: z.re, im: z.im };
    let res = if z.im == 0.0 {
        Resolvent::Real(LdltFactor::new(op.matrix(), z.re, guard).map_err(near)?)
    } else {
        Resolvent::Complex(LduFactor::new(op.matrix(), z, guard).map_err(near)?)
    };
    let sh = op.h().sqrt();
    // K is unchanged by a global rescaling of W.
    let top = op.nodes().iter().map(|&k| phi.values[k]).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = op.nodes().iter().map(|&k| ((phi.values[k] - top) / sh).exp()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut unit = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
    let mut x: Vec<C64> = (0..n).map(|_| C64::new(unit(), unit())).collect();
    normalize(&mut x);
    let mut y = vec![C64::new(0.0, 0.0); n];
    let mut est = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..opts.max_iterations {
        iterations = it + 1;
        // y = K x
        for ((yi, xi), wi) in y.iter_mut().zip(&x).zip(&w) {
            *yi = xi / *wi;
        }
        res.solve(&mut y);
        for (yi, wi) in y.iter_mut().zip(&w) {
            *yi *= *wi;
        }
        let new = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        // x = Kᴴ y
        for ((xi, yi), wi) in x.iter_mut().zip(&y).zip(&w) {
            *xi = yi * *wi;
        }
        res.solve_adjoint(&mut x);
        for (xi, wi) in x.iter_mut().zip(&w) {
            *xi /= *wi;
        }
        normalize(&mut x);
        if it > 0 && (new - est).abs() <= opts.tol * new {
            est = new;
            converged = true;
            break;
        }
        est = new;
    }
    let h = op.h();
    Ok(ResolventReport {
        z,
        norm: est,
        h_times_norm: h * est,
        alpha: op.b_min() - z.re / h,
        iterations,
        converged,
    })
}

fn normalize(x: &mut [C64]) {
    let n = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        for v in x {
            *v /= n;
        }
    }
}

/// Least-squares line `y ≈ slope·x + intercept`; `None` with fewer than two
/// distinct abscissae.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs[..n].iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs[..n].iter().zip(&ys[..n]).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Slope of `log y` against `log h`.
pub fn loglog_slope(hs: &[f64], ys: &[f64]) -> Option<f64> {
    let lx: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    least_squares(&lx, &ly).map(|p| p.0)
}

/// Fit of `log δ ≈ −c/√h + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    pub c: f64,
    pub intercept: f64,
    /// `δ` strictly decreases as `h` decreases.
    pub monotone: bool,
}

pub fn exponential_fit(hs: &[f64], deltas: &[f64]) -> Option<DecayFit> {
    let mut pts: Vec<(f64, f64)> = hs.iter().copied().zip(deltas.iter().copied()).collect();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    let xs: Vec<f64> = pts.iter().map(|p| 1.0 / p.0.sqrt()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept) = least_squares(&xs, &ys)?;
    Some(DecayFit {
        c: -slope,
        intercept,
        monotone: pts.windows(2).all(|w| w[1].1 < w[0].1),
    })
}
