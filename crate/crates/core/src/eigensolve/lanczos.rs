//! Shift-invert Lanczos with full reorthogonalization and locking.
//!
//! Each run starts from a fresh pseudo-random vector orthogonal to the locked
//! pairs, so exactly degenerate eigenvalues (one per congruent well) are
//! picked up one vector at a time. The solve stops once a run's dominant Ritz
//! pair has converged and lies no closer to the shift than the `count`-th
//! locked pair: that pair approximates the extreme eigenvalue of the
//! complement, so nothing closer can be missing.

#[allow(unused_imports)] // shadowed by std float methods when std is in the graph
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dense::tql2;
use super::ldlt::LdltFactor;
use super::{gershgorin_lower, EigenError, EigenResult, HermitianProblem, SolverMeta, SolverOptions};
use crate::lattice::SparseHermitian;
use crate::C64;

const PIVOT_TOL: f64 = 1e-14;
const RETRIES: usize = 3;

/// The `count` lowest eigenpairs.
///
/// The shift is lowered until the factorization has no negative pivot, so
/// that every eigenvalue lies above it and "nearest to the shift" means
/// "lowest".
pub fn lowest_eigenpairs_with<P: HermitianProblem + ?Sized>(
    op: &P,
    count: usize,
    opts: &SolverOptions,
) -> Result<EigenResult, EigenError> {
    let a = op.matrix();
    let n = a.dim();
    if count == 0 || count > n {
        return Err(EigenError::BadCount { count, dim: n });
    }
    let norm = a.norm_one();
    let floor = gershgorin_lower(a) - 1e-6 * norm.max(f64::MIN_POSITIVE);
    let mut sigma = opts.shift.unwrap_or_else(|| op.default_shift()).max(floor);
    let mut factorizations = 0;
    let mut breakdowns = 0;
    let factor = loop {
        factorizations += 1;
        match LdltFactor::new(a, sigma, PIVOT_TOL) {
            Ok(f) if f.negative_count() == 0 => break f,
            Ok(_) => {
                // Eigenvalues below the shift: move halfway to the floor, and
                // onto it after a few attempts.
                sigma = if factorizations > RETRIES { floor } else { 0.5 * (sigma + floor) };
            }
            Err(EigenError::Breakdown { .. }) if breakdowns < RETRIES => {
                breakdowns += 1;
                sigma -= 1e-3 * (sigma - floor).abs().max(1e-8 * norm);
            }
            Err(e) => return Err(e),
        }
    };
    run(a, &factor, count, opts, factorizations)
}

/// The `count` eigenpairs closest to `target`, sorted ascending.
pub fn nearest_eigenpairs<P: HermitianProblem + ?Sized>(
    op: &P,
    target: f64,
    count: usize,
    opts: &SolverOptions,
) -> Result<EigenResult, EigenError> {
    let a = op.matrix();
    let n = a.dim();
    if count == 0 || count > n {
        return Err(EigenError::BadCount { count, dim: n });
    }
    let norm = a.norm_one();
    let mut sigma = target;
    let mut attempt = 0;
    let factor = loop {
        match LdltFactor::new(a, sigma, PIVOT_TOL) {
            Ok(f) => break f,
            Err(EigenError::Breakdown { .. }) if attempt < RETRIES => {
                attempt += 1;
                sigma = target + 1e-9 * norm * attempt as f64;
            }
            Err(e) => return Err(e),
        }
    };
    run(a, &factor, count, opts, attempt + 1)
}

struct Locked {
    value: f64,
    vector: Vec<C64>,
    residual: f64,
}

fn run(
    a: &SparseHermitian,
    factor: &LdltFactor,
    count: usize,
    opts: &SolverOptions,
    factorizations: usize,
) -> Result<EigenResult, EigenError> {
    let n = a.dim();
    let sigma = factor.shift();
    let norm = a.norm_one();
    let accept = opts.tol * norm;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut locked: Vec<Locked> = Vec::new();
    let mut krylov = (2 * count + 20).clamp(30, 120).min(n);
    let mut iterations = 0;
    let mut runs = 0;
    let mut done = false;

    while runs < opts.max_runs {
        let avail = n - locked.len();
        if avail == 0 {
            done = true;
            break;
        }
        runs += 1;
        let steps = krylov.min(avail);

        let mut q = random_vector(&mut rng, n);
        for _ in 0..2 {
            project_out(&mut q, locked.iter().map(|l| l.vector.as_slice()));
        }
        if !normalize(&mut q) {
            continue;
        }
        let mut basis: Vec<Vec<C64>> = vec![q];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut scale: f64 = 0.0;
        let mut invariant = false;
        for j in 0..steps {
            iterations += 1;
            let mut w = basis[j].clone();
            factor.solve_in_place(&mut w);
            let aj = dot(&basis[j], &w).re;
            alpha.push(aj);
            scale = scale.max(aj.abs());
            for _ in 0..2 {
                project_out(&mut w, basis.iter().map(|v| v.as_slice()));
                project_out(&mut w, locked.iter().map(|l| l.vector.as_slice()));
            }
            let bj = norm2(&w);
            if j + 1 == steps {
                beta.push(bj);
                break;
            }
            if bj <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
                beta.push(0.0);
                invariant = true;
                break;
            }
            beta.push(bj);
            for x in w.iter_mut() {
                *x /= bj;
            }
            basis.push(w);
        }
        let k = alpha.len();
        let last_beta = if invariant { 0.0 } else { beta[k - 1] };

        let mut d = alpha.clone();
        let mut e: Vec<f64> = beta.iter().take(k).copied().collect();
        let mut z = vec![0.0; k * k];
        for i in 0..k {
            z[i * k + i] = 1.0;
        }
        tql2(&mut d, &mut e, Some(&mut z), k);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| d[j].abs().partial_cmp(&d[i].abs()).unwrap_or(core::cmp::Ordering::Equal));

        let mut top: Option<(bool, f64)> = None;
        let mut converged_any = false;
        let mut misses = 0;
        for &ri in &order {
            let theta = d[ri];
            if theta == 0.0 {
                continue;
            }
            let estimate = norm * (last_beta * z[(k - 1) * k + ri]).abs() / theta.abs();
            let candidate = if estimate <= 100.0 * accept {
                let mut y = vec![C64::new(0.0, 0.0); n];
                for (l, v) in basis.iter().enumerate().take(k) {
                    let s = z[l * k + ri];
                    for (yi, vi) in y.iter_mut().zip(v) {
                        *yi += vi * s;
                    }
                }
                project_out(&mut y, locked.iter().map(|l| l.vector.as_slice()));
                if normalize(&mut y) {
                    let (lam, res) = rayleigh_residual(a, &y);
                    Some((lam, y, res))
                } else {
                    None
                }
            } else {
                None
            };
            let ok = matches!(&candidate, Some((_, _, res)) if *res <= accept);
            if top.is_none() {
                let dist = candidate
                    .as_ref()
                    .map(|c| (c.0 - sigma).abs())
                    .unwrap_or((1.0 / theta).abs());
                top = Some((ok, dist));
            }
            if let (true, Some((value, vector, residual))) = (ok, candidate) {
                converged_any = true;
                misses = 0;
                locked.push(Locked {
                    value,
                    vector,
                    residual,
                });
            } else {
                misses += 1;
                if misses >= 3 {
                    break;
                }
            }
        }
        locked.sort_by(|x, y| {
            (x.value - sigma)
                .abs()
                .partial_cmp(&(y.value - sigma).abs())
                .unwrap_or(core::cmp::Ordering::Equal)
        });

        if let Some((true, dist)) = top {
            // Rank of the run's dominant pair among everything locked.
            let closer = locked
                .iter()
                .filter(|l| (l.value - sigma).abs() < dist * (1.0 - 1e-12))
                .count();
            if closer >= count {
                done = true;
                break;
            }
        }
        if !converged_any {
            krylov = (krylov * 2).min(n);
        }
    }

    if !done || locked.len() < count {
        return Err(EigenError::NotConverged {
            count,
            converged: locked.len().min(count),
            iterations,
        });
    }
    locked.truncate(count);
    locked.sort_by(|x, y| x.value.partial_cmp(&y.value).unwrap_or(core::cmp::Ordering::Equal));
    let mut eigenvalues = Vec::with_capacity(count);
    let mut eigenvectors = Vec::with_capacity(count);
    let mut residuals = Vec::with_capacity(count);
    for l in locked {
        eigenvalues.push(l.value);
        eigenvectors.push(l.vector);
        residuals.push(l.residual);
    }
    Ok(EigenResult {
        eigenvalues,
        eigenvectors,
        residuals,
        meta: SolverMeta {
            iterations,
            runs,
            factorizations,
            shift: sigma,
            tol: opts.tol,
            norm_one: norm,
            seed: opts.seed,
        },
    })
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    let mut u = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
    (0..n).map(|_| C64::new(u(), u())).collect()
}

#[inline]
fn dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

fn norm2(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(x: &mut [C64]) -> bool {
    let s = norm2(x);
    if s > 0.0 && s.is_finite() {
        for v in x.iter_mut() {
            *v /= s;
        }
        true
    } else {
        false
    }
}

/// Classical Gram–Schmidt against a set of orthonormal vectors.
fn project_out<'a, I: Iterator<Item = &'a [C64]>>(w: &mut [C64], against: I) {
    for v in against {
        let c = dot(v, w);
        for (wi, vi) in w.iter_mut().zip(v) {
            *wi -= vi * c;
        }
    }
}

/// Rayleigh quotient and residual norm `‖Ay − λy‖` of a unit vector.
pub(crate) fn rayleigh_residual(a: &SparseHermitian, y: &[C64]) -> (f64, f64) {
    let ay = a.apply(y);
    let lam = dot(y, &ay).re;
    let res = ay
        .iter()
        .zip(y)
        .map(|(p, q)| (p - q * lam).norm_sqr())
        .sum::<f64>()
        .sqrt();
    (lam, res)
}
