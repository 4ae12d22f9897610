//! Dense Hermitian eigensolver: Householder tridiagonalization followed by
//! the implicit QL iteration.

#[allow(unused_imports)] // shadowed by std float methods when std is in the graph
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use crate::C64;

/// Eigenvalues (ascending) and unit eigenvectors of a Hermitian matrix given
/// row-major; only the lower triangle is read.
pub fn hermitian_eigh(a: &[C64], n: usize) -> (Vec<f64>, Vec<Vec<C64>>) {
    let (d, v) = solve(a, n, true);
    (d, v.expect("vectors requested"))
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigvalsh(a: &[C64], n: usize) -> Vec<f64> {
    solve(a, n, false).0
}

fn solve(a: &[C64], n: usize, vectors: bool) -> (Vec<f64>, Option<Vec<Vec<C64>>>) {
    assert_eq!(a.len(), n * n, "matrix must be n x n");
    if n == 0 {
        return (Vec::new(), vectors.then(Vec::new));
    }
    let zero = C64::new(0.0, 0.0);
    let mut m: Vec<C64> = a.to_vec();
    // Mirror the lower triangle so the working copy is exactly Hermitian.
    for i in 0..n {
        m[i * n + i] = C64::new(m[i * n + i].re, 0.0);
        for j in 0..i {
            m[j * n + i] = m[i * n + j].conj();
        }
    }

    let mut reflectors: Vec<(usize, Vec<C64>, f64)> = Vec::new();
    let mut p = vec![zero; n];
    for k in 0..n.saturating_sub(2) {
        let x: Vec<C64> = (k + 1..n).map(|i| m[i * n + k]).collect();
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { C64::new(1.0, 0.0) };
        let alpha = -phase * norm;
        let mut v = x;
        v[0] -= alpha;
        let vnorm2 = v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if vnorm2 == 0.0 {
            continue;
        }
        let tau = 2.0 / vnorm2;
        let off = k + 1;
        let len = n - off;
        // p = τ A v on the trailing block.
        for i in 0..len {
            let row = &m[(off + i) * n + off..(off + i) * n + n];
            let mut s = zero;
            for j in 0..len {
                s += row[j] * v[j];
            }
            p[i] = s * tau;
        }
        let vp: C64 = (0..len).map(|i| v[i].conj() * p[i]).sum();
        let kappa = 0.5 * tau * vp.re;
        for i in 0..len {
            p[i] -= v[i] * kappa;
        }
        // A ← A − v wᴴ − w vᴴ.
        for i in 0..len {
            let (vi, wi) = (v[i], p[i]);
            let row = &mut m[(off + i) * n + off..(off + i) * n + n];
            for j in 0..len {
                row[j] -= vi * p[j].conj() + wi * v[j].conj();
            }
        }
        m[off * n + k] = alpha;
        m[k * n + off] = alpha.conj();
        for i in off + 1..n {
            m[i * n + k] = zero;
            m[k * n + i] = zero;
        }
        if vectors {
            reflectors.push((off, v, tau));
        }
    }

    // Phase-rotate the tridiagonal to a real symmetric one.
    let mut diag: Vec<f64> = (0..n).map(|i| m[i * n + i].re).collect();
    let mut sub = vec![0.0; n];
    let mut phases = vec![C64::new(1.0, 0.0); n];
    for k in 0..n - 1 {
        let e = m[(k + 1) * n + k];
        let r = e.norm();
        sub[k] = r;
        phases[k + 1] = if r > 0.0 { phases[k] * (e / r) } else { phases[k] };
    }

    let mut z = if vectors {
        let mut z = vec![0.0; n * n];
        for i in 0..n {
            z[i * n + i] = 1.0;
        }
        Some(z)
    } else {
        None
    };
    tql2(&mut diag, &mut sub, z.as_deref_mut(), n);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap_or(core::cmp::Ordering::Equal));
    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let vecs = z.map(|z| {
        order
            .iter()
            .map(|&col| {
                // x = Q D z
                let mut x: Vec<C64> = (0..n).map(|i| phases[i] * z[i * n + col]).collect();
                for (off, v, tau) in reflectors.iter().rev() {
                    let s: C64 = v.iter().zip(&x[*off..]).map(|(vi, xi)| vi.conj() * xi).sum();
                    let s = s * *tau;
                    for (xi, vi) in x[*off..].iter_mut().zip(v) {
                        *xi -= vi * s;
                    }
                }
                x
            })
            .collect()
    });
    (values, vecs)
}

/// Implicit QL on a real symmetric tridiagonal matrix with diagonal `d` and
/// subdiagonal `e[i] = T[i+1][i]`. Rotations accumulate into the row-major
/// `z` when given.
pub(crate) fn tql2(d: &mut [f64], e: &mut [f64], mut z: Option<&mut [f64]>, n: usize) {
    if n == 0 {
        return;
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            for _ in 0..200 {
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = z.as_deref_mut() {
                        for k in 0..n {
                            let zk = &mut z[k * n..k * n + n];
                            let t = zk[i + 1];
                            zk[i + 1] = s * zk[i] + c * t;
                            zk[i] = c * zk[i] - s * t;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
}
