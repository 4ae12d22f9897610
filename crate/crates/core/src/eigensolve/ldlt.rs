//! Envelope (skyline) factorizations without pivoting.
//!
//! Row `i` of the lower factor is stored densely from its first structural
//! nonzero column to the diagonal. For the five-point grid stencil in natural
//! order the envelope is one grid row wide and fill stays inside it.

use alloc::vec;
use alloc::vec::Vec;

use super::EigenError;
use crate::lattice::SparseHermitian;
use crate::C64;

/// Row envelope shared by both factorizations.
#[derive(Clone, Debug)]
struct Envelope {
    first: Vec<usize>,
    start: Vec<usize>,
}

impl Envelope {
    fn of(a: &SparseHermitian) -> Self {
        let n = a.dim();
        let mut first = Vec::with_capacity(n);
        let mut start = Vec::with_capacity(n + 1);
        let mut total = 0;
        for i in 0..n {
            let f = a.first_col(i).min(i);
            first.push(f);
            start.push(total);
            total += i - f;
        }
        start.push(total);
        Self { first, start }
    }

    #[inline]
    fn range(&self, i: usize) -> core::ops::Range<usize> {
        self.start[i]..self.start[i + 1]
    }

    fn len(&self) -> usize {
        *self.start.last().unwrap_or(&0)
    }
}

/// `A − σI = L D Lᴴ` for Hermitian `A` and real `σ`, `L` unit lower
/// triangular, `D` real diagonal.
#[derive(Clone, Debug)]
pub struct LdltFactor {
    env: Envelope,
    lower: Vec<C64>,
    d: Vec<f64>,
    shift: f64,
}

impl LdltFactor {
    /// Factorizes `A − σI`. Fails when a pivot is at most
    /// `pivot_tol · ‖A‖₁` in modulus.
    pub fn new(a: &SparseHermitian, shift: f64, pivot_tol: f64) -> Result<Self, EigenError> {
        let n = a.dim();
        let env = Envelope::of(a);
        let mut lower = vec![C64::new(0.0, 0.0); env.len()];
        let mut d = vec![0.0; n];
        let guard = pivot_tol * a.norm_one().max(f64::MIN_POSITIVE);
        let mut c = Vec::new();
        for i in 0..n {
            let fi = env.first[i];
            // Scatter row i of A into the work row.
            c.clear();
            c.resize(i - fi, C64::new(0.0, 0.0));
            let mut diag = -shift;
            for (j, v) in a.row(i) {
                if j < i {
                    c[j - fi] = v;
                } else if j == i {
                    diag += v.re;
                }
            }
            // c_ij = a_ij − Σ_k c_ik conj(l_jk) for fi ≤ j < i.
            for j in fi..i {
                let fj = env.first[j];
                let k0 = fi.max(fj);
                let lj = &lower[env.range(j)];
                let mut s = C64::new(0.0, 0.0);
                for (ck, ljk) in c[k0 - fi..j - fi].iter().zip(&lj[k0 - fj..j - fj]) {
                    s += ck * ljk.conj();
                }
                c[j - fi] -= s;
            }
            let row = env.range(i);
            let li = &mut lower[row];
            for j in fi..i {
                let cij = c[j - fi];
                li[j - fi] = cij / d[j];
                diag -= (cij * li[j - fi].conj()).re;
            }
            if !(diag.abs() > guard) {
                return Err(EigenError::Breakdown { shift, pivot: i });
            }
            d[i] = diag;
        }
        Ok(Self { env, lower, d, shift })
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Number of negative pivots, which by Sylvester's law of inertia is the
    /// number of eigenvalues of `A` below `σ`.
    pub fn negative_count(&self) -> usize {
        self.d.iter().filter(|&&x| x < 0.0).count()
    }

    pub fn min_abs_pivot(&self) -> f64 {
        self.d.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min)
    }

    /// Solves `(A − σI) x = b` in place.
    pub fn solve_in_place(&self, x: &mut [C64]) {
        let n = self.dim();
        assert_eq!(x.len(), n);
        for i in 0..n {
            let fi = self.env.first[i];
            let li = &self.lower[self.env.range(i)];
            let mut s = C64::new(0.0, 0.0);
            for (l, y) in li.iter().zip(&x[fi..i]) {
                s += l * y;
            }
            x[i] -= s;
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for j in (0..n).rev() {
            let fj = self.env.first[j];
            let lj = &self.lower[self.env.range(j)];
            let xj = x[j];
            for (xk, l) in x[fj..j].iter_mut().zip(lj) {
                *xk -= l.conj() * xj;
            }
        }
    }
}

/// `A − zI = L D U` for Hermitian `A` and complex `z`.
#[derive(Clone, Debug)]
pub struct LduFactor {
    env: Envelope,
    lower: Vec<C64>,
    /// Column `i` of `U` above the diagonal, stored in row `i`'s envelope.
    upper: Vec<C64>,
    d: Vec<C64>,
}

impl LduFactor {
    pub fn new(a: &SparseHermitian, z: C64, pivot_tol: f64) -> Result<Self, EigenError> {
        let n = a.dim();
        let env = Envelope::of(a);
        let mut lower = vec![C64::new(0.0, 0.0); env.len()];
        let mut upper = vec![C64::new(0.0, 0.0); env.len()];
        let mut d = vec![C64::new(0.0, 0.0); n];
        let guard = pivot_tol * a.norm_one().max(f64::MIN_POSITIVE);
        let mut c = Vec::new();
        let mut r = Vec::new();
        for i in 0..n {
            let fi = env.first[i];
            c.clear();
            c.resize(i - fi, C64::new(0.0, 0.0));
            r.clear();
            r.resize(i - fi, C64::new(0.0, 0.0));
            let mut diag = -z;
            for (j, v) in a.row(i) {
                if j < i {
                    c[j - fi] = v;
                    r[j - fi] = v.conj();
                } else if j == i {
                    diag += v;
                }
            }
            for j in fi..i {
                let fj = env.first[j];
                let k0 = fi.max(fj);
                let lj = &lower[env.range(j)];
                let uj = &upper[env.range(j)];
                let mut sc = C64::new(0.0, 0.0);
                let mut sr = C64::new(0.0, 0.0);
                for (ck, ukj) in c[k0 - fi..j - fi].iter().zip(&uj[k0 - fj..j - fj]) {
                    sc += ck * ukj;
                }
                for (rk, ljk) in r[k0 - fi..j - fi].iter().zip(&lj[k0 - fj..j - fj]) {
                    sr += ljk * rk;
                }
                c[j - fi] -= sc;
                r[j - fi] -= sr;
            }
            let row = env.range(i);
            for j in fi..i {
                let (cij, rji) = (c[j - fi], r[j - fi]);
                let l = cij / d[j];
                let u = rji / d[j];
                lower[row.start + j - fi] = l;
                upper[row.start + j - fi] = u;
                diag -= cij * u;
            }
            if !(diag.norm() > guard) {
                return Err(EigenError::Breakdown {
                    shift: z.re,
                    pivot: i,
                });
            }
            d[i] = diag;
        }
        Ok(Self { env, lower, upper, d })
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Solves `(A − zI) x = b` in place.
    pub fn solve_in_place(&self, x: &mut [C64]) {
        let n = self.dim();
        assert_eq!(x.len(), n);
        for i in 0..n {
            let fi = self.env.first[i];
            let li = &self.lower[self.env.range(i)];
            let s: C64 = li.iter().zip(&x[fi..i]).map(|(l, y)| l * y).sum();
            x[i] -= s;
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for j in (0..n).rev() {
            let fj = self.env.first[j];
            let uj = &self.upper[self.env.range(j)];
            let xj = x[j];
            for (xk, u) in x[fj..j].iter_mut().zip(uj) {
                *xk -= u * xj;
            }
        }
    }

    /// Solves `(A − zI)ᴴ x = b` in place.
    pub fn solve_adjoint_in_place(&self, x: &mut [C64]) {
        let n = self.dim();
        assert_eq!(x.len(), n);
        for i in 0..n {
            let fi = self.env.first[i];
            let ui = &self.upper[self.env.range(i)];
            let s: C64 = ui.iter().zip(&x[fi..i]).map(|(u, y)| u.conj() * y).sum();
            x[i] -= s;
        }
        for i in 0..n {
            x[i] /= self.d[i].conj();
        }
        for j in (0..n).rev() {
            let fj = self.env.first[j];
            let lj = &self.lower[self.env.range(j)];
            let xj = x[j];
            for (xk, l) in x[fj..j].iter_mut().zip(lj) {
                *xk -= l.conj() * xj;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> SparseHermitian {
        let i = C64::new(0.0, 1.0);
        let rows = (0..n)
            .map(|k| {
                let mut r = vec![(k, C64::new(2.0 + k as f64 * 0.1, 0.0))];
                if k > 0 {
                    r.push((k - 1, -i * 0.7));
                }
                if k + 1 < n {
                    r.push((k + 1, i * 0.7));
                }
                r
            })
            .collect();
        SparseHermitian::from_rows(rows)
    }

    #[test]
    fn ldlt_solves_and_counts() {
        let a = tridiag(30);
        let f = LdltFactor::new(&a, 0.0, 1e-14).unwrap();
        assert_eq!(f.negative_count(), 0);
        let b: Vec<C64> = (0..30).map(|k| C64::new(k as f64, 1.0 - k as f64 * 0.3)).collect();
        let mut x = b.clone();
        f.solve_in_place(&mut x);
        let ax = a.apply(&x);
        for (p, q) in ax.iter().zip(&b) {
            assert!((p - q).norm() < 1e-12);
        }
        let (vals, _) = crate::eigensolve::dense::hermitian_eigh(&a.to_dense(), 30);
        let s = 0.5 * (vals[6] + vals[7]);
        assert_eq!(LdltFactor::new(&a, s, 1e-14).unwrap().negative_count(), 7);
    }

    #[test]
    fn ldu_solves_both_systems() {
        let a = tridiag(25);
        let z = C64::new(1.3, 0.4);
        let f = LduFactor::new(&a, z, 1e-14).unwrap();
        let b: Vec<C64> = (0..25).map(|k| C64::new((k as f64).sin(), 0.5)).collect();
        let mut x = b.clone();
        f.solve_in_place(&mut x);
        let ax = a.apply(&x);
        for k in 0..25 {
            assert!((ax[k] - z * x[k] - b[k]).norm() < 1e-12);
        }
        let mut y = b.clone();
        f.solve_adjoint_in_place(&mut y);
        let ay = a.apply(&y);
        for k in 0..25 {
            assert!((ay[k] - z.conj() * y[k] - b[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_pivot_is_breakdown() {
        let a = SparseHermitian::from_diagonal(&[1.0, 2.0, 3.0]);
        assert!(matches!(LdltFactor::new(&a, 2.0, 1e-12), Err(EigenError::Breakdown { pivot: 1, .. })));
    }
}
