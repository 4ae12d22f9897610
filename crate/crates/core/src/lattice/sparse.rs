use alloc::vec;
use alloc::vec::Vec;

use crate::C64;

/// Hermitian matrix in compressed sparse row form, both triangles stored.
///
/// Columns are sorted within each row and every off-diagonal entry `(i, j)`
/// is stored together with its exact conjugate at `(j, i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseHermitian {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseHermitian {
    /// Builds from per-row entry lists. Rows are sorted by column.
    ///
    /// # Panics
    /// If the rows do not describe an exactly Hermitian matrix.
    pub fn from_rows(rows: Vec<Vec<(usize, C64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                assert!(c < n, "column {c} out of range");
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        let m = Self {
            n,
            row_ptr,
            cols,
            vals,
        };
        assert!(m.is_exactly_hermitian(), "assembled matrix is not conjugate symmetric");
        m
    }

    /// Diagonal matrix.
    pub fn from_diagonal(d: &[f64]) -> Self {
        Self::from_rows(d.iter().enumerate().map(|(i, &v)| vec![(i, C64::new(v, 0.0))]).collect())
    }

    /// Dense row-major Hermitian input; entries of modulus `≤ drop` are skipped.
    pub fn from_dense(a: &[C64], n: usize, drop: f64) -> Self {
        assert_eq!(a.len(), n * n);
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| i == j || a[i * n + j].norm() > drop)
                    .map(|j| (j, a[i * n + j]))
                    .collect()
            })
            .collect();
        Self::from_rows(rows)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Entries `(col, value)` of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    /// Lowest column index in row `i`.
    pub fn first_col(&self, i: usize) -> usize {
        self.cols[self.row_ptr[i]]
    }

    /// `(row, col, value)` for every stored entry, row-major.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn is_exactly_hermitian(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v.conj()))
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[i] = acc;
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.n];
        self.matvec(x, &mut y);
        y
    }

    /// `x† A x` (real for Hermitian `A`).
    pub fn quadratic_form(&self, x: &[C64]) -> f64 {
        let y = self.apply(x);
        x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        // Equal to the row sum norm for Hermitian matrices.
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<C64> {
        let mut a = vec![C64::new(0.0, 0.0); self.n * self.n];
        for (i, j, v) in self.triplets() {
            a[i * self.n + j] = v;
        }
        a
    }

    /// Principal submatrix on the given ascending row list.
    pub fn principal_submatrix(&self, keep: &[usize]) -> Self {
        let mut pos = vec![usize::MAX; self.n];
        for (new, &old) in keep.iter().enumerate() {
            pos[old] = new;
        }
        let rows = keep
            .iter()
            .map(|&i| {
                self.row(i)
                    .filter(|(j, _)| pos[*j] != usize::MAX)
                    .map(|(j, v)| (pos[j], v))
                    .collect()
            })
            .collect();
        Self::from_rows(rows)
    }

    /// `D A D*` with `D = diag(phase)`, `|phase_i| = 1`.
    pub fn conjugate_by(&self, phase: &[C64]) -> Self {
        assert_eq!(phase.len(), self.n);
        let mut out = self.clone();
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                out.vals[k] = if i == j {
                    self.vals[k]
                } else {
                    phase[i] * self.vals[k] * phase[j].conj()
                };
            }
        }
        // Products are not bitwise symmetric in general; restore exactness.
        for i in 0..self.n {
            for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                let j = out.cols[k];
                if j < i {
                    let mirror = out.get(j, i);
                    out.vals[k] = mirror.conj();
                }
            }
        }
        out
    }

    /// `A - s I`.
    pub fn shifted(&self, s: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                if out.cols[k] == i {
                    out.vals[k] -= s;
                }
            }
        }
        out
    }
}

impl AsRef<SparseHermitian> for SparseHermitian {
    fn as_ref(&self) -> &SparseHermitian {
        self
    }
}
