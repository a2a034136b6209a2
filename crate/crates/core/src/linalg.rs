//! Small dense LU and a symmetric envelope (skyline) Cholesky factorization.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major dense matrix factored in place by LU with partial pivoting.
#[derive(Debug, Clone)]
pub struct DenseLu<T> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
}

impl<T: Real> DenseLu<T> {
    pub fn factor(n: usize, mut a: Vec<T>) -> Result<Self> {
        assert_eq!(a.len(), n * n, "matrix storage does not match its size");
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let tiny = scale * T::epsilon() * T::from_usize(n.max(1));
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| {
                    a[i * n + col]
                        .abs()
                        .partial_cmp(&a[j * n + col].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap_or(col);
            if !(a[pivot * n + col].abs() > tiny) {
                return Err(Error::LinearSolve(format!("singular matrix at column {col}")));
            }
            if pivot != col {
                for k in 0..n {
                    a.swap(col * n + k, pivot * n + k);
                }
                perm.swap(col, pivot);
            }
            let d = a[col * n + col];
            for row in col + 1..n {
                let factor = a[row * n + col] / d;
                a[row * n + col] = factor;
                if factor != T::zero() {
                    for k in col + 1..n {
                        let upd = factor * a[col * n + k];
                        a[row * n + k] -= upd;
                    }
                }
            }
        }
        Ok(Self { n, lu: a, perm })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.lu[i * n + k] * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.lu[i * n + k] * x[k];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }
}

/// Lower triangle of a symmetric matrix stored row by row from the first
/// structurally nonzero column to the diagonal.
#[derive(Debug, Clone)]
pub struct Envelope<T> {
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Envelope<T> {
    /// `first[i]` is the smallest column index coupled to row `i` (at most `i`).
    pub fn zeros(first: Vec<usize>) -> Self {
        let mut start = Vec::with_capacity(first.len() + 1);
        let mut acc = 0;
        for (i, &f) in first.iter().enumerate() {
            assert!(f <= i, "envelope must include the diagonal");
            start.push(acc);
            acc += i - f + 1;
        }
        start.push(acc);
        Self {
            first,
            start,
            data: vec![T::zero(); acc],
        }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    pub fn stored(&self) -> usize {
        self.data.len()
    }

    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && j >= self.first[i]);
        self.start[i] + (j - self.first[i])
    }

    /// Adds `v` to entry `(i, j)`; the symmetric partner is implied.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let (r, c) = if j <= i { (i, j) } else { (j, i) };
        let k = self.index(r, c);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (r, c) = if j <= i { (i, j) } else { (j, i) };
        if c < self.first[r] {
            T::zero()
        } else {
            self.data[self.index(r, c)]
        }
    }

    /// `y = A x`.
    pub fn mul(&self, x: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut y = vec![T::zero(); n];
        for i in 0..n {
            let f = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let mut s = T::zero();
            for (off, &a) in row.iter().enumerate() {
                let j = f + off;
                s += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
            y[i] += s;
        }
        y
    }

    /// In-place Cholesky `A = L Lᵀ`; fill stays inside the envelope.
    pub fn cholesky(mut self) -> Result<EnvelopeCholesky<T>> {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            for j in fi..i {
                let fj = self.first[j];
                let sj = self.start[j];
                let lo = fi.max(fj);
                let mut s = self.data[si + (j - fi)];
                let (head, tail) = self.data.split_at(si);
                let row_i = &tail[lo - fi..j - fi];
                let row_j = &head[sj + (lo - fj)..sj + (j - fj)];
                for (a, b) in row_i.iter().zip(row_j) {
                    s -= *a * *b;
                }
                let djj = self.data[sj + (j - fj)];
                self.data[si + (j - fi)] = s / djj;
            }
            let row = &self.data[si..si + (i - fi)];
            let mut d = self.data[si + (i - fi)];
            for &v in row {
                d -= v * v;
            }
            if !(d > T::zero()) {
                return Err(Error::LinearSolve(format!(
                    "matrix is not positive definite (pivot {d} at row {i})"
                )));
            }
            self.data[si + (i - fi)] = d.sqrt();
        }
        Ok(EnvelopeCholesky { factor: self })
    }
}

#[derive(Debug, Clone)]
pub struct EnvelopeCholesky<T> {
    factor: Envelope<T>,
}

impl<T: Real> EnvelopeCholesky<T> {
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let l = &self.factor;
        let n = l.dim();
        let mut y = b.to_vec();
        for i in 0..n {
            let f = l.first[i];
            let row = &l.data[l.start[i]..l.start[i + 1]];
            let mut s = y[i];
            for (off, &a) in row[..row.len() - 1].iter().enumerate() {
                s -= a * y[f + off];
            }
            y[i] = s / row[row.len() - 1];
        }
        for i in (0..n).rev() {
            let f = l.first[i];
            let row = &l.data[l.start[i]..l.start[i + 1]];
            let xi = y[i] / row[row.len() - 1];
            y[i] = xi;
            for (off, &a) in row[..row.len() - 1].iter().enumerate() {
                y[f + off] -= a * xi;
            }
        }
        y
    }
}
