//! Dense LU factorization with partial pivoting.

use crate::scalar::Real;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("matrix is singular: pivot {pivot:e} at column {column}")]
pub struct Singular {
    pub column: usize,
    pub pivot: f64,
}

/// Solves `A x = b` in place, consuming `a`. Pivots smaller than `tol` in
/// magnitude are reported as [`Singular`].
pub fn lu_solve<T: Real>(mut a: Matrix<T>, b: &[T], tol: T) -> Result<Vec<T>, Singular> {
    let n = a.n;
    assert_eq!(b.len(), n, "rhs length must match matrix dimension");
    let mut x = b.to_vec();
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, a.get(i, k).abs()))
            .fold((k, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(pmax >= tol) {
            return Err(Singular { column: k, pivot: pmax.to_f64_lossy() });
        }
        if p != k {
            for j in 0..n {
                a.data.swap(k * n + j, p * n + j);
            }
            x.swap(k, p);
        }
        let pivot = a.get(k, k);
        for i in (k + 1)..n {
            let f = a.get(i, k) / pivot;
            if f == T::zero() {
                continue;
            }
            a.set(i, k, f);
            let (upper, lower) = a.data.split_at_mut(i * n);
            let row_k = &upper[k * n..k * n + n];
            let row_i = &mut lower[..n];
            for j in (k + 1)..n {
                row_i[j] = row_i[j] - f * row_k[j];
            }
            x[i] = x[i] - f * x[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for j in (k + 1)..n {
            s = s - a.get(k, j) * x[j];
        }
        x[k] = s / a.get(k, k);
    }
    Ok(x)
}
