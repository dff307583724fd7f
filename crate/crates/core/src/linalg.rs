//! Dense Gaussian elimination for the small systems the solver builds.

use crate::scalar::Scalar;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.n + col] = value;
    }

    /// Solves `A x = b` with partial pivoting. Returns `None` when a pivot
    /// underflows relative to the largest entry of `A`.
    pub fn solve(&self, rhs: &[T]) -> Option<Vec<T>> {
        let n = self.n;
        assert_eq!(rhs.len(), n, "right-hand side length");
        let mut a = self.data.clone();
        let mut b = rhs.to_vec();
        let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if scale.is_zero() || !scale.is_finite() {
            return None;
        }
        let floor = scale * T::epsilon() * T::lit(n as f64);
        for col in 0..n {
            let (pivot_row, pivot) = (col..n)
                .map(|r| (r, a[r * n + col].abs()))
                .fold((col, T::neg_infinity()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= floor {
                return None;
            }
            if pivot_row != col {
                for k in 0..n {
                    a.swap(col * n + k, pivot_row * n + k);
                }
                b.swap(col, pivot_row);
            }
            let diag = a[col * n + col];
            for r in (col + 1)..n {
                let factor = a[r * n + col] / diag;
                if factor.is_zero() {
                    continue;
                }
                for k in col..n {
                    let v = a[col * n + k];
                    a[r * n + k] = a[r * n + k] - factor * v;
                }
                b[r] = b[r] - factor * b[col];
            }
        }
        let mut x = vec![T::zero(); n];
        for r in (0..n).rev() {
            let mut acc = b[r];
            for k in (r + 1)..n {
                acc = acc - a[r * n + k] * x[k];
            }
            x[r] = acc / a[r * n + r];
        }
        Some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_pivoting_system() {
        let mut m = DenseMatrix::<f64>::zeros(3);
        let rows = [[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]];
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                m.set(i, j, *v);
            }
        }
        let x = m.solve(&[5.0, 3.0, 6.0]).unwrap();
        for (i, row) in rows.iter().enumerate() {
            let lhs: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
            assert!((lhs - [5.0, 3.0, 6.0][i]).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_is_none() {
        let mut m = DenseMatrix::<f64>::zeros(2);
        m.set(0, 0, 1.0);
        m.set(0, 1, 2.0);
        m.set(1, 0, 2.0);
        m.set(1, 1, 4.0);
        assert!(m.solve(&[1.0, 2.0]).is_none());
    }
}
