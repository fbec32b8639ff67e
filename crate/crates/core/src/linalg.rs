//! Small dense complex matrices for the zero-forcing front end.
//!
//! Cluster sizes are single digits, so a row-major `Vec` with Gauss-Jordan
//! inversion is both simpler and faster than pulling in a linear-algebra
//! dependency.

use crate::error::{Error, Result};
use crate::numerics::Real;
use num_complex::Complex;

/// Row-major n×n complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat<S> {
    n: usize,
    data: Vec<Complex<S>>,
}

impl<S: Real> CMat<S> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex::new(S::zero(), S::zero()); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex::new(S::one(), S::zero());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Complex<S>>>) -> Self {
        let n = rows.len();
        let data: Vec<_> = rows.into_iter().flatten().collect();
        assert_eq!(data.len(), n * n, "rows must form a square matrix");
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        let mut out = Self::zeros(self.n);
        for i in 0..self.n {
            for k in 0..self.n {
                let a = self[(i, k)];
                for j in 0..self.n {
                    out[(i, j)] = out[(i, j)] + a * rhs[(k, j)];
                }
            }
        }
        out
    }

    /// Inverse by Gauss-Jordan with partial pivoting on |pivot|².
    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&i, &j| {
                    a[(i, col)]
                        .norm_sqr()
                        .partial_cmp(&a[(j, col)].norm_sqr())
                        .expect("finite matrix entries")
                })
                .expect("non-empty column");
            if a[(pivot_row, col)].norm_sqr() <= S::zero() {
                return Err(Error::Degenerate("complex matrix inversion"));
            }
            a.swap_rows(col, pivot_row);
            inv.swap_rows(col, pivot_row);
            let pivot = a[(col, col)];
            for j in 0..n {
                a[(col, j)] = a[(col, j)] / pivot;
                inv[(col, j)] = inv[(col, j)] / pivot;
            }
            for row in 0..n {
                if row == col {
                    continue;
                }
                let factor = a[(row, col)];
                if factor.norm_sqr() == S::zero() {
                    continue;
                }
                for j in 0..n {
                    let ac = a[(col, j)];
                    let ic = inv[(col, j)];
                    a[(row, j)] = a[(row, j)] - factor * ac;
                    inv[(row, j)] = inv[(row, j)] - factor * ic;
                }
            }
        }
        Ok(inv)
    }

    pub fn frobenius_norm(&self) -> S {
        self.data
            .iter()
            .map(|c| c.norm_sqr())
            .fold(S::zero(), |acc, v| acc + v)
            .sqrt()
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for col in 0..self.n {
            self.data.swap(i * self.n + col, j * self.n + col);
        }
    }
}

impl<S> std::ops::Index<(usize, usize)> for CMat<S> {
    type Output = Complex<S>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<S> {
        &self.data[i * self.n + j]
    }
}

impl<S> std::ops::IndexMut<(usize, usize)> for CMat<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<S> {
        &mut self.data[i * self.n + j]
    }
}

/// Frobenius condition estimate ‖A‖_F · ‖A⁻¹‖_F (an upper bound on κ₂).
pub fn condition_estimate<S: Real>(a: &CMat<S>, a_inv: &CMat<S>) -> S {
    a.frobenius_norm() * a_inv.frobenius_norm()
}
