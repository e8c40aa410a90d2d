//! Tiny dense matrices for the model dimensions this crate actually meets.
//!
//! State and observation dimensions are at most 2 and parameter vectors at
//! most 3, so everything lives in a fixed 4x4 backing array on the stack.
//! The only nontrivial routine is a partial-pivot LU solve.

use crate::error::{Error, Result};

/// Hard cap on every matrix dimension in the crate.
pub const MAX_DIM: usize = 4;

/// Row-major dense matrix with static storage for up to 4x4 entries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SMat {
    rows: usize,
    cols: usize,
    a: [f64; MAX_DIM * MAX_DIM],
}

impl SMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows <= MAX_DIM && cols <= MAX_DIM, "matrix too large");
        SMat {
            rows,
            cols,
            a: [0.0; MAX_DIM * MAX_DIM],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds from a row-major slice of length `rows * cols`.
    pub fn from_rows(rows: usize, cols: usize, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), rows * cols);
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, entries[i * cols + j]);
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.a[i * MAX_DIM + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.a[i * MAX_DIM + j] = v;
    }

    pub fn transpose(&self) -> SMat {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// `out = self * x`.
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for i in 0..self.rows {
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += self.get(i, j) * x[j];
            }
            out[i] = acc;
        }
    }

    /// `out = self^T * x`.
    pub fn tr_matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for j in 0..self.cols {
            let mut acc = 0.0;
            for i in 0..self.rows {
                acc += self.get(i, j) * x[i];
            }
            out[j] = acc;
        }
    }

    pub fn matmul(&self, rhs: &SMat) -> SMat {
        assert_eq!(self.cols, rhs.rows);
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let lik = self.get(i, k);
                if lik == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.set(i, j, out.get(i, j) + lik * rhs.get(k, j));
                }
            }
        }
        out
    }

    /// Solves `self * x = b` for square `self` by partial-pivot LU.
    ///
    /// `b` and `x` may alias in the caller's mind but are separate slices
    /// here; `x` is overwritten. A pivot below 1e-300 reports
    /// [`Error::SingularDiffusion`].
    pub fn solve_vec(&self, b: &[f64], x: &mut [f64]) -> Result<()> {
        let n = self.rows;
        if self.cols != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.cols,
            });
        }
        if b.len() != n || x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.len().max(x.len()),
            });
        }
        let mut lu = *self;
        x.copy_from_slice(b);
        for col in 0..n {
            let mut piv = col;
            let mut best = libm::fabs(lu.get(col, col));
            for r in col + 1..n {
                let cand = libm::fabs(lu.get(r, col));
                if cand > best {
                    best = cand;
                    piv = r;
                }
            }
            if best < 1e-300 {
                return Err(Error::SingularDiffusion);
            }
            if piv != col {
                for j in 0..n {
                    let tmp = lu.get(col, j);
                    lu.set(col, j, lu.get(piv, j));
                    lu.set(piv, j, tmp);
                }
                x.swap(col, piv);
            }
            let d = lu.get(col, col);
            for r in col + 1..n {
                let f = lu.get(r, col) / d;
                if f == 0.0 {
                    continue;
                }
                for j in col..n {
                    lu.set(r, j, lu.get(r, j) - f * lu.get(col, j));
                }
                x[r] -= f * x[col];
            }
        }
        for col in (0..n).rev() {
            let mut acc = x[col];
            for j in col + 1..n {
                acc -= lu.get(col, j) * x[j];
            }
            x[col] = acc / lu.get(col, col);
        }
        Ok(())
    }

    /// Solves `self * X = B` column by column.
    pub fn solve_mat(&self, b: &SMat) -> Result<SMat> {
        if b.rows != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                got: b.rows,
            });
        }
        let mut out = Self::zeros(self.rows, b.cols);
        let mut col = [0.0; MAX_DIM];
        let mut sol = [0.0; MAX_DIM];
        for j in 0..b.cols {
            for i in 0..b.rows {
                col[i] = b.get(i, j);
            }
            self.solve_vec(&col[..self.rows], &mut sol[..self.rows])?;
            for i in 0..self.rows {
                out.set(i, j, sol[i]);
            }
        }
        Ok(out)
    }
}
