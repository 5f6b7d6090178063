//! Dense row-major matrices of `f64` and the handful of kernels the rest of
//! the crate is built on.
//!
//! Every product accumulates each output element over the inner dimension in
//! a fixed left-to-right order, so results are bit-reproducible from run to
//! run. The kernels are written in `i-k-j` order so that the innermost loop
//! streams contiguous rows, which lets the compiler vectorize across output
//! columns without reassociating any per-element sum.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{KanError, Result};

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix[{}x{}] [", self.rows, self.cols)?;
        for r in 0..self.rows.min(8) {
            writeln!(f, "  {:?}", &self.row(r)[..self.cols.min(8)])?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    /// Builds a matrix from row-major data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(KanError::shape(
                "Matrix::from_vec",
                format!("{rows}x{cols}"),
                "non-empty shape",
            ));
        }
        if data.len() != rows * cols {
            return Err(KanError::shape(
                "Matrix::from_vec",
                format!("{rows}x{cols} (= {})", rows * cols),
                format!("{} values", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; all rows must share a length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(KanError::shape(
                    "Matrix::from_rows",
                    format!("row 0 has {cols} columns"),
                    format!("row {i} has {}", r.len()),
                ));
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "zero-sized matrix {rows}x{cols}");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        m.data.fill(value);
        m
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Copies the listed rows into a new matrix, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix::from_vec(indices.len(), self.cols, data).expect("non-empty row selection")
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with("add", other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with("sub", other, |a, b| a - b)
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with("hadamard", other, |a, b| a * b)
    }

    fn zip_with(&self, op: &'static str, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(shape_err(op, self, other));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Largest absolute entry (the max norm).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Induced infinity norm: largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

fn shape_err(op: &'static str, a: &Matrix, b: &Matrix) -> KanError {
    KanError::shape(
        op,
        format!("{}x{}", a.rows, a.cols),
        format!("{}x{}", b.rows, b.cols),
    )
}

/// `c[i, :] += a[i, k] * b[k, :]` for every `k` in order.
#[inline]
fn gemm_ikj(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let c_row = &mut c[i * n..(i + 1) * n];
        // Four k steps per pass over the output row. The running sum for
        // c[j] stays in a register but still adds terms in k order.
        let mut kk = 0;
        while kk + 4 <= k {
            let (a0, a1, a2, a3) = (a_row[kk], a_row[kk + 1], a_row[kk + 2], a_row[kk + 3]);
            let b0 = &b[kk * n..(kk + 1) * n];
            let b1 = &b[(kk + 1) * n..(kk + 2) * n];
            let b2 = &b[(kk + 2) * n..(kk + 3) * n];
            let b3 = &b[(kk + 3) * n..(kk + 4) * n];
            for ((((cv, &v0), &v1), &v2), &v3) in c_row.iter_mut().zip(b0).zip(b1).zip(b2).zip(b3) {
                let mut t = *cv;
                t += a0 * v0;
                t += a1 * v1;
                t += a2 * v2;
                t += a3 * v3;
                *cv = t;
            }
            kk += 4;
        }
        for (kk, &aik) in a_row.iter().enumerate().skip(kk) {
            let b_row = &b[kk * n..(kk + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += aik * bv;
            }
        }
    }
}

/// Matrix product `a · b`.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(shape_err("matmul", a, b));
    }
    let mut c = Matrix::zeros(a.rows, b.cols);
    gemm_ikj(&a.data, &b.data, &mut c.data, a.rows, a.cols, b.cols);
    Ok(c)
}

/// `a · bᵀ`, for `b` stored with the shared dimension along its columns.
pub fn matmul_nt(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.cols {
        return Err(shape_err("matmul_nt", a, b));
    }
    matmul(a, &b.transpose())
}

/// `aᵀ · b`, for `a` stored with the shared dimension along its rows.
pub fn matmul_tn(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows != b.rows {
        return Err(shape_err("matmul_tn", a, b));
    }
    let (m, k, n) = (a.cols, a.rows, b.cols);
    let mut c = Matrix::zeros(m, n);
    // Loop over the shared index outermost; each c[i, j] still sums k in order.
    for kk in 0..k {
        let a_row = a.row(kk);
        let b_row = b.row(kk);
        for (i, &aki) in a_row.iter().enumerate() {
            let c_row = &mut c.data[i * n..(i + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += aki * bv;
            }
        }
    }
    Ok(c)
}

/// Result of a least-squares solve.
#[derive(Debug, Clone)]
pub struct LstsqSolution {
    /// Minimizer `W` of `‖aW − b‖_F`.
    pub solution: Matrix,
    /// `‖aW − b‖_F` at the minimizer.
    pub residual: f64,
}

/// Relative pivot threshold below which the normal-equation matrix is
/// treated as singular.
pub const SINGULAR_PIVOT_TOL: f64 = 1e-12;

/// Solves `min_W ‖aW − b‖_F` through the normal equations `(aᵀa) W = aᵀb`
/// and a Cholesky factorization.
pub fn lstsq(a: &Matrix, b: &Matrix) -> Result<LstsqSolution> {
    if a.rows != b.rows {
        return Err(shape_err("lstsq", a, b));
    }
    if a.rows < a.cols {
        return Err(KanError::shape(
            "lstsq",
            format!("{}x{}", a.rows, a.cols),
            "at least as many rows as columns",
        ));
    }
    let gram = matmul_tn(a, a)?;
    let rhs = matmul_tn(a, b)?;
    let chol = cholesky(&gram)?;
    let solution = cholesky_solve(&chol, &rhs);
    let residual = matmul(a, &solution)?.sub(b)?.frobenius();
    Ok(LstsqSolution { solution, residual })
}

/// Lower-triangular `L` with `L Lᵀ = spd`.
pub fn cholesky(spd: &Matrix) -> Result<Matrix> {
    if spd.rows != spd.cols {
        return Err(KanError::shape(
            "cholesky",
            format!("{}x{}", spd.rows, spd.cols),
            "square matrix",
        ));
    }
    let n = spd.rows;
    let max_diag = (0..n).map(|i| spd[(i, i)].abs()).fold(0.0, f64::max);
    let tolerance = SINGULAR_PIVOT_TOL * max_diag;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = spd[(j, j)];
        for p in 0..j {
            pivot -= l[(j, p)] * l[(j, p)];
        }
        // Written negated so a NaN pivot is also rejected.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(pivot > tolerance) {
            return Err(KanError::Singular {
                column: j,
                pivot,
                tolerance,
            });
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = spd[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = rhs` column by column.
fn cholesky_solve(l: &Matrix, rhs: &Matrix) -> Matrix {
    let n = l.rows;
    let mut x = rhs.clone();
    for col in 0..rhs.cols {
        for i in 0..n {
            let mut s = x[(i, col)];
            for p in 0..i {
                s -= l[(i, p)] * x[(p, col)];
            }
            x[(i, col)] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[(i, col)];
            for p in i + 1..n {
                s -= l[(p, i)] * x[(p, col)];
            }
            x[(i, col)] = s / l[(i, i)];
        }
    }
    x
}
