//! Dense linear-algebra kernels.
//!
//! Everything here is a pure function of its inputs. Arithmetic stays dense;
//! sparsity of singular vectors is tracked by index sets one level up.

mod chol;
mod eigen;
mod svd;

use std::ops::Deref;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1};

use crate::error::{Error, Result};
use crate::par;

pub use chol::{
    cholesky, cholesky_solve, smw_inverse_apply, solve_least_squares, solve_least_squares_with,
    solve_lower, solve_lower_transpose, LstsqRidge,
};
pub use eigen::{dominant_eigpair, sym_eigen, DEFAULT_MAX_ITERS, DEFAULT_TOL};
pub(crate) use eigen::jacobi_eigen;
pub(crate) use chol::cholesky_array;
pub(crate) use svd::{jacobi_svd_view, top_r_svd_view};
pub use svd::{
    effective_rank, jacobi_svd, orthonormalize_columns, singular_values, top_r_svd, Svd,
};

/// Dense, row-major, finite `f64` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix(Array2<f64>);

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Matrix::new",
                format!("{} entries for a {rows}x{cols} matrix", data.len()),
            ));
        }
        let a = Array2::from_shape_vec((rows, cols), data)
            .map_err(|e| Error::shape("Matrix::new", e.to_string()))?;
        Self::from_array(a)
    }

    pub fn from_array(a: Array2<f64>) -> Result<Self> {
        if let Some(pos) = a.iter().position(|x| !x.is_finite()) {
            let cols = a.ncols().max(1);
            return Err(Error::InvalidInput(format!(
                "non-finite entry at ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self::from_array_unchecked(a))
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::shape(
                    "Matrix::from_rows",
                    format!("row {i} has {} entries, expected {cols}", r.len()),
                ));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub(crate) fn from_array_unchecked(a: Array2<f64>) -> Self {
        if a.is_standard_layout() {
            Matrix(a)
        } else {
            Matrix(a.as_standard_layout().into_owned())
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix(Array2::zeros((rows, cols)))
    }

    pub fn identity(n: usize) -> Self {
        Matrix(Array2::eye(n))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_array(self) -> Array2<f64> {
        self.0
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_array_unchecked(self.0.t().to_owned())
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(self.0.view())
    }

    /// `self · other`, data-parallel for large operands.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols() != other.rows() {
            return Err(Error::shape(
                "matmul",
                format!(
                    "{}x{} times {}x{}",
                    self.rows(),
                    self.cols(),
                    other.rows(),
                    other.cols()
                ),
            ));
        }
        Ok(Matrix(par::matmul(self.0.view(), other.0.view())))
    }
}

impl Deref for Matrix {
    type Target = Array2<f64>;

    fn deref(&self) -> &Array2<f64> {
        &self.0
    }
}

impl From<Matrix> for Array2<f64> {
    fn from(m: Matrix) -> Self {
        m.0
    }
}

/// An eigenvalue with a unit-norm eigenvector.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Array1<f64>,
}

/// `P = XᵀX / n`.
pub fn gram(x: &Matrix) -> Result<Matrix> {
    let n = x.rows();
    if n == 0 || x.cols() == 0 {
        return Err(Error::InvalidInput("gram of an empty matrix".into()));
    }
    let mut p = par::t_matmul(x.view(), x.view());
    p /= n as f64;
    symmetrize(&mut p);
    Ok(Matrix(p))
}

/// `R = YᵀX / n`.
pub fn cross_moment(y: &Matrix, x: &Matrix) -> Result<Matrix> {
    if y.rows() != x.rows() {
        return Err(Error::shape(
            "cross_moment",
            format!("Y has {} rows, X has {}", y.rows(), x.rows()),
        ));
    }
    if y.rows() == 0 {
        return Err(Error::InvalidInput("cross moment of empty matrices".into()));
    }
    let mut r = par::t_matmul(y.view(), x.view());
    r /= y.rows() as f64;
    Ok(Matrix(r))
}

pub fn frobenius(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn norm2(v: ArrayView1<'_, f64>) -> f64 {
    v.dot(&v).sqrt()
}

/// Copies the upper triangle onto the lower one.
pub(crate) fn symmetrize(a: &mut Array2<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (a[[i, j]] + a[[j, i]]);
            a[[i, j]] = avg;
            a[[j, i]] = avg;
        }
    }
}

pub(crate) fn check_symmetric(a: ArrayView2<'_, f64>, op: &'static str) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::shape(op, format!("{}x{} is not square", a.nrows(), a.ncols())));
    }
    let scale = a.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let n = a.nrows();
    for i in 0..n {
        for j in 0..i {
            if (a[[i, j]] - a[[j, i]]).abs() > 1e-10 * scale {
                return Err(Error::InvalidInput(format!(
                    "{op}: matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// Makes the largest-magnitude entry positive, ties going to the lowest index.
/// Returns whether the vector was negated.
pub fn canonical_sign(mut v: ArrayViewMut1<'_, f64>) -> bool {
    let mut best = 0usize;
    let mut best_abs = -1.0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if best_abs > 0.0 && v[best] < 0.0 {
        v.mapv_inplace(|x| -x);
        true
    } else {
        false
    }
}
