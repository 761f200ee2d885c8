use ndarray::{Array2, ArrayView2};

use super::{check_symmetric, Matrix};
use crate::error::{Error, Result};
use crate::par;

/// Lower-triangular `L` with `L·Lᵀ = A`.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    check_symmetric(a.view(), "cholesky")?;
    cholesky_array(a.view()).map(Matrix::from_array_unchecked)
}

pub(crate) fn cholesky_array(a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let djj = d.sqrt();
        l[[j, j]] = djj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `L·Z = B` in place for lower-triangular `L`.
pub fn solve_lower(l: ArrayView2<'_, f64>, b: &mut Array2<f64>) {
    let n = l.nrows();
    let m = b.ncols();
    debug_assert_eq!(b.nrows(), n);
    for i in 0..n {
        for k in 0..i {
            let lik = l[[i, k]];
            if lik != 0.0 {
                for c in 0..m {
                    let v = b[[k, c]];
                    b[[i, c]] -= lik * v;
                }
            }
        }
        let d = l[[i, i]];
        for c in 0..m {
            b[[i, c]] /= d;
        }
    }
}

/// Solves `Lᵀ·Z = B` in place for lower-triangular `L`.
pub fn solve_lower_transpose(l: ArrayView2<'_, f64>, b: &mut Array2<f64>) {
    let n = l.nrows();
    let m = b.ncols();
    debug_assert_eq!(b.nrows(), n);
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let lki = l[[k, i]];
            if lki != 0.0 {
                for c in 0..m {
                    let v = b[[k, c]];
                    b[[i, c]] -= lki * v;
                }
            }
        }
        let d = l[[i, i]];
        for c in 0..m {
            b[[i, c]] /= d;
        }
    }
}

/// Solves `(L·Lᵀ)·Z = B` given the Cholesky factor `L`.
pub fn cholesky_solve(l: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut z = b.to_owned();
    solve_lower(l, &mut z);
    solve_lower_transpose(l, &mut z);
    z
}

/// Regularization policy for [`solve_least_squares_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LstsqRidge {
    /// Fail when the normal equations are not positive definite.
    None,
    /// Retry once with `1e-12·trace(AᵀA)/k` added to the diagonal.
    Auto,
}

/// `argmin_Z ‖B − A·Z‖_F²` through the normal equations, with automatic tiny ridge.
pub fn solve_least_squares(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    solve_least_squares_with(a, b, LstsqRidge::Auto)
}

pub fn solve_least_squares_with(a: &Matrix, b: &Matrix, ridge: LstsqRidge) -> Result<Matrix> {
    if a.rows() != b.rows() {
        return Err(Error::shape(
            "solve_least_squares",
            format!("A has {} rows, B has {}", a.rows(), b.rows()),
        ));
    }
    let k = a.cols();
    if k == 0 {
        return Err(Error::InvalidInput("least squares with no columns".into()));
    }
    let mut g = par::t_matmul(a.view(), a.view());
    super::symmetrize(&mut g);
    let rhs = par::t_matmul(a.view(), b.view());
    let l = match cholesky_array(g.view()) {
        Ok(l) => l,
        Err(Error::NotPositiveDefinite { .. }) if ridge == LstsqRidge::Auto => {
            let tau = 1e-12 * g.diag().sum() / k as f64;
            if !(tau > 0.0) {
                return Err(Error::Singular("solve_least_squares"));
            }
            for i in 0..k {
                g[[i, i]] += tau;
            }
            cholesky_array(g.view()).map_err(|_| Error::Singular("solve_least_squares"))?
        }
        Err(_) => return Err(Error::Singular("solve_least_squares")),
    };
    Ok(Matrix::from_array_unchecked(cholesky_solve(l.view(), rhs.view())))
}

/// `(ρI_p + XᵀX)⁻¹·B` factoring only the `n×n` matrix `ρI_n + XXᵀ`.
///
/// Uses `(ρI + XᵀX)⁻¹ = ρ⁻¹[I − Xᵀ(ρI + XXᵀ)⁻¹X]`, which is the
/// Sherman–Morrison–Woodbury identity with the `ρ⁻¹` factors pulled out.
pub fn smw_inverse_apply(x: &Matrix, rho: f64, b: &Matrix) -> Result<Matrix> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("ridge must be positive, got {rho}")));
    }
    if b.rows() != x.cols() {
        return Err(Error::shape(
            "smw_inverse_apply",
            format!("X has {} columns, B has {} rows", x.cols(), b.rows()),
        ));
    }
    let n = x.rows();
    let mut k = par::matmul(x.view(), x.t());
    super::symmetrize(&mut k);
    for i in 0..n {
        k[[i, i]] += rho;
    }
    let l = cholesky_array(k.view())?;
    let xb = par::matmul(x.view(), b.view());
    let t = cholesky_solve(l.view(), xb.view());
    let mut out = b.as_array() - &par::t_matmul(x.view(), t.view());
    out /= rho;
    Ok(Matrix::from_array_unchecked(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn close(a: &Array2<f64>, b: &Array2<f64>, tol: f64) -> bool {
        a.shape() == b.shape() && a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn cholesky_identity() {
        let l = cholesky(&Matrix::identity(3)).unwrap();
        assert_eq!(l.as_array(), &Array2::eye(3));
    }

    #[test]
    fn cholesky_by_hand() {
        let a = Matrix::from_rows(&[[4.0, 2.0], [2.0, 2.0]]).unwrap();
        let l = cholesky(&a).unwrap();
        assert!(close(l.as_array(), &array![[2.0, 0.0], [1.0, 1.0]], 1e-15));
    }

    #[test]
    fn cholesky_indefinite() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(matches!(
            cholesky(&a),
            Err(Error::NotPositiveDefinite { pivot: 1, .. })
        ));
    }

    #[test]
    fn cholesky_rejects_asymmetric() {
        let a = Matrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]]).unwrap();
        assert!(cholesky(&a).is_err());
    }

    #[test]
    fn lstsq_identity_returns_rhs() {
        let b = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let z = solve_least_squares(&Matrix::identity(2), &b).unwrap();
        assert!(close(z.as_array(), b.as_array(), 1e-14));
    }

    #[test]
    fn lstsq_mean_of_responses() {
        let a = Matrix::from_rows(&[[1.0], [1.0]]).unwrap();
        let b = Matrix::from_rows(&[[0.0], [2.0]]).unwrap();
        let z = solve_least_squares(&a, &b).unwrap();
        assert!((z[[0, 0]] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lstsq_zero_column() {
        let a = Matrix::from_rows(&[[1.0, 0.0], [2.0, 0.0], [0.0, 0.0]]).unwrap();
        let b = Matrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        assert!(matches!(
            solve_least_squares_with(&a, &b, LstsqRidge::None),
            Err(Error::Singular(_))
        ));
        let z = solve_least_squares(&a, &b).unwrap();
        assert!((z[[0, 0]] - 1.0).abs() < 1e-9);
        assert!(z[[1, 0]].abs() < 1e-9);
    }

    #[test]
    fn lstsq_all_zero_design_is_singular() {
        let a = Matrix::zeros(3, 2);
        let b = Matrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        assert!(matches!(solve_least_squares(&a, &b), Err(Error::Singular(_))));
    }

    #[test]
    fn smw_zero_design() {
        let z = smw_inverse_apply(&Matrix::zeros(3, 2), 1.0, &Matrix::identity(2)).unwrap();
        assert!(close(z.as_array(), &Array2::eye(2), 1e-15));
    }

    #[test]
    fn smw_single_row() {
        let x = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let z = smw_inverse_apply(&x, 1.0, &Matrix::identity(2)).unwrap();
        assert!(close(z.as_array(), &array![[0.5, 0.0], [0.0, 1.0]], 1e-15));
    }

    #[test]
    fn smw_rejects_nonpositive_ridge() {
        let x = Matrix::identity(2);
        assert!(matches!(
            smw_inverse_apply(&x, 0.0, &x),
            Err(Error::InvalidParameter(_))
        ));
        assert!(smw_inverse_apply(&x, -1.0, &x).is_err());
    }
}
