use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::{canonical_sign, check_symmetric, norm2, EigenPair, Matrix};
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 1000;

/// Below this dimension the dominant pair is read off a full Jacobi solve.
const DENSE_DIM: usize = 64;

/// All eigenpairs of a symmetric matrix, eigenvalues in descending order.
/// Eigenvectors are the columns of the returned matrix, sign-normalized.
pub fn sym_eigen(a: &Matrix) -> Result<(Array1<f64>, Array2<f64>)> {
    check_symmetric(a.view(), "sym_eigen")?;
    Ok(jacobi_eigen(a.view()))
}

pub(crate) fn jacobi_eigen(a: ArrayView2<'_, f64>) -> (Array1<f64>, Array2<f64>) {
    let d = a.nrows();
    let mut m = a.to_owned();
    super::symmetrize(&mut m);
    let mut v = Array2::<f64>::eye(d);
    let scale = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale > 0.0 {
        for _sweep in 0..100 {
            let mut off = 0.0;
            for i in 0..d {
                for j in 0..i {
                    off += m[[i, j]] * m[[i, j]];
                }
            }
            if off.sqrt() <= 1e-15 * scale {
                break;
            }
            for p in 0..d {
                for q in (p + 1)..d {
                    let apq = m[[p, q]];
                    if apq.abs() <= 1e-300 {
                        continue;
                    }
                    let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..d {
                        let mkp = m[[k, p]];
                        let mkq = m[[k, q]];
                        m[[k, p]] = c * mkp - s * mkq;
                        m[[k, q]] = s * mkp + c * mkq;
                    }
                    for k in 0..d {
                        let mpk = m[[p, k]];
                        let mqk = m[[q, k]];
                        m[[p, k]] = c * mpk - s * mqk;
                        m[[q, k]] = s * mpk + c * mqk;
                    }
                    for k in 0..d {
                        let vkp = v[[k, p]];
                        let vkq = v[[k, q]];
                        v[[k, p]] = c * vkp - s * vkq;
                        v[[k, q]] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| m[[j, j]].total_cmp(&m[[i, i]]).then(i.cmp(&j)));
    let values = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let mut vectors = v.select(Axis(1), &order);
    for mut col in vectors.columns_mut() {
        canonical_sign(col.view_mut());
    }
    (values, vectors)
}

/// Largest eigenvalue of a symmetric matrix and a unit eigenvector.
///
/// Power iteration from a deterministic start. Convergence to a negative
/// eigenvalue, or stagnation between eigenvalues of equal magnitude, triggers
/// a rerun on a shifted copy whose top eigenvalue is the wanted one.
pub fn dominant_eigpair(m: &Matrix, max_iters: usize, tol: f64) -> Result<EigenPair> {
    check_symmetric(m.view(), "dominant_eigpair")?;
    let d = m.rows();
    if d == 0 {
        return Err(Error::InvalidInput("eigenpair of an empty matrix".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    if d <= DENSE_DIM {
        let (vals, vecs) = jacobi_eigen(m.view());
        return Ok(EigenPair {
            value: vals[0],
            vector: vecs.column(0).to_owned(),
        });
    }
    let first = power(m.view(), 0.0, max_iters, tol);
    let shift = match &first {
        Ok(pair) if pair.value >= 0.0 => return Ok(first.unwrap()),
        Ok(pair) => -pair.value,
        Err(_) => m
            .as_array()
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max),
    };
    power(m.view(), shift, max_iters, tol)
}

fn power(m: ArrayView2<'_, f64>, shift: f64, max_iters: usize, tol: f64) -> Result<EigenPair> {
    let d = m.nrows();
    let mut v = Array1::from_shape_fn(d, |i| {
        1.0 + 1e-3 * ((i as f64 * 0.618_033_988_749_895).fract() - 0.5)
    });
    let n0 = norm2(v.view());
    v /= n0;
    let mut best = (f64::INFINITY, 0.0, v.clone());
    for _ in 0..max_iters.max(1) {
        let mv = m.dot(&v);
        let mu = v.dot(&mv);
        let res = norm2((&mv - &(&v * mu)).view());
        if !res.is_finite() {
            return Err(Error::NonFinite("dominant_eigpair"));
        }
        if res < best.0 {
            best = (res, mu, v.clone());
        }
        if res <= tol * mu.abs().max(1.0) {
            let mut vec = v;
            canonical_sign(vec.view_mut());
            return Ok(EigenPair { value: mu, vector: vec });
        }
        let w = mv + &(&v * shift);
        let nw = norm2(w.view());
        if nw == 0.0 {
            break;
        }
        v = w / nw;
    }
    let (residual, value, mut vector) = best;
    canonical_sign(vector.view_mut());
    Err(Error::NoConvergence {
        iterations: max_iters,
        residual,
        best: Box::new(EigenPair { value, vector }),
    })
}
