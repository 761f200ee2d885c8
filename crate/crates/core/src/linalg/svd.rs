use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{canonical_sign, Matrix};
use crate::error::{Error, Result};
use crate::par;

/// Thin singular value decomposition `A ≈ U·diag(s)·Vᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Svd {
    pub u: Array2<f64>,
    pub s: Array1<f64>,
    pub v: Array2<f64>,
}

impl Svd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn reconstruct(&self) -> Array2<f64> {
        let us = &self.u * &self.s.view().insert_axis(Axis(0));
        us.dot(&self.v.t())
    }
}

/// Up to this many columns (on the smaller side) the full Jacobi SVD is used directly.
const DIRECT_DIM: usize = 64;
const OVERSAMPLE: usize = 8;
const SUBSPACE_MAX_ITERS: usize = 300;
const SUBSPACE_TOL: f64 = 1e-12;

/// Full thin SVD by one-sided Jacobi rotations.
///
/// Returns `min(m, k)` triplets in descending order. Left vectors belonging to
/// zero singular values are completed to an orthonormal set.
pub fn jacobi_svd(a: &Matrix) -> Svd {
    jacobi_svd_view(a.view())
}

pub(crate) fn jacobi_svd_view(a: ArrayView2<'_, f64>) -> Svd {
    let (m, k) = a.dim();
    if k > m {
        let t = jacobi_svd_view(a.t());
        let mut out = Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        };
        fix_signs(&mut out);
        return out;
    }
    // Columns of A stored as contiguous rows.
    let mut cols: Vec<Vec<f64>> = (0..k).map(|j| a.column(j).to_vec()).collect();
    let mut vt: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let mut e = vec![0.0; k];
            e[j] = 1.0;
            e
        })
        .collect();
    for _sweep in 0..80 {
        let mut rotated = false;
        for i in 0..k {
            for j in (i + 1)..k {
                let (alpha, beta, gamma) = {
                    let (ci, cj) = (&cols[i], &cols[j]);
                    let mut al = 0.0;
                    let mut be = 0.0;
                    let mut ga = 0.0;
                    for (x, y) in ci.iter().zip(cj.iter()) {
                        al += x * x;
                        be += y * y;
                        ga += x * y;
                    }
                    (al, be, ga)
                };
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut cols, i, j, c, s);
                rotate_pair(&mut vt, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));
    let top = norms.iter().cloned().fold(0.0, f64::max);
    let mut u = Array2::<f64>::zeros((m, k));
    let mut v = Array2::<f64>::zeros((k, k));
    let mut s = Array1::<f64>::zeros(k);
    let mut missing = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        let sv = norms[src];
        s[dst] = sv;
        for r in 0..k {
            v[[r, dst]] = vt[src][r];
        }
        if sv > top * 1e-300 && sv > 0.0 {
            for r in 0..m {
                u[[r, dst]] = cols[src][r] / sv;
            }
        } else {
            missing.push(dst);
        }
    }
    if !missing.is_empty() {
        complete_basis(&mut u, &missing);
    }
    let mut out = Svd { u, s, v };
    fix_signs(&mut out);
    out
}

fn rotate_pair(rows: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (lo, hi) = rows.split_at_mut(j);
    let (ri, rj) = (&mut lo[i], &mut hi[0]);
    for (x, y) in ri.iter_mut().zip(rj.iter_mut()) {
        let xi = *x;
        let yj = *y;
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

/// Fills the listed columns with unit vectors orthogonal to all other columns.
fn complete_basis(u: &mut Array2<f64>, missing: &[usize]) {
    let m = u.nrows();
    let mut candidate = 0usize;
    for &col in missing {
        while candidate < m {
            let mut e = Array1::<f64>::zeros(m);
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for j in 0..u.ncols() {
                    if j == col {
                        continue;
                    }
                    let uj = u.column(j);
                    let d = uj.dot(&e);
                    e.scaled_add(-d, &uj);
                }
            }
            let n = e.dot(&e).sqrt();
            if n > 1e-8 {
                u.column_mut(col).assign(&(e / n));
                break;
            }
        }
    }
}

fn fix_signs(svd: &mut Svd) {
    for j in 0..svd.s.len() {
        if canonical_sign(svd.u.column_mut(j)) {
            svd.v.column_mut(j).mapv_inplace(|x| -x);
        }
    }
}

/// Singular values of `a` in descending order.
pub fn singular_values(a: &Matrix) -> Array1<f64> {
    jacobi_svd_view(a.view()).s
}

/// Number of singular values at least `max_sv · rel`.
pub fn effective_rank(a: &Matrix, rel: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let s = singular_values(a);
    let top = s[0];
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x >= top * rel).count()
}

/// Orthonormal basis for the column span, in place of the columns of `a`.
///
/// Modified Gram–Schmidt with one reorthogonalization pass. Columns that turn
/// out linearly dependent are replaced by unit vectors orthogonal to the rest.
pub fn orthonormalize_columns(a: &Array2<f64>) -> Array2<f64> {
    let (m, k) = a.dim();
    let mut q = a.clone();
    let mut missing = Vec::new();
    for j in 0..k {
        let orig = q.column(j).dot(&q.column(j)).sqrt();
        for _ in 0..2 {
            for i in 0..j {
                if missing.contains(&i) {
                    continue;
                }
                let d = q.column(i).dot(&q.column(j));
                let qi = q.column(i).to_owned();
                q.column_mut(j).scaled_add(-d, &qi);
            }
        }
        let n = q.column(j).dot(&q.column(j)).sqrt();
        if n > 1e-10 * orig.max(f64::MIN_POSITIVE) && n > 0.0 {
            q.column_mut(j).mapv_inplace(|x| x / n);
        } else {
            q.column_mut(j).fill(0.0);
            missing.push(j);
        }
    }
    if !missing.is_empty() && k <= m {
        complete_basis(&mut q, &missing);
    }
    q
}

/// The `r` leading singular triplets of `a`.
///
/// Small problems go straight to [`jacobi_svd`]. Larger ones use block
/// subspace iteration with Rayleigh–Ritz extraction on `r + 8` columns; if
/// that stalls the full Jacobi SVD is used instead.
pub fn top_r_svd(a: &Matrix, r: usize) -> Result<Svd> {
    top_r_svd_view(a.view(), r)
}

pub(crate) fn top_r_svd_view(a: ArrayView2<'_, f64>, r: usize) -> Result<Svd> {
    let (p, q) = a.dim();
    let d = p.min(q);
    if r == 0 || r > d {
        return Err(Error::InvalidParameter(format!(
            "rank {r} outside 1..={d} for a {p}x{q} matrix"
        )));
    }
    let b = (r + OVERSAMPLE).min(d);
    if d <= DIRECT_DIM || b == d {
        return Ok(truncate_svd(jacobi_svd_view(a), r));
    }
    match subspace_svd(a, r, b) {
        Some(svd) => Ok(svd),
        None => Ok(truncate_svd(jacobi_svd_view(a), r)),
    }
}

fn truncate_svd(svd: Svd, r: usize) -> Svd {
    Svd {
        u: svd.u.slice(s![.., ..r]).to_owned(),
        s: svd.s.slice(s![..r]).to_owned(),
        v: svd.v.slice(s![.., ..r]).to_owned(),
    }
}

fn subspace_svd(a: ArrayView2<'_, f64>, r: usize, b: usize) -> Option<Svd> {
    let q = a.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(0x05ee_d5bd);
    let mut omega = Array2::<f64>::from_shape_fn((q, b), |(_, j)| {
        if j == 0 {
            1.0
        } else {
            rng.random::<f64>() - 0.5
        }
    });
    for _ in 0..SUBSPACE_MAX_ITERS {
        let z = orthonormalize_columns(&par::matmul(a, omega.view()));
        // Rayleigh–Ritz: Bᵀ = Aᵀ Z is q×b; its SVD gives the projected triplets.
        let bt = par::t_matmul(a, z.view());
        let small = jacobi_svd_view(bt.view());
        let u = z.dot(&small.v);
        let svd = Svd {
            u,
            s: small.s.clone(),
            v: small.u.clone(),
        };
        let s1 = svd.s[0];
        if s1 == 0.0 {
            return Some(truncate_svd(svd, r));
        }
        let av = par::matmul(a, svd.v.slice(s![.., ..r]));
        let mut worst = 0.0f64;
        for j in 0..r {
            let mut res = av.column(j).to_owned();
            res.scaled_add(-svd.s[j], &svd.u.column(j));
            worst = worst.max(res.dot(&res).sqrt());
        }
        if worst <= SUBSPACE_TOL * s1 {
            let mut out = truncate_svd(svd, r);
            fix_signs(&mut out);
            return Some(out);
        }
        omega = svd.v;
    }
    None
}
