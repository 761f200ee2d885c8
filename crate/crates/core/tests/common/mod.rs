//! Independent reference computations for the integration tests, built on
//! nalgebra so they share no code with the crate under test.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};
use seed_core::simgen::SimRng;

pub fn normal_matrix(rows: usize, cols: usize, rng: &mut SimRng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(&mut *rng))
}

pub fn to_na(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub fn from_na_vec(v: &DVector<f64>) -> Array1<f64> {
    Array1::from_iter(v.iter().cloned())
}

pub fn frob(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Top eigenpair of `Qu = λPu` by Cholesky reduction; `u` unit length.
pub fn dense_gen_top(p: &Array2<f64>, q: &Array2<f64>) -> (Array1<f64>, f64) {
    let l = to_na(p).cholesky().expect("P positive definite").l();
    let linv = l.clone().try_inverse().expect("invertible factor");
    let mut c = &linv * to_na(q) * linv.transpose();
    c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let (k, lam) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, v)| (k, *v))
        .unwrap();
    let w = eig.eigenvectors.column(k).into_owned();
    let u = linv.transpose() * w;
    let u = &u / u.norm();
    (from_na_vec(&u), lam)
}

/// [`dense_gen_top`] with `u` confined to `support`, scattered back to full length.
pub fn restricted_gen_top(p: &Array2<f64>, q: &Array2<f64>, support: &[usize]) -> (Array1<f64>, f64) {
    let pick = |m: &Array2<f64>| Array2::from_shape_fn((support.len(), support.len()), |(a, b)| m[[support[a], support[b]]]);
    let (w, lam) = dense_gen_top(&pick(p), &pick(q));
    let mut u = Array1::zeros(p.nrows());
    for (k, &i) in support.iter().enumerate() {
        u[i] = w[k];
    }
    (u, lam)
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// `min(‖a − b‖, ‖a + b‖)` after scaling both to unit length.
pub fn unit_sign_distance(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    let na = a.dot(a).sqrt();
    let nb = b.dot(b).sqrt();
    let (a, b) = (a / na, b / nb);
    let d1 = (&a - &b).dot(&(&a - &b)).sqrt();
    let d2 = (&a + &b).dot(&(&a + &b)).sqrt();
    d1.min(d2)
}

/// Least-squares solution of `A·B = C` via nalgebra's SVD.
pub fn lstsq(a: &Array2<f64>, c: &Array2<f64>) -> Array2<f64> {
    let svd = to_na(a).svd(true, true);
    let sol = svd.solve(&to_na(c), 1e-12).expect("svd solve");
    Array2::from_shape_fn((sol.nrows(), sol.ncols()), |(i, j)| sol[(i, j)])
}

/// Singular values, descending.
pub fn singular_values(a: &Array2<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = to_na(a).singular_values().iter().cloned().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}
