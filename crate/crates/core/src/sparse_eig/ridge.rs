use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::{support_of, truncate, truncated_power, SparseEigOptions, SparseEigResult, SparsityRule};
use crate::error::{Error, Result};
use crate::linalg::{
    canonical_sign, check_symmetric, cholesky_array, cholesky_solve, jacobi_eigen, norm2,
    solve_lower, solve_lower_transpose, top_r_svd_view, dominant_eigpair, Matrix,
};
use crate::par;

/// Largest restricted problem solved by a full Jacobi sweep.
const JACOBI_DIM: usize = 256;

/// Cardinality problems with at most this many candidate supports are
/// solved by enumerating them all.
const EXHAUSTIVE_SUPPORTS: u64 = 4096;

/// `C(n, k)`, saturating at `cap + 1`.
fn binomial_capped(n: usize, k: usize, cap: u64) -> u64 {
    let k = k.min(n - k);
    let mut c: u64 = 1;
    for i in 0..k {
        c = c * (n - i) as u64 / (i + 1) as u64;
        if c > cap {
            return cap + 1;
        }
    }
    c
}

/// Best support of size `s` by enumeration; ties keep the first in lexicographic order.
fn exhaustive<S: GenEigSystem>(sys: &S, s: usize) -> Result<(Array1<f64>, f64, Vec<usize>)> {
    let p = sys.dim();
    let mut idx: Vec<usize> = (0..s).collect();
    let mut best: Option<(Array1<f64>, f64, Vec<usize>)> = None;
    loop {
        let (u, lam) = sys.restricted_top(&idx)?;
        if best.as_ref().map_or(true, |b| lam > b.1) {
            best = Some((u, lam, idx.clone()));
        }
        // Next combination.
        let Some(i) = (0..s).rev().find(|&i| idx[i] < p - s + i) else {
            break;
        };
        idx[i] += 1;
        for j in i + 1..s {
            idx[j] = idx[j - 1] + 1;
        }
    }
    Ok(best.expect("at least one support"))
}

/// The pieces of a generalized problem `Qu = λP̃u` the solver touches.
pub(crate) trait GenEigSystem {
    fn dim(&self) -> usize;
    fn apply_q(&self, u: ArrayView1<'_, f64>) -> Array1<f64>;
    fn apply_p(&self, u: ArrayView1<'_, f64>) -> Array1<f64>;
    /// `P̃⁻¹Q·u`
    fn apply_op(&self, u: ArrayView1<'_, f64>) -> Array1<f64>;
    fn q_diag(&self) -> Array1<f64>;
    fn p_diag(&self) -> Array1<f64>;
    /// Top generalized eigenpair with `u` confined to `support`, `u` unit-norm.
    fn restricted_top(&self, support: &[usize]) -> Result<(Array1<f64>, f64)>;
}

fn solve_vec(l: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>) -> Array1<f64> {
    let col = b.insert_axis(Axis(1));
    cholesky_solve(l, col).remove_axis(Axis(1))
}

/// Unit vector `L⁻ᵀw` scattered into a `p`-vector on `support`.
fn back_transform(l: &Array2<f64>, w: ArrayView1<'_, f64>, support: &[usize], p: usize) -> Array1<f64> {
    let mut z = w.to_owned().insert_axis(Axis(1));
    solve_lower_transpose(l.view(), &mut z);
    let z = z.remove_axis(Axis(1));
    let nz = norm2(z.view());
    let mut u = Array1::<f64>::zeros(p);
    for (k, &i) in support.iter().enumerate() {
        u[i] = z[k] / nz;
    }
    u
}

/// Top eigenpair of a small symmetric matrix.
pub(crate) fn small_top_eig(m: &Array2<f64>) -> Result<(Array1<f64>, f64)> {
    if m.nrows() <= JACOBI_DIM {
        let (vals, vecs) = jacobi_eigen(m.view());
        return Ok((vecs.column(0).to_owned(), vals[0]));
    }
    let mm = Matrix::from_array(m.clone())?;
    match dominant_eigpair(&mm, crate::linalg::DEFAULT_MAX_ITERS, crate::linalg::DEFAULT_TOL) {
        Ok(e) => Ok((e.vector, e.value)),
        Err(Error::NoConvergence { best, .. }) => Ok((best.vector, best.value)),
        Err(e) => Err(e),
    }
}

/// Explicit `(P + ρI, Q)` pair.
struct DenseSystem {
    p_tilde: Array2<f64>,
    q: Array2<f64>,
    chol: Array2<f64>,
}

impl GenEigSystem for DenseSystem {
    fn dim(&self) -> usize {
        self.q.nrows()
    }

    fn apply_q(&self, u: ArrayView1<'_, f64>) -> Array1<f64> {
        self.q.dot(&u)
    }

    fn apply_p(&self, u: ArrayView1<'_, f64>) -> Array1<f64> {
        self.p_tilde.dot(&u)
    }

    fn apply_op(&self, u: ArrayView1<'_, f64>) -> Array1<f64> {
        solve_vec(self.chol.view(), self.q.dot(&u).view())
    }

    fn q_diag(&self) -> Array1<f64> {
        self.q.diag().to_owned()
    }

    fn p_diag(&self) -> Array1<f64> {
        self.p_tilde.diag().to_owned()
    }

    fn restricted_top(&self, support: &[usize]) -> Result<(Array1<f64>, f64)> {
        let pss = self.p_tilde.select(Axis(0), support).select(Axis(1), support);
        let qss = self.q.select(Axis(0), support).select(Axis(1), support);
        let l = cholesky_array(pss.view())?;
        let mut c = qss;
        solve_lower(l.view(), &mut c);
        let mut c = c.reversed_axes().as_standard_layout().into_owned();
        solve_lower(l.view(), &mut c);
        crate::linalg::symmetrize(&mut c);
        let (w, lam) = small_top_eig(&c)?;
        Ok((back_transform(&l, w.view(), support, self.dim()), lam.max(0.0)))
    }
}

enum Factor {
    /// Cholesky factor of `XXᵀ + ρI` (used when `n ≤ p`).
    Kernel(Array2<f64>),
    /// Cholesky factor of `XᵀX + ρI` (used when `n > p`).
    Primal(Array2<f64>),
}

/// A design matrix with its ridge factorization, reusable across responses.
///
/// The stabilized Gram matrix is `P̃ = (XᵀX + ρI)/n`, so `ρ` lives on the
/// scale of `XᵀX`.
pub struct RidgeDesign {
    x: Array2<f64>,
    rho: f64,
    factor: Factor,
}

impl RidgeDesign {
    pub fn new(x: &Matrix, rho: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::InvalidParameter(format!("ridge must be positive, got {rho}")));
        }
        let (n, p) = x.dim();
        if n == 0 || p == 0 {
            return Err(Error::InvalidInput("empty design matrix".into()));
        }
        let xa = x.as_array();
        let factor = if n <= p {
            let mut k = par::matmul(xa.view(), xa.t());
            crate::linalg::symmetrize(&mut k);
            for i in 0..n {
                k[[i, i]] += rho;
            }
            Factor::Kernel(cholesky_array(k.view())?)
        } else {
            let mut g = par::t_matmul(xa.view(), xa.view());
            crate::linalg::symmetrize(&mut g);
            for i in 0..p {
                g[[i, i]] += rho;
            }
            Factor::Primal(cholesky_array(g.view())?)
        };
        Ok(RidgeDesign {
            x: xa.clone(),
            rho,
            factor,
        })
    }

    /// `1e-6 · trace(XᵀX/n)`, floored away from zero.
    pub fn default_rho(x: &Matrix) -> f64 {
        let n = x.rows().max(1) as f64;
        let tr = x.iter().map(|v| v * v).sum::<f64>() / n;
        (1e-6 * tr).max(1e-12)
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    fn system<'a>(&'a self, y: ArrayView2<'a, f64>) -> Result<DataSystem<'a>> {
        if y.nrows() != self.x.nrows() {
            return Err(Error::shape(
                "sparse_gen_eig_ridge",
                format!("Y has {} rows, X has {}", y.nrows(), self.x.nrows()),
            ));
        }
        let mut r = par::t_matmul(y, self.x.view());
        r /= self.x.nrows() as f64;
        Ok(DataSystem { d: self, y, r })
    }
}

/// `Q = RᵀR/q` with `R = YᵀX/n`, never formed.
struct DataSystem<'a> {
    d: &'a RidgeDesign,
    y: ArrayView2<'a, f64>,
    r: Array2<f64>,
}

impl DataSystem<'_> {
    fn n(&self) -> f64 {
        self.d.x.nrows() as f64
    }

    fn q(&self) -> f64 {
        self.y.ncols() as f64
    }
}

impl GenEigSystem for DataSystem<'_> {
    fn dim(&self) -> usize {
        self.d.x.ncols()
    }

    fn apply_q(&self, u: ArrayView1<'_, f64>) -> Array1<f64> {
        let ru = self.r.dot(&u);
        self.r.t().dot(&ru) / self.q()
    }

    fn apply_p(&self, u: ArrayView1<'_, f64>) -> Array1<f64> {
        let xu = self.d.x.dot(&u);
        (self.d.x.t().dot(&xu) + &(&u * self.d.rho)) / self.n()
    }

    fn apply_op(&self, u: ArrayView1<'_, f64>) -> Array1<f64> {
        let ru = self.r.dot(&u);
        match &self.d.factor {
            Factor::Kernel(l) => {
                // P̃⁻¹Xᵀ = n·Xᵀ(XXᵀ + ρI)⁻¹
                let z = self.y.dot(&ru) / self.q();
                let t = solve_vec(l.view(), z.view());
                self.d.x.t().dot(&t)
            }
            Factor::Primal(l) => {
                let z = self.r.t().dot(&ru) * (self.n() / self.q());
                solve_vec(l.view(), z.view())
            }
        }
    }

    fn q_diag(&self) -> Array1<f64> {
        self.r.map_axis(Axis(0), |c| c.dot(&c)) / self.q()
    }

    fn p_diag(&self) -> Array1<f64> {
        self.d.x.map_axis(Axis(0), |c| c.dot(&c) + self.d.rho) / self.n()
    }

    fn restricted_top(&self, support: &[usize]) -> Result<(Array1<f64>, f64)> {
        let xs = self.d.x.select(Axis(1), support);
        let mut g = xs.t().dot(&xs);
        crate::linalg::symmetrize(&mut g);
        for i in 0..support.len() {
            g[[i, i]] += self.d.rho;
        }
        let l = cholesky_array(g.view())?;
        // Zᵀ = L⁻¹·X_SᵀY / √(nq); its top singular pair solves the restricted problem.
        let mut zt = xs.t().dot(&self.y);
        zt /= (self.n() * self.q()).sqrt();
        solve_lower(l.view(), &mut zt);
        let svd = top_r_svd_view(zt.view(), 1)?;
        let lam = svd.s[0] * svd.s[0];
        Ok((back_transform(&l, svd.u.column(0), support, self.dim()), lam))
    }
}

fn rayleigh<S: GenEigSystem>(sys: &S, u: ArrayView1<'_, f64>) -> (f64, f64) {
    let num = u.dot(&sys.apply_q(u));
    let den = u.dot(&sys.apply_p(u));
    (num, den)
}

/// `uᵀQu / uᵀP̃u`
fn gen_quotient<S: GenEigSystem>(sys: &S, u: ArrayView1<'_, f64>) -> f64 {
    let (num, den) = rayleigh(sys, u);
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

pub(crate) fn solve<S: GenEigSystem>(
    sys: &S,
    rule: &SparsityRule,
    opts: &SparseEigOptions,
) -> Result<SparseEigResult> {
    let p = sys.dim();
    rule.validate(p)?;
    opts.validate()?;
    let init = match &opts.init {
        Some(v) if v.len() != p => {
            return Err(Error::shape(
                "sparse_gen_eig_ridge",
                format!("init has length {}, expected {p}", v.len()),
            ))
        }
        Some(v) => v.clone(),
        None => {
            // Generalized quotient of each coordinate on its own.
            let d = sys.q_diag();
            if d.iter().all(|&x| x <= 0.0) {
                return Err(Error::ZeroSpectrum);
            }
            let pd = sys.p_diag();
            Array1::from_shape_fn(p, |i| (d[i].max(0.0) / pd[i]).sqrt())
        }
    };
    if let SparsityRule::Cardinality(s) = *rule {
        if s < p && binomial_capped(p, s, EXHAUSTIVE_SUPPORTS) <= EXHAUSTIVE_SUPPORTS {
            if sys.q_diag().iter().all(|&x| x <= 0.0) {
                return Err(Error::ZeroSpectrum);
            }
            let (u, lam, support) = exhaustive(sys, s)?;
            if !(lam > 0.0) {
                return Err(Error::ZeroSpectrum);
            }
            return Ok(finish(sys, u, support, 0, true));
        }
    }
    let init_t = truncate(init.view(), rule)?;
    let init_support = support_of(init_t.view());

    // A supplied start under a threshold rule is followed as is: the power
    // phase would only offer denser supports, which always win on λ.
    let mut candidates = Vec::new();
    let mut iterations = 0;
    if rule.is_cardinality() || opts.init.is_none() {
        match truncated_power(
            |u| sys.apply_op(u),
            p,
            rule,
            init_t.view(),
            opts.max_iters,
            opts.tol,
        ) {
            Ok(res) => {
                iterations = res.iterations;
                candidates.push(res.support);
            }
            Err(Error::ZeroSpectrum) | Err(Error::DegenerateTruncation) => {}
            Err(e) => return Err(e),
        }
    }
    if !candidates.contains(&init_support) {
        candidates.push(init_support);
    }

    let mut best: Option<(Array1<f64>, f64, Vec<usize>)> = None;
    for s in candidates {
        let (u, lam) = sys.restricted_top(&s)?;
        if best.as_ref().map_or(true, |b| lam > b.1) {
            best = Some((u, lam, s));
        }
    }
    let (mut u, mut lam, mut support) = best.ok_or(Error::ZeroSpectrum)?;
    if !(lam > 0.0) {
        return Err(Error::ZeroSpectrum);
    }

    let mut seen = vec![support.clone()];
    let mut converged = false;
    for _ in 0..opts.refine_iters {
        iterations += 1;
        let pu = sys.apply_p(u.view());
        let qu = sys.apply_q(u.view());
        let den = u.dot(&pu);
        let step = (&qu - &(&pu * lam)) / (den * lam);
        let w = &u + &step;
        let cand = match truncate(w.view(), rule) {
            Ok(c) => c,
            Err(Error::DegenerateTruncation) => {
                converged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let next = support_of(cand.view());
        if next == support {
            converged = true;
            break;
        }
        let (u2, lam2) = sys.restricted_top(&next)?;
        if rule.is_cardinality() {
            if lam2 > lam * (1.0 + 1e-12) {
                u = u2;
                lam = lam2;
                support = next;
            } else {
                converged = true;
                break;
            }
        } else {
            if seen.contains(&next) {
                converged = true;
                break;
            }
            seen.push(next.clone());
            u = u2;
            lam = lam2;
            support = next;
        }
    }

    Ok(finish(sys, u, support, iterations, converged))
}

fn finish<S: GenEigSystem>(
    sys: &S,
    mut u: Array1<f64>,
    support: Vec<usize>,
    iterations: usize,
    converged: bool,
) -> SparseEigResult {
    canonical_sign(u.view_mut());
    let lambda = gen_quotient(sys, u.view());
    let pu = sys.apply_p(u.view());
    let qu = sys.apply_q(u.view());
    let den = u.dot(&pu);
    let residual = support
        .iter()
        .map(|&i| (qu[i] - lambda * pu[i]).powi(2))
        .sum::<f64>()
        .sqrt()
        / den;
    SparseEigResult {
        u,
        lambda,
        support,
        iterations,
        residual,
        converged,
    }
}

/// Sparse dominant eigenvector of `(P + ρI)⁻¹Q` for explicit moment matrices.
///
/// Truncated power iteration on the ridge operator, followed by exact solves
/// on candidate supports and a support-refinement loop (gradient step,
/// truncate, re-solve). `lambda` is the generalized Rayleigh quotient
/// `uᵀQu / uᵀ(P + ρI)u`.
pub fn sparse_gen_eig_ridge(
    p: &Matrix,
    q: &Matrix,
    rho: f64,
    rule: &SparsityRule,
    opts: &SparseEigOptions,
) -> Result<SparseEigResult> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("ridge must be positive, got {rho}")));
    }
    check_symmetric(p.view(), "sparse_gen_eig_ridge")?;
    check_symmetric(q.view(), "sparse_gen_eig_ridge")?;
    if p.dim() != q.dim() {
        return Err(Error::shape(
            "sparse_gen_eig_ridge",
            format!("P is {:?}, Q is {:?}", p.dim(), q.dim()),
        ));
    }
    let mut p_tilde = p.as_array().clone();
    for i in 0..p.rows() {
        p_tilde[[i, i]] += rho;
    }
    let chol = cholesky_array(p_tilde.view())?;
    let sys = DenseSystem {
        p_tilde,
        q: q.as_array().clone(),
        chol,
    };
    solve(&sys, rule, opts)
}

/// The same solver working from data: `P̃ = (XᵀX + ρI)/n`, `Q = RᵀR/q`,
/// `R = YᵀX/n`.
pub fn sparse_gen_eig_ridge_data(
    design: &RidgeDesign,
    y: &Matrix,
    rule: &SparsityRule,
    opts: &SparseEigOptions,
) -> Result<SparseEigResult> {
    let sys = design.system(y.view())?;
    solve(&sys, rule, opts)
}
