use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::ridge::small_top_eig;
use super::{support_of, truncate, truncated_power, SparseEigOptions, SparseEigResult, SparsityRule};
use crate::error::{Error, Result};
use crate::linalg::{canonical_sign, top_r_svd_view, Matrix};
use crate::par;

/// Quantities of `X` the fast solver reuses across responses.
pub struct FastDesign {
    x: Array2<f64>,
    /// `σ_max(X)²`
    x_norm2: f64,
    /// `XXᵀ`
    kernel: Array2<f64>,
}

impl FastDesign {
    pub fn new(x: &Matrix) -> Result<Self> {
        let (n, p) = x.dim();
        if n == 0 || p == 0 {
            return Err(Error::InvalidInput("empty design matrix".into()));
        }
        let xa = x.as_array().clone();
        let s = top_r_svd_view(xa.view(), 1)?.s[0];
        let kernel = par::matmul(xa.view(), xa.t());
        Ok(FastDesign {
            x: xa,
            x_norm2: s * s,
            kernel,
        })
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    /// Two-step sparse solve for the response block `y`.
    ///
    /// Step 1 takes `λ = λ_max(YYᵀ)`. Step 2 looks for a sparse unit `u` with
    /// `Mu ≈ 0`, `M = Xᵀ(YYᵀ − λI)X`. `M` is negative semidefinite, so the
    /// eigenvalue nearest zero is its largest one and the truncated power
    /// method runs on the nonnegative operator `cI + M`, `c = λ·σ_max(X)²`.
    pub fn solve(
        &self,
        y: &Matrix,
        rule: &SparsityRule,
        opts: &SparseEigOptions,
    ) -> Result<SparseEigResult> {
        let (n, p) = self.x.dim();
        if y.rows() != n {
            return Err(Error::shape(
                "sparse_gen_eig_fast",
                format!("Y has {} rows, X has {n}", y.rows()),
            ));
        }
        rule.validate(p)?;
        opts.validate()?;
        let q = y.cols();
        if q == 0 || y.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroSpectrum);
        }
        let ya = y.as_array();
        let top = top_r_svd_view(ya.view(), 1)?;
        let lambda = top.s[0] * top.s[0];
        if !(lambda > 0.0) {
            return Err(Error::ZeroSpectrum);
        }
        let t = top.u.column(0);

        // F = YᵀX, so M = FᵀF − λXᵀX.
        let f = par::t_matmul(ya.view(), self.x.view());
        let apply_m = |u: ArrayView1<'_, f64>| -> Array1<f64> {
            let fu = f.dot(&u);
            let xu = self.x.dot(&u);
            f.t().dot(&fu) - &(self.x.t().dot(&xu) * lambda)
        };
        let c = lambda * self.x_norm2;
        let diag: Array1<f64> = {
            let fd = f.map_axis(Axis(0), |col| col.dot(&col));
            let xd = self.x.map_axis(Axis(0), |col| col.dot(&col));
            let d = (fd - &(xd * lambda)).mapv(f64::abs);
            let floor = 1e-12 * c.max(f64::MIN_POSITIVE);
            d.mapv(|v| v.max(floor))
        };

        let init = match &opts.init {
            Some(v) if v.len() != p => {
                return Err(Error::shape(
                    "sparse_gen_eig_fast",
                    format!("init has length {}, expected {p}", v.len()),
                ))
            }
            Some(v) => v.clone(),
            None => {
                let g = self.x.t().dot(&t).mapv(f64::abs);
                if g.iter().all(|&v| v == 0.0) {
                    Array1::from_elem(p, 1.0)
                } else {
                    g
                }
            }
        };
        let init_t = truncate(init.view(), rule)?;

        let power = truncated_power(
            |u| &u * c + &apply_m(u),
            p,
            rule,
            init.view(),
            opts.max_iters,
            opts.tol,
        )?;
        let mut iterations = power.iterations;

        let restricted = |support: &[usize]| -> Result<(Array1<f64>, f64)> {
            let fs = f.select(Axis(1), support);
            let xs = self.x.select(Axis(1), support);
            let mut m = fs.t().dot(&fs) - &(xs.t().dot(&xs) * lambda);
            crate::linalg::symmetrize(&mut m);
            let (w, mu) = small_top_eig(&m)?;
            let mut u = Array1::<f64>::zeros(p);
            for (k, &i) in support.iter().enumerate() {
                u[i] = w[k];
            }
            Ok((u, mu))
        };

        let mut candidates = vec![power.support.clone()];
        let init_support = support_of(init_t.view());
        if init_support != power.support {
            candidates.push(init_support);
        }
        let mut best: Option<(Array1<f64>, f64, Vec<usize>)> = None;
        for s in candidates {
            let (u, mu) = restricted(&s)?;
            if best.as_ref().map_or(true, |b| mu > b.1) {
                best = Some((u, mu, s));
            }
        }
        let (mut u, mut mu, mut support) = best.expect("at least one candidate support");

        let mut seen = vec![support.clone()];
        let mut converged = false;
        for _ in 0..opts.refine_iters {
            iterations += 1;
            let g = apply_m(u.view()) - &(&u * mu);
            let w = &u + &(&g / &diag);
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
            let (u2, mu2) = restricted(&next)?;
            if rule.is_cardinality() {
                if mu2 > mu + 1e-12 * c {
                    u = u2;
                    mu = mu2;
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
                mu = mu2;
                support = next;
            }
        }

        canonical_sign(u.view_mut());
        let mu_full = apply_m(u.view());
        let residual = support.iter().map(|&i| mu_full[i].powi(2)).sum::<f64>().sqrt();
        // ‖M‖_F² = tr((AG)²) with A = YYᵀ − λI and G = XXᵀ.
        let yyt = par::matmul(ya.view(), ya.t());
        let mut ag = par::matmul(yyt.view(), self.kernel.view());
        ag.scaled_add(-lambda, &self.kernel);
        let m_fro = (&ag * &ag.t()).sum().max(0.0).sqrt();
        let tolerance = opts.null_tol * m_fro;
        if residual > tolerance {
            return Err(Error::NearNullNotFound {
                residual,
                tolerance,
            });
        }
        Ok(SparseEigResult {
            u,
            lambda: lambda / (n as f64 * q as f64),
            support,
            iterations,
            residual,
            converged,
        })
    }
}

/// Sparse zero-eigenvalue solve of `XᵀYYᵀX − λ_max(YYᵀ)·XᵀX`.
///
/// `lambda` is reported divided by `nq`, the scale of the ridge solver.
pub fn sparse_gen_eig_fast(
    x: &Matrix,
    y: &Matrix,
    rule: &SparsityRule,
    opts: &SparseEigOptions,
) -> Result<SparseEigResult> {
    FastDesign::new(x)?.solve(y, rule, opts)
}
