//! Sparse eigenvector solvers.
//!
//! [`truncated_power`] is the generic building block. The two generalized
//! solvers reduce `Qu = λPu` to it: [`sparse_gen_eig_ridge`] iterates the
//! ridge-stabilized operator `P̃⁻¹Q`, [`sparse_gen_eig_fast`] looks for a sparse
//! near-null vector of `Xᵀ(YYᵀ − λ_max I)X`.

mod fast;
mod ridge;

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::norm2;

pub use fast::{sparse_gen_eig_fast, FastDesign};
pub use ridge::{sparse_gen_eig_ridge, sparse_gen_eig_ridge_data, RidgeDesign};

/// What the magnitude threshold of [`SparsityRule::Threshold`] is measured against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdScale {
    /// `θ · max_j |v_j|`
    #[default]
    MaxAbs,
    /// `θ · ‖v‖₂ / √p`, the root-mean-square entry.
    Rms,
    /// `θ` itself, applied to the unit-normalized vector.
    Absolute,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparsityRule {
    /// Keep the `s` largest-magnitude entries.
    Cardinality(usize),
    /// Zero entries whose magnitude is below the scaled threshold.
    Threshold {
        theta: f64,
        #[serde(default)]
        scale: ThresholdScale,
    },
}

impl SparsityRule {
    pub fn cardinality(s: usize) -> Self {
        SparsityRule::Cardinality(s)
    }

    /// Threshold relative to the largest entry.
    pub fn threshold(theta: f64) -> Self {
        SparsityRule::Threshold {
            theta,
            scale: ThresholdScale::MaxAbs,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        match *self {
            SparsityRule::Cardinality(s) if s == 0 || s > p => Err(Error::InvalidParameter(
                format!("cardinality {s} outside 1..={p}"),
            )),
            SparsityRule::Threshold { theta, .. } if !(theta > 0.0) || !theta.is_finite() => Err(
                Error::InvalidParameter(format!("threshold must be positive, got {theta}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn is_cardinality(&self) -> bool {
        matches!(self, SparsityRule::Cardinality(_))
    }
}

/// Zeroes the entries the rule discards and renormalizes to unit length.
pub fn truncate(v: ArrayView1<'_, f64>, rule: &SparsityRule) -> Result<Array1<f64>> {
    let p = v.len();
    rule.validate(p)?;
    let nv = norm2(v);
    if !nv.is_finite() {
        return Err(Error::NonFinite("truncate"));
    }
    if nv == 0.0 {
        return Err(Error::DegenerateTruncation);
    }
    let mut out = Array1::<f64>::zeros(p);
    match *rule {
        SparsityRule::Cardinality(s) => {
            for i in top_indices(v, s) {
                out[i] = v[i];
            }
        }
        SparsityRule::Threshold { theta, scale } => {
            let cut = match scale {
                ThresholdScale::MaxAbs => theta * v.iter().fold(0.0f64, |m, x| m.max(x.abs())),
                ThresholdScale::Rms => theta * nv / (p as f64).sqrt(),
                ThresholdScale::Absolute => theta * nv,
            };
            for (o, &x) in out.iter_mut().zip(v.iter()) {
                if x.abs() >= cut {
                    *o = x;
                }
            }
        }
    }
    let n = norm2(out.view());
    if n == 0.0 {
        return Err(Error::DegenerateTruncation);
    }
    out /= n;
    Ok(out)
}

/// Indices of the `s` largest magnitudes; ties go to the lower index.
/// Returned in ascending index order.
pub(crate) fn top_indices(v: ArrayView1<'_, f64>, s: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    idx.truncate(s);
    idx.sort_unstable();
    idx
}

pub fn support_of(v: ArrayView1<'_, f64>) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| **x != 0.0)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseEigResult {
    /// Unit-norm sparse eigenvector.
    pub u: Array1<f64>,
    pub lambda: f64,
    /// Indices of the nonzero entries of `u`, ascending.
    pub support: Vec<usize>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseEigOptions {
    pub max_iters: usize,
    pub tol: f64,
    /// Support-refinement rounds after the power phase.
    pub refine_iters: usize,
    /// Near-null acceptance level of the fast solver, relative to `‖M‖_F`.
    pub null_tol: f64,
    /// Start vector; a data-driven default is used when absent.
    pub init: Option<Array1<f64>>,
}

impl Default for SparseEigOptions {
    fn default() -> Self {
        SparseEigOptions {
            max_iters: crate::linalg::DEFAULT_MAX_ITERS,
            tol: crate::linalg::DEFAULT_TOL,
            refine_iters: 50,
            null_tol: 1e-4,
            init: None,
        }
    }
}

impl SparseEigOptions {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if !(self.null_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "null tolerance must be positive, got {}",
                self.null_tol
            )));
        }
        Ok(())
    }
}

/// Truncated power iteration `u ← truncate(M·u)`.
///
/// The reported eigenvalue is the Rayleigh quotient `uᵀMu` of the final
/// iterate and the residual is `‖(Mu − λu)|_support‖₂`. Running out of
/// iterations is not an error; `converged` is false in that case.
pub fn truncated_power<F>(
    apply_m: F,
    p: usize,
    rule: &SparsityRule,
    init: ArrayView1<'_, f64>,
    max_iters: usize,
    tol: f64,
) -> Result<SparseEigResult>
where
    F: Fn(ArrayView1<'_, f64>) -> Array1<f64>,
{
    if init.len() != p {
        return Err(Error::shape(
            "truncated_power",
            format!("init has length {}, expected {p}", init.len()),
        ));
    }
    let mut u = truncate(init, rule)?;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        let w = apply_m(u.view());
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("truncated_power"));
        }
        if w.iter().all(|&x| x == 0.0) {
            return Err(Error::ZeroSpectrum);
        }
        let next = truncate(w.view(), rule)?;
        iterations += 1;
        let step = norm2((&next - &u).view());
        u = next;
        if step <= tol {
            converged = true;
            break;
        }
    }
    let mu = apply_m(u.view());
    let lambda = u.dot(&mu);
    let support = support_of(u.view());
    let residual = support
        .iter()
        .map(|&i| (mu[i] - lambda * u[i]).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(SparseEigResult {
        u,
        lambda,
        support,
        iterations,
        residual,
        converged,
    })
}
