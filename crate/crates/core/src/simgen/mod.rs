//! Synthetic sparse low-rank regression data and evaluation metrics.

mod metrics;
mod replicate;

use ndarray::{s, Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, jacobi_eigen, top_r_svd, Matrix};
use crate::par;

pub use metrics::{
    evaluate, normalized_estimation_error, normalized_prediction_error, rank_recovery_error,
    support_auc, MetricsReport,
};
pub use replicate::{
    replication_data,
    naive_baseline, run_replications, MetricSummary, ReplicationOutcome, ReplicationSummary,
};

/// The generator's random source: ChaCha8, one stream per replication.
pub type SimRng = ChaCha8Rng;

/// Generator for stream `stream` of master seed `seed`.
pub fn rng_for(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSpec {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub r: usize,
    /// AR(1) correlation of the predictors.
    pub rho_x: f64,
    /// AR(1) correlation of the noise.
    pub rho_e: f64,
    pub gamma: f64,
    /// Fraction of nonzero cells in the raw block-sparse matrix.
    pub density: f64,
    /// Singular-vector entries below this magnitude are zeroed.
    pub uv_zero_threshold: f64,
    /// Singular values of the planted coefficient; `100, 99, …` when absent.
    pub singular_values: Option<Vec<f64>>,
    /// Append `r` design rows that make the planted left vectors P-orthogonal.
    pub orthogonalize: bool,
    pub seed: u64,
}

impl Default for SimSpec {
    fn default() -> Self {
        SimSpec {
            n: 100,
            p: 100,
            q: 200,
            r: 3,
            rho_x: 0.5,
            rho_e: 0.5,
            gamma: 0.1,
            density: 0.05,
            uv_zero_threshold: 0.01,
            singular_values: None,
            orthogonalize: false,
            seed: 0,
        }
    }
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 || self.q == 0 {
            return Err(Error::InvalidParameter(format!(
                "dimensions must be positive: n={}, p={}, q={}",
                self.n, self.p, self.q
            )));
        }
        if self.r == 0 || self.r > self.p.min(self.q) {
            return Err(Error::InvalidParameter(format!(
                "rank {} outside 1..={}",
                self.r,
                self.p.min(self.q)
            )));
        }
        for (name, v) in [("rho_x", self.rho_x), ("rho_e", self.rho_e)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} = {v} outside [0, 1)")));
            }
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gamma must be nonnegative, got {}",
                self.gamma
            )));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "density {} outside (0, 1]",
                self.density
            )));
        }
        if !(self.uv_zero_threshold >= 0.0) {
            return Err(Error::InvalidParameter("uv_zero_threshold must be nonnegative".into()));
        }
        if let Some(sv) = &self.singular_values {
            if sv.len() != self.r {
                return Err(Error::InvalidParameter(format!(
                    "{} singular values given for rank {}",
                    sv.len(),
                    self.r
                )));
            }
        }
        Ok(())
    }

    /// Rows and columns of the nonzero block of the raw coefficient.
    pub fn block_shape(&self) -> (usize, usize) {
        let f = self.density.sqrt();
        let br = ((f * self.p as f64).ceil() as usize).clamp(self.r, self.p);
        let bc = ((f * self.q as f64).ceil() as usize).clamp(self.r, self.q);
        (br, bc)
    }

    pub fn planted_singular_values(&self) -> Vec<f64> {
        self.singular_values
            .clone()
            .unwrap_or_else(|| (0..self.r).map(|k| 100.0 - k as f64).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub c: Matrix,
    pub rank: usize,
    /// Thresholded left singular vectors, `p × r`.
    pub u: Array2<f64>,
    /// Thresholded right singular vectors, `q × r`.
    pub v: Array2<f64>,
    pub u_supports: Vec<Vec<usize>>,
    pub v_supports: Vec<Vec<usize>>,
    pub singular_values: Vec<f64>,
}

impl GroundTruth {
    /// Boolean mask of the nonzero cells of `C`.
    pub fn support_mask(&self) -> Vec<bool> {
        self.c.iter().map(|&v| v != 0.0).collect()
    }

    /// Truth built from explicit factors: `C = Σ s_k u_k v_kᵀ`.
    pub fn from_factors(u: Array2<f64>, s: &[f64], v: Array2<f64>) -> Result<Self> {
        if u.ncols() != s.len() || v.ncols() != s.len() {
            return Err(Error::shape(
                "GroundTruth::from_factors",
                format!("U {:?}, {} values, V {:?}", u.dim(), s.len(), v.dim()),
            ));
        }
        let us = &u * &Array1::from(s.to_vec()).insert_axis(Axis(0));
        let c = us.dot(&v.t());
        let sup = |m: &Array2<f64>| -> Vec<Vec<usize>> {
            m.columns()
                .into_iter()
                .map(|col| crate::sparse_eig::support_of(col))
                .collect()
        };
        Ok(GroundTruth {
            c: Matrix::from_array(c)?,
            rank: s.len(),
            u_supports: sup(&u),
            v_supports: sup(&v),
            u,
            v,
            singular_values: s.to_vec(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Matrix,
}

/// `Σ_ij = ρ^|i−j|`
pub fn ar1_cov(d: usize, rho: f64) -> Result<Matrix> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("rho = {rho} outside [0, 1)")));
    }
    let a = Array2::from_shape_fn((d, d), |(i, j)| rho.powi(i.abs_diff(j) as i32));
    Ok(Matrix::from_array_unchecked(a))
}

fn standard_normal(rows: usize, cols: usize, rng: &mut SimRng) -> Array2<f64> {
    let mut z = Array2::<f64>::zeros((rows, cols));
    for v in z.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
    z
}

/// `n` draws from `N(0, Σ)`, one per row, as `Z·Lᵀ` with `Σ = LLᵀ`.
pub fn mvn_sample(sigma: &Matrix, n: usize, rng: &mut SimRng) -> Result<Matrix> {
    let l = cholesky(sigma)?;
    let z = standard_normal(n, sigma.rows(), rng);
    Ok(Matrix::from_array_unchecked(par::matmul(z.view(), l.t())))
}

/// Rows drawn from `N(0, scale·Σ_AR(ρ))`.
///
/// The Cholesky factor of the AR(1) matrix is the recursion
/// `x_j = ρx_{j−1} + √(1−ρ²)·z_j`, so this equals [`mvn_sample`] on
/// [`ar1_cov`] for the same normal draws, in `O(nd)`.
pub fn ar1_sample(d: usize, rho: f64, scale: f64, n: usize, rng: &mut SimRng) -> Result<Matrix> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("rho = {rho} outside [0, 1)")));
    }
    let mut z = standard_normal(n, d, rng);
    let c = (1.0 - rho * rho).sqrt();
    for mut row in z.rows_mut() {
        for j in 1..d {
            row[j] = rho * row[j - 1] + c * row[j];
        }
    }
    z *= scale.sqrt();
    Ok(Matrix::from_array_unchecked(z))
}

/// Block-sparse raw matrix, its top-`r` SVD with small entries zeroed, and
/// the planted singular values in between.
pub fn gen_coefficient(spec: &SimSpec, rng: &mut SimRng) -> Result<GroundTruth> {
    spec.validate()?;
    let (br, bc) = spec.block_shape();
    let mut raw = Array2::<f64>::zeros((spec.p, spec.q));
    let block = standard_normal(br, bc, rng);
    raw.slice_mut(s![..br, ..bc]).assign(&block);
    let svd = top_r_svd(&Matrix::from_array_unchecked(raw), spec.r)?;
    let thr = spec.uv_zero_threshold;
    let u = svd.u.mapv(|x| if x.abs() < thr { 0.0 } else { x });
    let v = svd.v.mapv(|x| if x.abs() < thr { 0.0 } else { x });
    GroundTruth::from_factors(u, &spec.planted_singular_values(), v)
}

/// `r` extra design rows `A` with `Uᵀ(XᵀX + AᵀA)U = cI`.
pub fn orthogonalizing_rows(x: &Matrix, u: &Array2<f64>) -> Result<Array2<f64>> {
    let r = u.ncols();
    let xu = x.dot(u);
    let g = xu.t().dot(&xu);
    let (vals, vecs) = jacobi_eigen(g.view());
    let c = vals[0] * (1.0 + 1e-3);
    // B = diag(√(c − λ))·Wᵀ gives BᵀB = cI − G.
    let mut b = vecs.t().to_owned();
    for (k, mut row) in b.rows_mut().into_iter().enumerate() {
        row *= (c - vals[k]).max(0.0).sqrt();
    }
    // A = B·(UᵀU)⁻¹Uᵀ, so A·U = B.
    let utu = Matrix::from_array_unchecked(u.t().dot(u));
    let l = crate::linalg::cholesky_array(utu.view())?;
    let mut w = b.t().to_owned();
    crate::linalg::solve_lower(l.view(), &mut w);
    crate::linalg::solve_lower_transpose(l.view(), &mut w);
    let a = w.t().dot(&u.t());
    debug_assert_eq!(a.dim(), (r, x.cols()));
    Ok(a)
}

/// `X ~ N(0, Σ_X)` rows and `Y = XC + E`, `E ~ N(0, γΣ_E)` rows.
pub fn gen_dataset(spec: &SimSpec, truth: &GroundTruth, rng: &mut SimRng) -> Result<Dataset> {
    spec.validate()?;
    if truth.c.dim() != (spec.p, spec.q) {
        return Err(Error::shape(
            "gen_dataset",
            format!("truth is {:?}, spec wants {}x{}", truth.c.dim(), spec.p, spec.q),
        ));
    }
    let mut x = ar1_sample(spec.p, spec.rho_x, 1.0, spec.n, rng)?;
    if spec.orthogonalize {
        let a = orthogonalizing_rows(&x, &truth.u)?;
        let mut stacked = x.as_array().clone();
        stacked.append(Axis(0), a.view()).expect("column counts agree");
        x = Matrix::from_array_unchecked(stacked);
    }
    let rows = x.rows();
    let mut y = par::matmul(x.view(), truth.c.view());
    if spec.gamma > 0.0 {
        let e = ar1_sample(spec.q, spec.rho_e, spec.gamma, rows, rng)?;
        y += e.as_array();
    }
    Ok(Dataset {
        x,
        y: Matrix::from_array_unchecked(y),
    })
}
