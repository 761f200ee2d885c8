//! Sequential unit-rank extraction with residual deflation and refitting.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{effective_rank, jacobi_svd_view, norm2, solve_least_squares, top_r_svd, Matrix};
use crate::par;
use crate::selection::{self, argmin_rank, GicEntry};
use crate::sparse_eig::{
    sparse_gen_eig_ridge_data, FastDesign, RidgeDesign, SparseEigOptions, SparseEigResult,
    SparsityRule, ThresholdScale,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Ridge-stabilized `P̃⁻¹Q` iteration.
    #[default]
    Ridge,
    /// Two-step near-null-vector method.
    Fast,
}

/// Iteration limits and tolerances handed to the sparse eigensolver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub max_iters: usize,
    pub tol: f64,
    pub refine_iters: usize,
    pub null_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = SparseEigOptions::default();
        SolverSettings {
            max_iters: d.max_iters,
            tol: d.tol,
            refine_iters: d.refine_iters,
            null_tol: d.null_tol,
        }
    }
}

impl SolverSettings {
    fn options(&self, init: Option<Array1<f64>>) -> SparseEigOptions {
        SparseEigOptions {
            max_iters: self.max_iters,
            tol: self.tol,
            refine_iters: self.refine_iters,
            null_tol: self.null_tol,
            init,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeedConfig {
    pub variant: Variant,
    /// Ridge on the `XᵀX` scale; `1e-6·trace(P)` when absent.
    pub rho: Option<f64>,
    /// Sparsity of the left vectors; `Cardinality(⌈n/3⌉)` when absent.
    pub u_rule: Option<SparsityRule>,
    /// Relative threshold applied to each right vector.
    pub v_threshold: Option<f64>,
    /// Termination level on the solver eigenvalue.
    pub mu: f64,
    /// Compare the eigenvalue with `mu` itself instead of `mu·‖Y‖_F²/(nq)`.
    pub mu_absolute: bool,
    /// Factor cap; `min(n, p, q, 20)` when absent.
    pub r_max: Option<usize>,
    pub refit: bool,
    pub select_rank: bool,
    pub solver: SolverSettings,
}

impl Default for SeedConfig {
    fn default() -> Self {
        SeedConfig {
            variant: Variant::Ridge,
            rho: None,
            u_rule: None,
            v_threshold: None,
            mu: 1e-3,
            mu_absolute: false,
            r_max: None,
            refit: true,
            select_rank: true,
            solver: SolverSettings::default(),
        }
    }
}

impl SeedConfig {
    pub fn resolved_r_max(&self, n: usize, p: usize, q: usize) -> usize {
        self.r_max.unwrap_or_else(|| n.min(p).min(q).min(20))
    }

    pub fn resolved_u_rule(&self, n: usize, p: usize) -> SparsityRule {
        self.u_rule
            .unwrap_or_else(|| SparsityRule::Cardinality(n.div_ceil(3).clamp(1, p)))
    }

    pub fn validate(&self, n: usize, p: usize, q: usize) -> Result<()> {
        let cap = n.min(p).min(q);
        let r = self.resolved_r_max(n, p, q);
        if r == 0 || r > cap {
            return Err(Error::InvalidParameter(format!(
                "r_max {r} outside 1..={cap}"
            )));
        }
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {}", self.mu)));
        }
        if let Some(rho) = self.rho {
            if !(rho > 0.0) || !rho.is_finite() {
                return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
            }
        }
        if let Some(t) = self.v_threshold {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "v_threshold must be positive, got {t}"
                )));
            }
        }
        self.resolved_u_rule(n, p).validate(p)
    }
}

/// One `(u, v)` pair with `C_k = u·vᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitRankFactor {
    pub u: Array1<f64>,
    pub v: Array1<f64>,
    pub lambda_hat: f64,
    pub sigma_hat: f64,
}

impl UnitRankFactor {
    pub fn outer(&self) -> Array2<f64> {
        self.u
            .view()
            .insert_axis(Axis(1))
            .dot(&self.v.view().insert_axis(Axis(0)))
    }

    pub fn u_support(&self) -> Vec<usize> {
        crate::sparse_eig::support_of(self.u.view())
    }
}

/// What the solver returned at one step of the outer loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionStep {
    pub step: usize,
    pub lambda_hat: f64,
    pub sigma_hat: f64,
    pub support_size: usize,
    pub accepted: bool,
}

#[derive(Clone, Debug)]
pub struct SeedModel {
    pub factors: Vec<UnitRankFactor>,
    pub coefficient: Matrix,
    pub rank: usize,
    pub gic_trace: Vec<GicEntry>,
    pub steps: Vec<ExtractionStep>,
    /// Coefficient after `k` accepted factors, `k = 0..=steps accepted`.
    pub path: Vec<Array2<f64>>,
    /// Factor list belonging to each entry of `path`.
    pub path_factors: Vec<Vec<UnitRankFactor>>,
    /// The eigenvalue level below which extraction stopped.
    pub stop_level: f64,
    pub config: SeedConfig,
}

impl SeedModel {
    pub fn p(&self) -> usize {
        self.coefficient.rows()
    }

    pub fn q(&self) -> usize {
        self.coefficient.cols()
    }

    /// Number of factors extracted before rank selection.
    pub fn extracted(&self) -> usize {
        self.path.len() - 1
    }
}

enum Solver {
    Ridge(RidgeDesign),
    Fast(FastDesign),
}

/// Reusable per-design state for repeated extractions.
pub struct Extractor {
    solver: Solver,
    x: Array2<f64>,
    rule: SparsityRule,
    v_threshold: Option<f64>,
    settings: SolverSettings,
}

impl Extractor {
    pub fn new(x: &Matrix, config: &SeedConfig) -> Result<Self> {
        let (n, p) = x.dim();
        if n == 0 || p == 0 {
            return Err(Error::InvalidInput("empty design matrix".into()));
        }
        let rule = config.resolved_u_rule(n, p);
        rule.validate(p)?;
        let solver = match config.variant {
            Variant::Ridge => {
                let rho = config.rho.unwrap_or_else(|| RidgeDesign::default_rho(x));
                Solver::Ridge(RidgeDesign::new(x, rho)?)
            }
            Variant::Fast => Solver::Fast(FastDesign::new(x)?),
        };
        Ok(Extractor {
            solver,
            x: x.as_array().clone(),
            rule,
            v_threshold: config.v_threshold,
            settings: config.solver.clone(),
        })
    }

    pub fn with_rule(mut self, rule: SparsityRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn sparse_solve(&self, y: &Matrix, init: Option<Array1<f64>>) -> Result<SparseEigResult> {
        let opts = self.settings.options(init);
        match &self.solver {
            Solver::Ridge(d) => sparse_gen_eig_ridge_data(d, y, &self.rule, &opts),
            Solver::Fast(d) => d.solve(y, &self.rule, &opts),
        }
    }

    pub fn extract(&self, y: &Matrix, init: Option<Array1<f64>>) -> Result<UnitRankFactor> {
        let (n, _) = self.x.dim();
        if y.rows() != n {
            return Err(Error::shape(
                "extract_unit_rank",
                format!("Y has {} rows, X has {n}", y.rows()),
            ));
        }
        let res = self.sparse_solve(y, init)?;
        let q = y.cols();
        let xu = self.x.dot(&res.u);
        let xu2 = xu.dot(&xu);
        let utpu = xu2 / n as f64;
        if !(utpu > 1e-14) {
            return Err(Error::DegenerateFactor(utpu));
        }
        // v = R·u / (uᵀPu) with R = YᵀX/n.
        let mut v = y.t().dot(&xu) / xu2;
        if let Some(theta) = self.v_threshold {
            let cut = theta * v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            v.mapv_inplace(|x| if x.abs() < cut { 0.0 } else { x });
        }
        let sigma_hat = xu2.sqrt() * norm2(v.view()) / ((q * n) as f64).sqrt();
        Ok(UnitRankFactor {
            u: res.u,
            v,
            lambda_hat: res.lambda,
            sigma_hat,
        })
    }
}

/// One SEED step on the response block `yk`.
pub fn extract_unit_rank(x: &Matrix, yk: &Matrix, config: &SeedConfig) -> Result<UnitRankFactor> {
    Extractor::new(x, config)?.extract(yk, None)
}

/// `Y − X·Σ u_k v_kᵀ`
pub fn deflate(y: &Matrix, x: &Matrix, factors: &[UnitRankFactor]) -> Result<Matrix> {
    if y.rows() != x.rows() {
        return Err(Error::shape(
            "deflate",
            format!("Y has {} rows, X has {}", y.rows(), x.rows()),
        ));
    }
    let mut c = Array2::<f64>::zeros((x.cols(), y.cols()));
    for f in factors {
        if f.u.len() != x.cols() || f.v.len() != y.cols() {
            return Err(Error::shape(
                "deflate",
                format!("factor is {}x{}, expected {}x{}", f.u.len(), f.v.len(), x.cols(), y.cols()),
            ));
        }
        c += &f.outer();
    }
    Ok(residual(y, x, &c))
}

fn residual(y: &Matrix, x: &Matrix, c: &Array2<f64>) -> Matrix {
    let fit = par::matmul(x.view(), c.view());
    Matrix::from_array_unchecked(y.as_array() - &fit)
}

/// Least-squares re-estimate of the middle factor of the top-`k` SVD of
/// `c_partial`: returns `U·S̃·Vᵀ` with `S̃ = argmin ‖Y − XUSVᵀ‖_F`.
pub fn refit_core(x: &Matrix, y: &Matrix, c_partial: &Matrix, k: usize) -> Result<Matrix> {
    refit_parts(x, y, c_partial, k).map(|(c, _)| c)
}

/// Refit plus factors re-derived from it, `v` carrying the scale.
fn refit_parts(
    x: &Matrix,
    y: &Matrix,
    c_partial: &Matrix,
    k: usize,
) -> Result<(Matrix, Vec<UnitRankFactor>)> {
    if x.rows() != y.rows() || c_partial.rows() != x.cols() || c_partial.cols() != y.cols() {
        return Err(Error::shape(
            "refit_core",
            format!(
                "X {:?}, Y {:?}, C {:?}",
                x.dim(),
                y.dim(),
                c_partial.dim()
            ),
        ));
    }
    let svd = top_r_svd(c_partial, k)?;
    let xu = Matrix::from_array_unchecked(par::matmul(x.view(), svd.u.view()));
    let yv = Matrix::from_array_unchecked(par::matmul(y.view(), svd.v.view()));
    let s = solve_least_squares(&xu, &yv)?;
    let inner = jacobi_svd_view(s.view());
    let u = svd.u.dot(&inner.u);
    let v = svd.v.dot(&inner.v);
    let (n, q) = (x.rows() as f64, y.cols() as f64);
    let mut c = Array2::<f64>::zeros((x.cols(), y.cols()));
    let mut factors = Vec::with_capacity(k);
    for j in 0..k {
        let uj = u.column(j).to_owned();
        let vj = v.column(j).to_owned() * inner.s[j];
        let xu = x.dot(&uj);
        let sigma_hat = norm2(xu.view()) * norm2(vj.view()) / (n * q).sqrt();
        let f = UnitRankFactor {
            u: uj,
            v: vj,
            lambda_hat: sigma_hat * sigma_hat,
            sigma_hat,
        };
        c += &f.outer();
        factors.push(f);
    }
    Ok((Matrix::from_array_unchecked(c), factors))
}

fn check_shapes(x: &Matrix, y: &Matrix) -> Result<()> {
    if x.rows() != y.rows() {
        return Err(Error::shape(
            "fit",
            format!("X has {} rows, Y has {}", x.rows(), y.rows()),
        ));
    }
    if x.rows() == 0 || x.cols() == 0 || y.cols() == 0 {
        return Err(Error::InvalidInput(format!(
            "empty data: X {:?}, Y {:?}",
            x.dim(),
            y.dim()
        )));
    }
    Ok(())
}

/// Runs the outer extraction loop.
pub fn fit(x: &Matrix, y: &Matrix, config: &SeedConfig) -> Result<SeedModel> {
    check_shapes(x, y)?;
    let (n, p) = x.dim();
    let q = y.cols();
    config.validate(n, p, q)?;
    let r_max = config.resolved_r_max(n, p, q);
    let y_scale = y.iter().map(|v| v * v).sum::<f64>() / (n * q) as f64;
    let stop_level = if config.mu_absolute {
        config.mu
    } else {
        config.mu * y_scale
    };

    let mut coef = Array2::<f64>::zeros((p, q));
    let mut factors: Vec<UnitRankFactor> = Vec::new();
    let mut path = vec![coef.clone()];
    let mut path_factors = vec![Vec::new()];
    let mut steps = Vec::new();

    if y_scale > 0.0 {
        let extractor = Extractor::new(x, config)?;
        for k in 1..=r_max {
            let yk = residual(y, x, &coef);
            if yk.iter().all(|&v| v == 0.0) {
                break;
            }
            let factor = match extractor.extract(&yk, None) {
                Ok(f) => f,
                Err(Error::ZeroSpectrum) => break,
                Err(e) => return Err(e),
            };
            let accepted = factor.lambda_hat >= stop_level;
            steps.push(ExtractionStep {
                step: k,
                lambda_hat: factor.lambda_hat,
                sigma_hat: factor.sigma_hat,
                support_size: factor.u_support().len(),
                accepted,
            });
            if !accepted {
                break;
            }
            if config.refit {
                let partial = Matrix::from_array_unchecked(&coef + &factor.outer());
                let (c, fs) = refit_parts(x, y, &partial, k)?;
                coef = c.into_array();
                factors = fs;
            } else {
                coef += &factor.outer();
                factors.push(factor);
            }
            path.push(coef.clone());
            path_factors.push(factors.clone());
        }
    }

    let mut model = SeedModel {
        factors,
        coefficient: Matrix::from_array_unchecked(coef),
        rank: path.len() - 1,
        gic_trace: Vec::new(),
        steps,
        path,
        path_factors,
        stop_level,
        config: config.clone(),
    };
    if n >= 3 && p * q >= 2 {
        let sel = selection::select_rank(x, y, &model)?;
        model.gic_trace = sel.trace;
        if config.select_rank {
            model.truncate_to(sel.selected_rank);
        }
    }
    Ok(model)
}

impl SeedModel {
    /// Keeps the first `k` entries of the path as the reported estimate.
    pub fn truncate_to(&mut self, k: usize) {
        let k = k.min(self.extracted());
        self.rank = k;
        self.factors = self.path_factors[k].clone();
        self.coefficient = Matrix::from_array_unchecked(self.path[k].clone());
    }
}

/// `Xnew · Ĉ`
pub fn predict(model: &SeedModel, x_new: &Matrix) -> Result<Matrix> {
    if x_new.cols() != model.p() {
        return Err(Error::shape(
            "predict",
            format!("X has {} columns, model expects {}", x_new.cols(), model.p()),
        ));
    }
    Ok(Matrix::from_array_unchecked(par::matmul(
        x_new.view(),
        model.coefficient.view(),
    )))
}

/// One point of a termination-level sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuPathPoint {
    pub mu: f64,
    /// Factors accepted at this level.
    pub factors: usize,
    /// Rank of the reported coefficient: the information-criterion choice
    /// among the accepted factors when rank selection is on, else `factors`.
    pub rank: usize,
    /// Singular values of that coefficient above `1/100` of the largest.
    pub effective_rank: usize,
    /// Leading singular values of the coefficient, at most five.
    pub top_singular_values: Vec<f64>,
}

/// Sweeps the termination level. The factor sequence does not depend on
/// `mu`, so one fit at the smallest level is cut at each requested level.
pub fn mu_path(x: &Matrix, y: &Matrix, config: &SeedConfig, mus: &[f64]) -> Result<Vec<MuPathPoint>> {
    if mus.is_empty() {
        return Ok(Vec::new());
    }
    let smallest = mus.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut cfg = config.clone();
    cfg.mu = smallest;
    cfg.select_rank = false;
    let model = fit(x, y, &cfg)?;
    let (n, q) = (x.rows(), y.cols());
    let y_scale = y.iter().map(|v| v * v).sum::<f64>() / (n * q) as f64;
    let mut out = Vec::with_capacity(mus.len());
    for &mu in mus {
        let level = if config.mu_absolute { mu } else { mu * y_scale };
        let k = model
            .steps
            .iter()
            .take_while(|s| s.accepted && s.lambda_hat >= level)
            .count()
            .min(model.extracted());
        let rank = if config.select_rank && model.gic_trace.len() > k {
            argmin_rank(&model.gic_trace[..=k])
        } else {
            k
        };
        let c = Matrix::from_array_unchecked(model.path[rank].clone());
        let svals = crate::linalg::singular_values(&c);
        out.push(MuPathPoint {
            mu,
            factors: k,
            rank,
            effective_rank: effective_rank(&c, 0.01),
            top_singular_values: svals.iter().take(5).cloned().collect(),
        });
    }
    Ok(out)
}

/// One point of a sparsity-threshold sweep of the leading factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaPathPoint {
    pub theta: f64,
    /// Support of the leading left vector, absent when the threshold removed everything.
    pub support: Option<Vec<usize>>,
    pub sigma_hat: Option<f64>,
}

/// Sweeps an RMS-scaled threshold on the leading left vector, largest
/// threshold first. The first level starts from the leading factor of the
/// configured cardinality rule; later levels start from the last solution.
pub fn theta_path(
    x: &Matrix,
    y: &Matrix,
    config: &SeedConfig,
    thetas: &[f64],
) -> Result<Vec<ThetaPathPoint>> {
    check_shapes(x, y)?;
    let mut order: Vec<usize> = (0..thetas.len()).collect();
    order.sort_by(|&a, &b| thetas[b].total_cmp(&thetas[a]));
    let mut ex = Extractor::new(x, config)?;
    let mut warm = Some(ex.extract(y, None)?.u);
    let mut out: Vec<Option<ThetaPathPoint>> = vec![None; thetas.len()];
    for i in order {
        let theta = thetas[i];
        ex = ex.with_rule(SparsityRule::Threshold {
            theta,
            scale: ThresholdScale::Rms,
        });
        let point = match ex.extract(y, warm.clone()) {
            Ok(f) => {
                let support = f.u_support();
                warm = Some(f.u.clone());
                ThetaPathPoint {
                    theta,
                    support: Some(support),
                    sigma_hat: Some(f.sigma_hat),
                }
            }
            Err(Error::DegenerateTruncation) | Err(Error::ZeroSpectrum) => ThetaPathPoint {
                theta,
                support: None,
                sigma_hat: None,
            },
            Err(e) => return Err(e),
        };
        out[i] = Some(point);
    }
    Ok(out.into_iter().map(|p| p.expect("every grid point visited")).collect())
}
