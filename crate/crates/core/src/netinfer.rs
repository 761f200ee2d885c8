//! Influence networks from sparse low-rank vector autoregressions.
//!
//! A series `x(t) ∈ ℝᵈ` with `x(t) = Σ_ℓ A_ℓ x(t−ℓ) + e(t)` is embedded as a
//! regression `Y ≈ X·C` with `C = [A_1ᵀ; …; A_Lᵀ]`, fitted with SEED, and each
//! ordered pair of nodes is scored by `Σ_ℓ |Â_ℓ[i, j]|` (influence of `j` on `i`).

use ndarray::{s, Array1, Array2, Axis};
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{fit, SeedConfig, SeedModel};
use crate::linalg::{top_r_svd, Matrix};
use crate::simgen::{rng_for, support_auc};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarSpec {
    pub lags: usize,
    pub nodes: usize,
}

impl VarSpec {
    pub fn new(lags: usize, nodes: usize) -> Result<Self> {
        let spec = VarSpec { lags, nodes };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lags == 0 {
            return Err(Error::InvalidParameter("at least one lag is required".into()));
        }
        if self.nodes == 0 {
            return Err(Error::InvalidParameter("at least one node is required".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InfluenceGraph {
    /// `scores[[i, j]]`: aggregated influence of node `j` on node `i`.
    /// The diagonal holds self-influence.
    pub scores: Array2<f64>,
    /// Binary adjacency from [`InfluenceGraph::threshold`], diagonal always false.
    pub edges: Option<Array2<bool>>,
}

impl InfluenceGraph {
    pub fn nodes(&self) -> usize {
        self.scores.nrows()
    }

    /// Marks off-diagonal cells whose score exceeds `cut`.
    pub fn threshold(&mut self, cut: f64) -> Result<()> {
        if !(cut >= 0.0) {
            return Err(Error::InvalidParameter(format!("edge threshold must be nonnegative, got {cut}")));
        }
        let d = self.nodes();
        self.edges = Some(Array2::from_shape_fn((d, d), |(i, j)| {
            i != j && self.scores[[i, j]] > cut
        }));
        Ok(())
    }

    /// `(source, target, score)` for every off-diagonal pair, highest score first.
    /// Restricted to thresholded edges when present.
    pub fn edge_list(&self) -> Vec<(usize, usize, f64)> {
        let d = self.nodes();
        let mut out = Vec::with_capacity(d * d.saturating_sub(1));
        for i in 0..d {
            for j in 0..d {
                if i == j {
                    continue;
                }
                if let Some(e) = &self.edges {
                    if !e[[i, j]] {
                        continue;
                    }
                }
                out.push((j, i, self.scores[[i, j]]));
            }
        }
        out.sort_by(|a, b| b.2.total_cmp(&a.2).then((a.0, a.1).cmp(&(b.0, b.1))));
        out
    }
}

/// Subtracts each column's mean, and divides by its standard deviation when
/// `standardize` is set (constant columns are left at zero).
pub fn center_series(series: &Matrix, standardize: bool) -> Result<Matrix> {
    let t = series.rows();
    if t == 0 {
        return Err(Error::InsufficientData("empty series".into()));
    }
    let mut out = series.as_array().to_owned();
    let mean = out.mean_axis(Axis(0)).expect("nonempty");
    out -= &mean.insert_axis(Axis(0));
    if standardize {
        for mut col in out.columns_mut() {
            let sd = (col.iter().map(|v| v * v).sum::<f64>() / t as f64).sqrt();
            if sd > 0.0 {
                col /= sd;
            }
        }
    }
    Matrix::from_array(out)
}

/// Lagged design: row `t` of `Y` is `x(L+t)` and row `t` of `X` is
/// `[x(L+t−1), x(L+t−2), …, x(t)]`, most recent lag first.
pub fn lag_embed(series: &Matrix, lags: usize) -> Result<(Matrix, Matrix)> {
    if lags == 0 {
        return Err(Error::InvalidParameter("at least one lag is required".into()));
    }
    let (t, d) = series.dim();
    if t <= lags {
        return Err(Error::InsufficientData(format!(
            "{t} time steps cannot support {lags} lags"
        )));
    }
    let n = t - lags;
    let a = series.as_array();
    let mut x = Array2::<f64>::zeros((n, lags * d));
    for l in 0..lags {
        x.slice_mut(s![.., l * d..(l + 1) * d])
            .assign(&a.slice(s![lags - 1 - l..t - 1 - l, ..]));
    }
    let y = a.slice(s![lags.., ..]).to_owned();
    Ok((Matrix::from_array_unchecked(x), Matrix::from_array_unchecked(y)))
}

/// Splits a stacked coefficient into lag matrices `A_1, …, A_L`.
pub fn unstack_lags(c: &Matrix, spec: &VarSpec) -> Result<Vec<Array2<f64>>> {
    spec.validate()?;
    let d = spec.nodes;
    if c.rows() != spec.lags * d || c.cols() != d {
        return Err(Error::shape(
            "unstack_lags",
            format!("coefficient {:?}, expected ({}, {d})", c.dim(), spec.lags * d),
        ));
    }
    Ok((0..spec.lags)
        .map(|l| c.slice(s![l * d..(l + 1) * d, ..]).t().to_owned())
        .collect())
}

/// Stacks lag matrices into the regression coefficient `[A_1ᵀ; …; A_Lᵀ]`.
pub fn stack_lags(lags: &[Array2<f64>]) -> Result<Matrix> {
    let d = lags.first().map(|a| a.nrows()).unwrap_or(0);
    if d == 0 || lags.iter().any(|a| a.dim() != (d, d)) {
        return Err(Error::InvalidInput("lag matrices must be nonempty and square of equal size".into()));
    }
    let mut c = Array2::<f64>::zeros((lags.len() * d, d));
    for (l, a) in lags.iter().enumerate() {
        c.slice_mut(s![l * d..(l + 1) * d, ..]).assign(&a.t());
    }
    Matrix::from_array(c)
}

pub fn scores_from_coefficient(c: &Matrix, spec: &VarSpec) -> Result<InfluenceGraph> {
    let blocks = unstack_lags(c, spec)?;
    let mut scores = Array2::<f64>::zeros((spec.nodes, spec.nodes));
    for a in &blocks {
        scores.zip_mut_with(a, |s, v| *s += v.abs());
    }
    Ok(InfluenceGraph { scores, edges: None })
}

pub fn influence_scores(model: &SeedModel, spec: &VarSpec) -> Result<InfluenceGraph> {
    scores_from_coefficient(&model.coefficient, spec)
}

/// AUC of `scores` against a reference adjacency, over off-diagonal cells
/// unless `exclude_diagonal` is false.
pub fn evaluate_graph(
    scores: &Array2<f64>,
    reference: &Array2<bool>,
    exclude_diagonal: bool,
) -> Result<f64> {
    if scores.dim() != reference.dim() || scores.nrows() != scores.ncols() {
        return Err(Error::shape(
            "evaluate_graph",
            format!("scores {:?}, reference {:?}", scores.dim(), reference.dim()),
        ));
    }
    let mut s = Vec::new();
    let mut t = Vec::new();
    for ((i, j), &v) in scores.indexed_iter() {
        if exclude_diagonal && i == j {
            continue;
        }
        s.push(v);
        t.push(reference[[i, j]]);
    }
    support_auc(&s, &t)
}

/// Centers (optionally standardizes) the series, embeds it and fits SEED.
pub fn fit_var(
    series: &Matrix,
    spec: &VarSpec,
    config: &SeedConfig,
    standardize: bool,
) -> Result<(SeedModel, InfluenceGraph)> {
    spec.validate()?;
    if series.cols() != spec.nodes {
        return Err(Error::shape(
            "fit_var",
            format!("series has {} columns, spec has {} nodes", series.cols(), spec.nodes),
        ));
    }
    let centered = center_series(series, standardize)?;
    let (x, y) = lag_embed(&centered, spec.lags)?;
    let model = fit(&x, &y, config)?;
    let graph = influence_scores(&model, spec)?;
    Ok((model, graph))
}

/// Planted sparse low-rank VAR used for synthetic network benchmarks.
///
/// Nodes are split into drivers and followers. Lag matrices only carry
/// driver-to-follower influence, so drivers are white noise and followers are
/// a finite filter of it: the process is stable for any `gain`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VarSim {
    pub nodes: usize,
    pub lags: usize,
    pub steps: usize,
    pub rank: usize,
    pub drivers: usize,
    /// Nonzero lagged driver cells per factor.
    pub sources: usize,
    /// Nonzero followers per factor.
    pub targets: usize,
    /// Lag matrices are scaled so that `Σ_ℓ ‖A_ℓ‖₂` equals this value.
    pub gain: f64,
    pub noise_sd: f64,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for VarSim {
    fn default() -> Self {
        VarSim {
            nodes: 30,
            lags: 2,
            steps: 500,
            rank: 2,
            drivers: 6,
            sources: 4,
            targets: 6,
            gain: 6.0,
            noise_sd: 1.0,
            burn_in: 50,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarTruth {
    pub lag_matrices: Vec<Array2<f64>>,
    /// `reference[[i, j]]`: node `j` influences node `i`; diagonal false.
    pub reference: Array2<bool>,
    pub series: Matrix,
}

impl VarSim {
    pub fn validate(&self) -> Result<()> {
        let d = self.nodes;
        if self.lags == 0 || self.rank == 0 {
            return Err(Error::InvalidParameter("need at least one lag and rank one".into()));
        }
        if self.drivers == 0 || self.drivers >= d {
            return Err(Error::InvalidParameter(format!(
                "drivers must be in 1..{d}, got {}",
                self.drivers
            )));
        }
        let cells = self.lags * self.drivers;
        if self.sources == 0 || self.sources > cells {
            return Err(Error::InvalidParameter(format!(
                "sources must be in 1..={cells}, got {}",
                self.sources
            )));
        }
        if self.targets == 0 || self.targets > d - self.drivers {
            return Err(Error::InvalidParameter(format!(
                "targets must be in 1..={}, got {}",
                d - self.drivers,
                self.targets
            )));
        }
        if !(self.gain > 0.0) || !self.gain.is_finite() || !(self.noise_sd > 0.0) {
            return Err(Error::InvalidParameter("positive gain and noise required".into()));
        }
        if self.steps <= self.lags {
            return Err(Error::InsufficientData("series shorter than the lag order".into()));
        }
        Ok(())
    }

    /// Draws lag matrices and a series for replication stream `rep`.
    pub fn generate(&self, rep: u64) -> Result<VarTruth> {
        self.validate()?;
        let mut rng = rng_for(self.seed, rep);
        let (d, lags) = (self.nodes, self.lags);
        let perm = rand::seq::index::sample(&mut rng, d, d).into_vec();
        let (drivers, followers) = perm.split_at(self.drivers);
        let mag = Uniform::new(0.5, 1.0).expect("valid range");
        let signed = |rng: &mut crate::simgen::SimRng| {
            let sign = if rand::Rng::random::<bool>(rng) { 1.0 } else { -1.0 };
            sign * mag.sample(rng)
        };
        let mut c = Array2::<f64>::zeros((lags * d, d));
        for _ in 0..self.rank {
            let mut u = Array1::<f64>::zeros(lags * d);
            for cell in rand::seq::index::sample(&mut rng, lags * self.drivers, self.sources) {
                let (l, k) = (cell / self.drivers, cell % self.drivers);
                u[l * d + drivers[k]] = signed(&mut rng);
            }
            let mut v = Array1::<f64>::zeros(d);
            for k in rand::seq::index::sample(&mut rng, followers.len(), self.targets) {
                v[followers[k]] = signed(&mut rng);
            }
            c += &(u.insert_axis(Axis(1)).dot(&v.insert_axis(Axis(0))));
        }
        let stacked = Matrix::from_array(c)?;
        let mut blocks = unstack_lags(&stacked, &VarSpec { lags, nodes: d })?;
        let norm_sum: f64 = blocks
            .iter()
            .map(|a| {
                let m = Matrix::from_array_unchecked(a.clone());
                top_r_svd(&m, 1).map(|svd| svd.s[0])
            })
            .sum::<Result<f64>>()?;
        if norm_sum > 0.0 {
            for a in &mut blocks {
                *a *= self.gain / norm_sum;
            }
        }
        let reference = Array2::from_shape_fn((d, d), |(i, j)| {
            i != j && blocks.iter().any(|a| a[[i, j]] != 0.0)
        });

        let total = self.burn_in + self.steps;
        let mut x = Array2::<f64>::zeros((total + lags, d));
        for t in lags..total + lags {
            let mut next = Array1::<f64>::zeros(d);
            for (l, a) in blocks.iter().enumerate() {
                next += &a.dot(&x.row(t - 1 - l));
            }
            for v in next.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += self.noise_sd * z;
            }
            x.row_mut(t).assign(&next);
        }
        let series = x.slice(s![lags + self.burn_in.., ..]).to_owned();
        Ok(VarTruth {
            lag_matrices: blocks,
            reference,
            series: Matrix::from_array(series)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn embed_by_hand() {
        let series = Matrix::from_rows(&[[1.0], [2.0], [3.0], [4.0]]).unwrap();
        let (x, y) = lag_embed(&series, 2).unwrap();
        assert_eq!(y.as_array(), &array![[3.0], [4.0]]);
        assert_eq!(x.as_array(), &array![[2.0, 1.0], [3.0, 2.0]]);
        assert!(lag_embed(&series, 0).is_err());
        assert!(matches!(lag_embed(&series, 4), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn row_count_matches_lags() {
        let series = Matrix::zeros(1000, 3);
        let (x, y) = lag_embed(&series, 5).unwrap();
        assert_eq!(x.dim(), (995, 15));
        assert_eq!(y.dim(), (995, 3));
    }

    #[test]
    fn scores_by_hand() {
        let spec = VarSpec::new(1, 2).unwrap();
        let a1 = array![[0.0, 2.0], [0.0, 0.0]];
        let c = stack_lags(&[a1]).unwrap();
        let g = scores_from_coefficient(&c, &spec).unwrap();
        assert_eq!(g.scores, array![[0.0, 2.0], [0.0, 0.0]]);

        let spec2 = VarSpec::new(2, 2).unwrap();
        let a = array![[1.0, -0.5], [0.25, 0.0]];
        let c2 = stack_lags(&[a.clone(), -&a]).unwrap();
        let g2 = scores_from_coefficient(&c2, &spec2).unwrap();
        assert_eq!(g2.scores, a.mapv(|v| 2.0 * v.abs()));

        let zero = scores_from_coefficient(&Matrix::zeros(4, 2), &spec2).unwrap();
        assert!(zero.scores.iter().all(|&v| v == 0.0));
        assert!(scores_from_coefficient(&Matrix::zeros(3, 2), &spec2).is_err());
    }

    #[test]
    fn stack_roundtrip() {
        let a1 = array![[1.0, 2.0], [3.0, 4.0]];
        let a2 = array![[5.0, 6.0], [7.0, 8.0]];
        let c = stack_lags(&[a1.clone(), a2.clone()]).unwrap();
        let back = unstack_lags(&c, &VarSpec::new(2, 2).unwrap()).unwrap();
        assert_eq!(back, vec![a1, a2]);
    }

    #[test]
    fn graph_auc() {
        let reference = array![[false, true], [false, false]];
        let perfect = reference.mapv(|b| if b { 1.0 } else { 0.0 });
        assert_eq!(evaluate_graph(&perfect, &reference, true).unwrap(), 1.0);
        let flat = Array2::from_elem((2, 2), 0.7);
        assert_eq!(evaluate_graph(&flat, &reference, true).unwrap(), 0.5);
        let single = Array2::from_elem((1, 1), 1.0);
        assert!(evaluate_graph(&single, &Array2::from_elem((1, 1), true), true).is_err());
    }

    #[test]
    fn threshold_and_edge_list() {
        let mut g = InfluenceGraph {
            scores: array![[5.0, 0.2], [0.9, 0.0]],
            edges: None,
        };
        assert_eq!(g.edge_list(), vec![(0, 1, 0.9), (1, 0, 0.2)]);
        g.threshold(0.5).unwrap();
        assert_eq!(g.edge_list(), vec![(0, 1, 0.9)]);
    }

    #[test]
    fn centering() {
        let s = Matrix::from_rows(&[[1.0, 2.0], [3.0, 2.0]]).unwrap();
        let c = center_series(&s, true).unwrap();
        assert_eq!(c.as_array(), &array![[-1.0, 0.0], [1.0, 0.0]]);
    }

    #[test]
    fn simulated_var_is_stable_and_deterministic() {
        let sim = VarSim {
            steps: 300,
            ..VarSim::default()
        };
        let a = sim.generate(0).unwrap();
        let b = sim.generate(0).unwrap();
        assert_eq!(a.series, b.series);
        assert_eq!(a.series.dim(), (300, 30));
        assert!(a.series.iter().all(|v| v.is_finite() && v.abs() < 100.0));
        assert!(a.reference.iter().any(|&e| e));
        assert_ne!(sim.generate(1).unwrap().series, a.series);
    }
}
