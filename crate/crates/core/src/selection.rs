//! Rank selection by information criterion and support recovery by hard
//! thresholding.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{self, SeedConfig, SeedModel};
use crate::linalg::Matrix;
use crate::par;

/// `‖Y − XC‖_F² / (qn)`
pub fn loss(y: &Matrix, x: &Matrix, c: &Matrix) -> Result<f64> {
    if y.rows() != x.rows() || x.cols() != c.rows() || y.cols() != c.cols() {
        return Err(Error::shape(
            "loss",
            format!("Y {:?}, X {:?}, C {:?}", y.dim(), x.dim(), c.dim()),
        ));
    }
    Ok(loss_array(y, x, c.as_array()))
}

fn loss_array(y: &Matrix, x: &Matrix, c: &Array2<f64>) -> f64 {
    let fit = par::matmul(x.view(), c.view());
    let sq: f64 = y.iter().zip(fit.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    sq / (y.rows() * y.cols()) as f64
}

/// `√n·ln L + rank·√(ln pq)·ln ln n`
pub fn gic(loss_value: f64, rank: usize, n: usize, p: usize, q: usize) -> Result<f64> {
    if !(loss_value > 0.0) || !loss_value.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "criterion needs a positive finite loss, got {loss_value}"
        )));
    }
    if n < 3 {
        return Err(Error::InvalidParameter(format!("criterion needs n >= 3, got {n}")));
    }
    if p * q < 2 {
        return Err(Error::InvalidParameter("criterion needs pq >= 2".into()));
    }
    let nf = n as f64;
    let penalty = ((p * q) as f64).ln().sqrt() * nf.ln().ln();
    Ok(nf.sqrt() * loss_value.ln() + rank as f64 * penalty)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GicEntry {
    pub rank: usize,
    pub loss: f64,
    pub criterion: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankSelection {
    pub selected_rank: usize,
    pub trace: Vec<GicEntry>,
}

/// Index of the smallest criterion; ties go to the smaller rank.
pub fn argmin_rank(trace: &[GicEntry]) -> usize {
    let mut best = 0;
    for (i, e) in trace.iter().enumerate() {
        if e.criterion < trace[best].criterion {
            best = i;
        }
    }
    trace.get(best).map_or(0, |e| e.rank)
}

/// Evaluates the criterion at every truncation of the model's path.
pub fn select_rank(x: &Matrix, y: &Matrix, model: &SeedModel) -> Result<RankSelection> {
    let (n, p) = x.dim();
    let q = y.cols();
    if y.rows() != n || model.p() != p || model.q() != q {
        return Err(Error::shape(
            "select_rank",
            format!("X {:?}, Y {:?}, model {}x{}", x.dim(), y.dim(), model.p(), model.q()),
        ));
    }
    let losses = par::map_indexed(model.path.len(), |k| loss_array(y, x, &model.path[k]));
    let mut trace = Vec::with_capacity(losses.len());
    for (rank, l) in losses.into_iter().enumerate() {
        let floored = l.max(f64::EPSILON);
        trace.push(GicEntry {
            rank,
            loss: l,
            criterion: gic(floored, rank, n, p, q)?,
        });
    }
    Ok(RankSelection {
        selected_rank: argmin_rank(&trace),
        trace,
    })
}

/// Absolute magnitude cut for [`hard_threshold`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub theta: f64,
}

impl ThresholdRule {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "threshold must be positive, got {theta}"
            )));
        }
        Ok(ThresholdRule { theta })
    }
}

/// Zeroes entries with `|z_i| < θ`; the boundary value survives.
pub fn hard_threshold(z: ArrayView1<'_, f64>, rule: ThresholdRule) -> Array1<f64> {
    z.mapv(|v| if v.abs() < rule.theta { 0.0 } else { v })
}

fn nonzero(z: &Array1<f64>) -> Vec<usize> {
    crate::sparse_eig::support_of(z.view())
}

/// Supports of the thresholded left and right vectors of every factor.
pub fn recover_supports(
    model: &SeedModel,
    theta_u: ThresholdRule,
    theta_v: ThresholdRule,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if model.factors.is_empty() {
        return Err(Error::InvalidInput("model has no factors".into()));
    }
    Ok(model
        .factors
        .iter()
        .map(|f| {
            (
                nonzero(&hard_threshold(f.u.view(), theta_u)),
                nonzero(&hard_threshold(f.v.view(), theta_v)),
            )
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTuning {
    pub theta_u: f64,
    pub theta_v: f64,
    /// Mean held-out prediction error per `(theta_u, theta_v)` pair.
    pub scores: Vec<(f64, f64, f64)>,
}

/// `k` log-spaced values from `10^lo` to `10^hi`.
pub fn logspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![10f64.powf(lo)],
        _ => (0..k)
            .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (k - 1) as f64))
            .collect(),
    }
}

/// Picks `(θ_u, θ_v)` by `folds`-fold cross-validation on prediction error.
///
/// Each fold fits the model on the remaining rows, thresholds every factor
/// and scores `‖Y_test − X_test·Σ T(u)T(v)ᵀ‖_F / ‖Y_test‖_F`. `θ_v` is
/// interpreted relative to the largest right-vector entry of the fold's model.
/// Ties prefer larger thresholds.
pub fn tune_thresholds_cv(
    x: &Matrix,
    y: &Matrix,
    config: &SeedConfig,
    grid_u: &[f64],
    grid_v: &[f64],
    folds: usize,
) -> Result<ThresholdTuning> {
    let n = x.rows();
    if y.rows() != n {
        return Err(Error::shape(
            "tune_thresholds_cv",
            format!("X has {n} rows, Y has {}", y.rows()),
        ));
    }
    if folds < 2 || folds > n {
        return Err(Error::InvalidParameter(format!("folds {folds} outside 2..={n}")));
    }
    if grid_u.is_empty() || grid_v.is_empty() {
        return Err(Error::InvalidParameter("empty threshold grid".into()));
    }
    for &t in grid_u.iter().chain(grid_v) {
        ThresholdRule::new(t)?;
    }
    let fold_scores = par::map_indexed(folds, |f| -> Result<Vec<f64>> {
        let lo = f * n / folds;
        let hi = (f + 1) * n / folds;
        let train: Vec<usize> = (0..n).filter(|i| *i < lo || *i >= hi).collect();
        let xt = Matrix::from_array_unchecked(x.select(Axis(0), &train));
        let yt = Matrix::from_array_unchecked(y.select(Axis(0), &train));
        let xv = x.slice(s![lo..hi, ..]);
        let yv = y.slice(s![lo..hi, ..]);
        let mut cfg = config.clone();
        let cap = xt.rows().min(xt.cols()).min(yt.cols());
        cfg.r_max = cfg.r_max.map(|r| r.min(cap));
        let model = estimator::fit(&xt, &yt, &cfg)?;
        let vmax = model
            .factors
            .iter()
            .flat_map(|f| f.v.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let ynorm = yv.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let mut out = Vec::with_capacity(grid_u.len() * grid_v.len());
        for &tu in grid_u {
            for &tv in grid_v {
                let mut c = Array2::<f64>::zeros((x.cols(), y.cols()));
                for fac in &model.factors {
                    let u = hard_threshold(fac.u.view(), ThresholdRule { theta: tu });
                    let v = hard_threshold(fac.v.view(), ThresholdRule { theta: tv * vmax });
                    c += &u.view().insert_axis(Axis(1)).dot(&v.view().insert_axis(Axis(0)));
                }
                let pred = xv.dot(&c);
                let err = (&yv - &pred).iter().map(|v| v * v).sum::<f64>().sqrt() / ynorm;
                out.push(err);
            }
        }
        Ok(out)
    });
    let mut mean = vec![0.0; grid_u.len() * grid_v.len()];
    for fs in fold_scores {
        for (m, v) in mean.iter_mut().zip(fs?) {
            *m += v / folds as f64;
        }
    }
    let mut scores = Vec::with_capacity(mean.len());
    let mut best: Option<(f64, f64, f64)> = None;
    for (i, &tu) in grid_u.iter().enumerate() {
        for (j, &tv) in grid_v.iter().enumerate() {
            let m = mean[i * grid_v.len() + j];
            scores.push((tu, tv, m));
            let better = match best {
                None => true,
                Some((bu, bv, bm)) => m < bm || (m == bm && (tu, tv) > (bu, bv)),
            };
            if better {
                best = Some((tu, tv, m));
            }
        }
    }
    let (theta_u, theta_v, _) = best.expect("non-empty grid");
    Ok(ThresholdTuning {
        theta_u,
        theta_v,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn loss_cases() {
        let y = Matrix::from_rows(&[[2.0]]).unwrap();
        let x = Matrix::from_rows(&[[1.0]]).unwrap();
        assert_eq!(loss(&y, &x, &Matrix::from_rows(&[[1.0]]).unwrap()).unwrap(), 1.0);
        assert_eq!(loss(&y, &x, &Matrix::from_rows(&[[2.0]]).unwrap()).unwrap(), 0.0);
        assert_eq!(loss(&y, &x, &Matrix::zeros(1, 1)).unwrap(), 4.0);
        assert!(loss(&y, &x, &Matrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn gic_formula() {
        let v = gic(1.0, 2, 100, 10, 10).unwrap();
        assert!((v - 6.5546).abs() < 1e-3);
        assert_eq!(gic(1.0, 0, 100, 10, 10).unwrap(), 0.0);
        let step = gic(0.5, 3, 50, 4, 6).unwrap() - gic(0.5, 2, 50, 4, 6).unwrap();
        assert!((step - (24f64.ln().sqrt() * 50f64.ln().ln())).abs() < 1e-12);
    }

    #[test]
    fn gic_rejects_bad_input() {
        assert!(gic(0.0, 1, 100, 10, 10).is_err());
        assert!(gic(-1.0, 1, 100, 10, 10).is_err());
        assert!(gic(1.0, 1, 2, 10, 10).is_err());
        assert!(gic(1.0, 1, 10, 1, 1).is_err());
    }

    #[test]
    fn argmin_prefers_smaller_rank() {
        let t = |c: &[f64]| -> Vec<GicEntry> {
            c.iter()
                .enumerate()
                .map(|(rank, &criterion)| GicEntry {
                    rank,
                    loss: 1.0,
                    criterion,
                })
                .collect()
        };
        assert_eq!(argmin_rank(&t(&[10.0, 5.0, 3.0, 4.0])), 2);
        assert_eq!(argmin_rank(&t(&[3.0, 5.0, 3.0])), 0);
    }

    #[test]
    fn threshold_examples() {
        let r = ThresholdRule::new(0.5).unwrap();
        let z = array![0.3, -0.7, 0.5];
        let t = hard_threshold(z.view(), r);
        assert_eq!(t, array![0.0, -0.7, 0.5]);
        assert_eq!(hard_threshold(t.view(), r), t);
        assert_eq!(
            hard_threshold(z.view(), ThresholdRule::new(1.0).unwrap()),
            Array1::<f64>::zeros(3)
        );
        assert!(ThresholdRule::new(0.0).is_err());
    }

    #[test]
    fn logspace_endpoints() {
        let g = logspace(-1.0, 20f64.log10(), 10);
        assert_eq!(g.len(), 10);
        assert!((g[0] - 0.1).abs() < 1e-15);
        assert!((g[9] - 20.0).abs() < 1e-12);
    }
}
