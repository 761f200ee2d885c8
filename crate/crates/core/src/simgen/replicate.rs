use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{evaluate, gen_coefficient, gen_dataset, rng_for, Dataset, GroundTruth, MetricsReport, SimSpec};
use crate::error::{Error, Result};
use crate::estimator::{fit, SeedConfig};
use crate::linalg::{top_r_svd, Matrix};
use crate::par;

/// Ridge least squares truncated to rank `r` by SVD.
pub fn naive_baseline(x: &Matrix, y: &Matrix, rho: f64, r: usize) -> Result<Matrix> {
    let ridge = crate::linalg::smw_inverse_apply(
        x,
        rho,
        &Matrix::from_array_unchecked(par::t_matmul(x.view(), y.view())),
    )?;
    let r = r.min(ridge.rows()).min(ridge.cols());
    let svd = top_r_svd(&ridge, r)?;
    Matrix::from_array(svd.reconstruct())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub index: usize,
    pub seed: u64,
    pub stream: u64,
    pub metrics: Option<MetricsReport>,
    pub baseline: Option<MetricsReport>,
    pub selected_rank: Option<usize>,
    pub error: Option<String>,
    pub seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub stderr: f64,
}

impl MetricSummary {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        let k = values.len();
        if k == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / k as f64;
        let stderr = if k > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            (var / k as f64).sqrt()
        } else {
            0.0
        };
        Some(MetricSummary { mean, stderr })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub outcomes: Vec<ReplicationOutcome>,
    /// `(metric name, summary)` over the successful replications.
    pub seed_metrics: Vec<(String, MetricSummary)>,
    pub baseline_metrics: Vec<(String, MetricSummary)>,
    pub failures: usize,
}

pub(crate) const METRIC_NAMES: [&str; 4] =
    ["pred_error", "est_error", "rank_error", "support_auc"];

fn summarize(reports: &[MetricsReport]) -> Vec<(String, MetricSummary)> {
    let cols: [Vec<f64>; 4] = [
        reports.iter().map(|r| r.pred_error).collect(),
        reports.iter().map(|r| r.est_error).collect(),
        reports.iter().map(|r| r.rank_error as f64).collect(),
        reports.iter().map(|r| r.support_auc).collect(),
    ];
    METRIC_NAMES
        .iter()
        .zip(cols.iter())
        .filter_map(|(name, v)| MetricSummary::from_values(v).map(|s| (name.to_string(), s)))
        .collect()
}

/// Draws truth, training and test sets for replication `index`.
pub fn replication_data(spec: &SimSpec, index: usize) -> Result<(GroundTruth, Dataset, Dataset)> {
    let mut rng = rng_for(spec.seed, index as u64);
    let truth = gen_coefficient(spec, &mut rng)?;
    let train = gen_dataset(spec, &truth, &mut rng)?;
    let test_spec = SimSpec {
        orthogonalize: false,
        ..spec.clone()
    };
    let test = gen_dataset(&test_spec, &truth, &mut rng)?;
    Ok((truth, train, test))
}

fn one(spec: &SimSpec, config: &SeedConfig, index: usize, baseline: bool) -> ReplicationOutcome {
    let start = Instant::now();
    let run = || -> Result<(MetricsReport, Option<MetricsReport>, usize)> {
        let (truth, train, test) = replication_data(spec, index)?;
        let model = fit(&train.x, &train.y, config)?;
        let m = evaluate(&model.coefficient, &truth, &test.x, &test.y)?;
        let b = if baseline {
            let rho = config
                .rho
                .unwrap_or_else(|| crate::sparse_eig::RidgeDesign::default_rho(&train.x));
            let c = naive_baseline(&train.x, &train.y, rho, spec.r)?;
            Some(evaluate(&c, &truth, &test.x, &test.y)?)
        } else {
            None
        };
        Ok((m, b, model.rank))
    };
    let res = run();
    let seconds = start.elapsed().as_secs_f64();
    match res {
        Ok((m, b, rank)) => ReplicationOutcome {
            index,
            seed: spec.seed,
            stream: index as u64,
            metrics: Some(m),
            baseline: b,
            selected_rank: Some(rank),
            error: None,
            seconds,
        },
        Err(e) => ReplicationOutcome {
            index,
            seed: spec.seed,
            stream: index as u64,
            metrics: None,
            baseline: None,
            selected_rank: None,
            error: Some(e.to_string()),
            seconds,
        },
    }
}

/// Runs `reps` independent replications, each on its own random stream.
/// Failed replications are kept in `outcomes` with their error message.
pub fn run_replications(
    spec: &SimSpec,
    config: &SeedConfig,
    reps: usize,
    baseline: bool,
) -> Result<ReplicationSummary> {
    if reps == 0 {
        return Err(Error::InvalidParameter("at least one replication is required".into()));
    }
    spec.validate()?;
    let outcomes = par::map_indexed(reps, |i| one(spec, config, i, baseline));
    let ok: Vec<MetricsReport> = outcomes.iter().filter_map(|o| o.metrics).collect();
    let base: Vec<MetricsReport> = outcomes.iter().filter_map(|o| o.baseline).collect();
    Ok(ReplicationSummary {
        failures: outcomes.len() - ok.len(),
        seed_metrics: summarize(&ok),
        baseline_metrics: summarize(&base),
        outcomes,
    })
}
