use serde::{Deserialize, Serialize};

use super::GroundTruth;
use crate::error::{Error, Result};
use crate::linalg::{effective_rank, frobenius, Matrix};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub pred_error: f64,
    pub est_error: f64,
    pub rank_error: usize,
    pub support_auc: f64,
}

/// `‖Y − XĈ‖_F / ‖Y‖_F`
pub fn normalized_prediction_error(y_test: &Matrix, x_test: &Matrix, c_hat: &Matrix) -> Result<f64> {
    if y_test.rows() != x_test.rows() || x_test.cols() != c_hat.rows() || y_test.cols() != c_hat.cols()
    {
        return Err(Error::shape(
            "normalized_prediction_error",
            format!("Y {:?}, X {:?}, C {:?}", y_test.dim(), x_test.dim(), c_hat.dim()),
        ));
    }
    let denom = y_test.frobenius_norm();
    if denom == 0.0 {
        return Err(Error::DivisionByZero("test responses are all zero"));
    }
    let fit = par::matmul(x_test.view(), c_hat.view());
    Ok(frobenius((y_test.as_array() - &fit).view()) / denom)
}

/// `‖Ĉ − C‖_F / ‖C‖_F`
pub fn normalized_estimation_error(c_hat: &Matrix, c_true: &Matrix) -> Result<f64> {
    if c_hat.dim() != c_true.dim() {
        return Err(Error::shape(
            "normalized_estimation_error",
            format!("{:?} vs {:?}", c_hat.dim(), c_true.dim()),
        ));
    }
    let denom = c_true.frobenius_norm();
    if denom == 0.0 {
        return Err(Error::DivisionByZero("true coefficient is zero"));
    }
    Ok(frobenius((c_hat.as_array() - c_true.as_array()).view()) / denom)
}

/// `|rank(Ĉ) − r|`, singular values below `1/100` of the largest ignored.
pub fn rank_recovery_error(c_hat: &Matrix, true_rank: usize) -> usize {
    effective_rank(c_hat, 0.01).abs_diff(true_rank)
}

/// Mann–Whitney estimate of `P(score_pos > score_neg)`, ties counting ½.
pub fn support_auc(scores: &[f64], truth: &[bool]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::shape(
            "support_auc",
            format!("{} scores, {} labels", scores.len(), truth.len()),
        ));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("non-finite score".into()));
    }
    let n_pos = truth.iter().filter(|&&t| t).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 {
        return Err(Error::UndefinedAuc("no positive cells"));
    }
    if n_neg == 0 {
        return Err(Error::UndefinedAuc("no negative cells"));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Midranks over tie groups, 1-based.
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            if truth[k] {
                pos_rank_sum += mid;
            }
        }
        i = j + 1;
    }
    let np = n_pos as f64;
    Ok((pos_rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

/// All four metrics for one estimate against the planted truth.
pub fn evaluate(
    c_hat: &Matrix,
    truth: &GroundTruth,
    x_test: &Matrix,
    y_test: &Matrix,
) -> Result<MetricsReport> {
    let scores: Vec<f64> = c_hat.iter().map(|v| v.abs()).collect();
    Ok(MetricsReport {
        pred_error: normalized_prediction_error(y_test, x_test, c_hat)?,
        est_error: normalized_estimation_error(c_hat, &truth.c)?,
        rank_error: rank_recovery_error(c_hat, truth.rank),
        support_auc: support_auc(&scores, &truth.support_mask())?,
    })
}
