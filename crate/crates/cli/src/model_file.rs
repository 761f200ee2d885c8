use std::path::Path;

use ndarray::{Array1, Array2};
use seed_core::estimator::ExtractionStep;
use seed_core::selection::GicEntry;
use seed_core::{Matrix, SeedConfig, SeedModel, UnitRankFactor};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorRecord {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub lambda_hat: f64,
    pub sigma_hat: f64,
    pub u_support: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkRecord {
    pub nodes: usize,
    pub lags: usize,
    /// Row `lag·nodes + j` of the coefficient belongs to node `j` at lag `lag + 1`.
    pub lag_order: String,
    pub standardize: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub p: usize,
    pub q: usize,
    /// Reported rank; `factors` has this many entries.
    pub rank: usize,
    /// Factors extracted before rank selection.
    pub extracted: usize,
    pub factors: Vec<FactorRecord>,
    /// Row-major `p × q` coefficient.
    pub coefficient: Vec<Vec<f64>>,
    pub gic_trace: Vec<GicEntry>,
    pub steps: Vec<ExtractionStep>,
    pub stop_level: f64,
    pub config: SeedConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkRecord>,
}

impl ModelFile {
    pub fn from_model(model: &SeedModel, network: Option<NetworkRecord>) -> Self {
        ModelFile {
            schema_version: SCHEMA_VERSION,
            p: model.p(),
            q: model.q(),
            rank: model.rank,
            extracted: model.extracted(),
            factors: model
                .factors
                .iter()
                .map(|f| FactorRecord {
                    u: f.u.to_vec(),
                    v: f.v.to_vec(),
                    lambda_hat: f.lambda_hat,
                    sigma_hat: f.sigma_hat,
                    u_support: f.u_support(),
                })
                .collect(),
            coefficient: model
                .coefficient
                .as_array()
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect(),
            gic_trace: model.gic_trace.clone(),
            steps: model.steps.clone(),
            stop_level: model.stop_level,
            config: model.config.clone(),
            network,
        }
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => {
                return Err(CliError::input(format!(
                    "{}: unsupported schema_version {v}, expected {SCHEMA_VERSION}",
                    path.display()
                )))
            }
            None => {
                return Err(CliError::input(format!(
                    "{}: missing schema_version",
                    path.display()
                )))
            }
        }
        let file: ModelFile = serde_json::from_value(value)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        file.check().map_err(|e| e.context(path.display()))?;
        Ok(file)
    }

    fn check(&self) -> CliResult<()> {
        if self.coefficient.len() != self.p || self.coefficient.iter().any(|r| r.len() != self.q) {
            return Err(CliError::input(format!(
                "coefficient is not {} x {}",
                self.p, self.q
            )));
        }
        if self.factors.len() != self.rank {
            return Err(CliError::input(format!(
                "{} factors stored for rank {}",
                self.factors.len(),
                self.rank
            )));
        }
        for f in &self.factors {
            if f.u.len() != self.p || f.v.len() != self.q {
                return Err(CliError::input("factor length does not match p, q"));
            }
        }
        Ok(())
    }

    /// Rebuilds a model sufficient for prediction.
    pub fn to_model(&self) -> CliResult<SeedModel> {
        let coefficient = Matrix::from_rows(&self.coefficient)?;
        let factors: Vec<UnitRankFactor> = self
            .factors
            .iter()
            .map(|f| UnitRankFactor {
                u: Array1::from(f.u.clone()),
                v: Array1::from(f.v.clone()),
                lambda_hat: f.lambda_hat,
                sigma_hat: f.sigma_hat,
            })
            .collect();
        let c: Array2<f64> = coefficient.as_array().clone();
        Ok(SeedModel {
            factors: factors.clone(),
            coefficient,
            rank: self.rank,
            gic_trace: self.gic_trace.clone(),
            steps: self.steps.clone(),
            path: vec![c],
            path_factors: vec![factors],
            stop_level: self.stop_level,
            config: self.config.clone(),
        })
    }
}
