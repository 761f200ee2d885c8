use std::path::PathBuf;

use seed_core::netinfer::VarSim;
use seed_core::simgen::SimSpec;
use seed_core::{SeedConfig, SparsityRule, ThresholdScale, Variant};
use serde::Deserialize;

use crate::args::{Common, FormatArg, ModelFlags, NetworkSimFlags, ScaleArg, SimFlags, VariantArg};
use crate::error::{CliError, CliResult};

pub const OUTPUT_DIR_ENV: &str = "SEED_OUTPUT_DIR";

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkOptions {
    pub lags: usize,
    pub standardize: bool,
    pub edge_threshold: Option<f64>,
}

impl Default for NetworkOptions {
    fn default() -> Self {
        NetworkOptions {
            lags: 1,
            standardize: false,
            edge_threshold: None,
        }
    }
}

/// Everything a command may read from `--config`.
#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sim: SimSpec,
    pub model: SeedConfig,
    pub network: NetworkOptions,
    pub network_sim: VarSim,
    pub reps: usize,
    pub jobs: Option<usize>,
    pub baseline: bool,
    pub format: FormatArg,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            sim: SimSpec::default(),
            model: SeedConfig::default(),
            network: NetworkOptions::default(),
            network_sim: VarSim::default(),
            reps: 20,
            jobs: None,
            baseline: false,
            format: FormatArg::JsonLines,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn load(common: &Common) -> CliResult<Self> {
        match &common.config {
            None => Ok(RunConfig::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
            }
        }
    }

    /// `--out`, then the config file, then the environment, then `.`.
    pub fn output_dir(&self, common: &Common) -> PathBuf {
        common
            .out
            .clone()
            .or_else(|| self.output_dir.clone())
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn apply_sim(&mut self, f: &SimFlags) {
        let s = &mut self.sim;
        set(&mut s.n, f.n);
        set(&mut s.p, f.p);
        set(&mut s.q, f.q);
        set(&mut s.r, f.rank);
        set(&mut s.rho_x, f.rho_x);
        set(&mut s.rho_e, f.rho_e);
        set(&mut s.gamma, f.gamma);
        set(&mut s.density, f.density);
        set(&mut s.seed, f.seed);
        if let Some(sv) = &f.singular_values {
            s.singular_values = Some(sv.clone());
        }
        if f.orthogonalize {
            s.orthogonalize = true;
        }
    }

    pub fn apply_network_sim(&mut self, f: &NetworkSimFlags, sim: &SimFlags) {
        let v = &mut self.network_sim;
        set(&mut v.nodes, f.nodes);
        set(&mut v.lags, f.lags);
        set(&mut v.steps, f.steps);
        set(&mut v.drivers, f.drivers);
        set(&mut v.gain, f.gain);
        set(&mut v.noise_sd, f.noise_sd);
        set(&mut v.rank, sim.rank);
        set(&mut v.seed, sim.seed);
    }

    pub fn apply_model(&mut self, f: &ModelFlags) {
        let m = &mut self.model;
        if let Some(v) = f.variant {
            m.variant = match v {
                VariantArg::Ridge => Variant::Ridge,
                VariantArg::Fast => Variant::Fast,
            };
        }
        if f.rho.is_some() {
            m.rho = f.rho;
        }
        if let Some(s) = f.cardinality {
            m.u_rule = Some(SparsityRule::Cardinality(s));
        }
        if let Some(theta) = f.u_threshold {
            let scale = match f.threshold_scale {
                None | Some(ScaleArg::MaxAbs) => ThresholdScale::MaxAbs,
                Some(ScaleArg::Rms) => ThresholdScale::Rms,
                Some(ScaleArg::Absolute) => ThresholdScale::Absolute,
            };
            m.u_rule = Some(SparsityRule::Threshold { theta, scale });
        }
        if f.v_threshold.is_some() {
            m.v_threshold = f.v_threshold;
        }
        set(&mut m.mu, f.mu);
        if f.mu_absolute {
            m.mu_absolute = true;
        }
        if f.rank_max.is_some() {
            m.r_max = f.rank_max;
        }
        if f.no_refit {
            m.refit = false;
        }
        if f.no_select_rank {
            m.select_rank = false;
        }
        set(&mut m.solver.max_iters, f.max_iters);
        set(&mut m.solver.tol, f.tol);
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_keeps_defaults() {
        let c: RunConfig =
            serde_json::from_str(r#"{"sim": {"n": 40}, "model": {"mu": 0.01}, "reps": 3}"#).unwrap();
        assert_eq!(c.sim.n, 40);
        assert_eq!(c.sim.q, SimSpec::default().q);
        assert_eq!(c.model.mu, 0.01);
        assert!(c.model.refit);
        assert_eq!(c.reps, 3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"repz": 3}"#).is_err());
    }

    #[test]
    fn sparsity_rule_in_config() {
        let c: RunConfig = serde_json::from_str(
            r#"{"model": {"u_rule": {"threshold": {"theta": 0.5, "scale": "rms"}}}}"#,
        )
        .unwrap();
        assert_eq!(
            c.model.u_rule,
            Some(SparsityRule::Threshold {
                theta: 0.5,
                scale: ThresholdScale::Rms
            })
        );
    }
}
