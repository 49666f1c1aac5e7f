use std::path::Path;

use imc_core::device::{DeviceParams, GridSpec};
use imc_core::dnn::SyntheticTask;
use imc_core::explore::{default_temp_axis, default_v_dd_axis, GridSpec3, DEFAULT_SWEEP_MC};
use imc_core::io::read_json;
use imc_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Every tunable of the pipeline. Built-in defaults are overridden by a
/// config file, which is overridden by command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub device: DeviceParams,
    pub grid: GridSpec,
    /// Mismatch draws per σ grid point in the oracle dataset.
    pub n_mc_fit: usize,
    pub corners: GridSpec3,
    /// Draws per pair when ranking corners by worst-case σ.
    pub n_mc_sweep: usize,
    /// Draws per pair for the final mismatch analysis.
    pub n_mc_final: usize,
    pub v_dd_axis: Vec<f64>,
    pub temp_axis: Vec<f64>,
    pub task: SyntheticTask,
    /// Draws of the MC timing benchmark.
    pub bench_draws: usize,
    /// Corner used by `eval` and `bench` when no corner flags are given.
    pub tau0: f64,
    pub v_dac0: f64,
    pub v_dac_fs: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            device: DeviceParams::default(),
            grid: GridSpec::default(),
            n_mc_fit: 10_000,
            corners: GridSpec3::default(),
            n_mc_sweep: DEFAULT_SWEEP_MC,
            n_mc_final: 10_000,
            v_dd_axis: default_v_dd_axis(),
            temp_axis: default_temp_axis(),
            task: SyntheticTask::default(),
            bench_draws: 1000,
            tau0: 0.16e-9,
            v_dac0: 0.3,
            v_dac_fs: 1.0,
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let cfg: Config = match path {
            Some(p) => read_json(p).map_err(|e| match e {
                Error::Json { path, source } => {
                    Error::usage(format!("config {}: {source}", path.display()))
                }
                e => e,
            })?,
            None => Config::default(),
        };
        cfg.device.validate()?;
        Ok(cfg)
    }
}
