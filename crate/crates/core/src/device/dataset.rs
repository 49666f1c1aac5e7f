use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    integrate_unchecked, DeviceParams, MismatchDraw, ReadPath, DEFAULT_STEPS, TEMP_MAX, TEMP_MIN,
};
use crate::error::{check_range, Error, Result};
use crate::rng::{derived, mix};

/// CSV header of a dataset file.
pub const DATASET_HEADER: [&str; 8] = [
    "t_s",
    "v_wl_v",
    "v_dd_v",
    "t_k",
    "dv_v",
    "sigma_dv_v",
    "e_wr_j",
    "e_dc_j",
];

/// Grid points at which the oracle is sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Sample times (s), ascending and positive.
    pub times: Vec<f64>,
    pub v_wl: Vec<f64>,
    pub v_dd: Vec<f64>,
    pub temp: Vec<f64>,
    /// Which (V_DD, T) points carry a mismatch standard deviation.
    #[serde(default)]
    pub mc_scope: McScope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McScope {
    /// Only the nominal supply and temperature.
    #[default]
    Nominal,
    /// Every (V_DD, T) point.
    All,
}

fn axis(start: f64, step: f64, n: usize) -> Vec<f64> {
    // Snapped to a millionth of the step so printed values stay short.
    (0..n)
        .map(|i| {
            let v = start + step * i as f64;
            (v / step * 1e6).round() * step / 1e6
        })
        .collect()
}

fn midpoints(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

impl Default for GridSpec {
    /// 128 times from 0.02 ns to 2.56 ns, V_WL from 0.3 V to 1.2 V in
    /// 50 mV steps, five supplies around 1.2 V and three temperatures.
    fn default() -> Self {
        GridSpec {
            times: axis(0.02e-9, 0.02e-9, 128),
            v_wl: axis(0.3, 0.05, 19),
            v_dd: vec![1.08, 1.14, 1.20, 1.26, 1.32],
            temp: vec![253.0, 300.0, 358.0],
            mc_scope: McScope::Nominal,
        }
    }
}

impl GridSpec {
    /// A single-point grid.
    pub fn point(t: f64, v_wl: f64, v_dd: f64, temp: f64) -> Self {
        GridSpec {
            times: vec![t],
            v_wl: vec![v_wl],
            v_dd: vec![v_dd],
            temp: vec![temp],
            mc_scope: McScope::All,
        }
    }

    /// Grid shifted by half a step on every axis, plus the nominal supply
    /// and temperature so every sub-model has holdout rows.
    pub fn holdout(&self, v_dd_nom: f64, t_nom: f64) -> Self {
        let with_nominal = |v: &[f64], nom: f64| {
            let mut m = midpoints(v);
            if !m.iter().any(|x| (x - nom).abs() < 1e-12) {
                m.push(nom);
                m.sort_by(|a, b| a.total_cmp(b));
            }
            m
        };
        GridSpec {
            times: midpoints(&self.times),
            v_wl: midpoints(&self.v_wl),
            v_dd: with_nominal(&self.v_dd, v_dd_nom),
            temp: with_nominal(&self.temp, t_nom),
            mc_scope: self.mc_scope,
        }
    }

    /// Number of grid points, including those skipped because V_WL > V_DD.
    pub fn len(&self) -> usize {
        self.times.len() * self.v_wl.len() * self.v_dd.len() * self.temp.len()
    }

    /// Number of rows `generate_dataset` produces: points whose word-line
    /// voltage exceeds the supply are not physical and are skipped.
    pub fn feasible_len(&self) -> usize {
        let per_t: usize = self
            .v_dd
            .iter()
            .map(|&vdd| self.v_wl.iter().filter(|&&w| feasible(w, vdd)).count())
            .sum();
        self.times.len() * per_t * self.temp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self, p: &DeviceParams) -> Result<()> {
        if self.is_empty() {
            return Err(Error::usage("dataset grid has an empty axis"));
        }
        for (name, ax) in [
            ("times", &self.times),
            ("v_wl", &self.v_wl),
            ("v_dd", &self.v_dd),
            ("temp", &self.temp),
        ] {
            if ax.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::usage(format!(
                    "grid axis {name} must be strictly ascending"
                )));
            }
        }
        check_range("t", self.times[0], f64::MIN_POSITIVE, f64::MAX)?;
        check_range("v_dd", self.v_dd[0], 0.0, 2.0 * p.v_dd_nom)?;
        check_range("v_dd", *self.v_dd.last().unwrap(), 0.0, 2.0 * p.v_dd_nom)?;
        let v_dd_max = *self.v_dd.last().unwrap();
        check_range("v_wl", self.v_wl[0], 0.0, v_dd_max)?;
        check_range("v_wl", *self.v_wl.last().unwrap(), 0.0, v_dd_max)?;
        check_range("temp", self.temp[0], TEMP_MIN, TEMP_MAX)?;
        check_range("temp", *self.temp.last().unwrap(), TEMP_MIN, TEMP_MAX)
    }

    fn wants_mc(&self, v_dd: f64, temp: f64, p: &DeviceParams) -> bool {
        match self.mc_scope {
            McScope::All => true,
            McScope::Nominal => (v_dd - p.v_dd_nom).abs() < 1e-12 && (temp - p.t_nom).abs() < 1e-12,
        }
    }
}

fn feasible(v_wl: f64, v_dd: f64) -> bool {
    v_wl <= v_dd + 1e-12
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub t: f64,
    pub v_wl: f64,
    pub v_dd: f64,
    pub temp: f64,
    /// Nominal discharge V_DD − V_BLB(t).
    pub dv: f64,
    /// Sample standard deviation of the discharge under mismatch.
    pub sigma_dv: Option<f64>,
    pub e_wr: f64,
    pub e_dc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleDataset {
    pub rows: Vec<OracleRow>,
    pub grid: GridSpec,
    pub seed: u64,
    pub mc_samples: usize,
    pub params: DeviceParams,
}

impl OracleDataset {
    pub fn has_sigma(&self) -> bool {
        self.rows.iter().any(|r| r.sigma_dv.is_some())
    }
}

/// Write energy and discharge energy of one access.
pub fn oracle_energies(
    delta_v: f64,
    v_dd: f64,
    temp: f64,
    params: &DeviceParams,
) -> Result<(f64, f64)> {
    check_range("v_dd", v_dd, 0.0, 2.0 * params.v_dd_nom)?;
    check_range("delta_v", delta_v, 0.0, v_dd)?;
    check_range("temp", temp, TEMP_MIN, TEMP_MAX)?;
    let f = params.energy_temp_factor(temp);
    Ok((
        params.c_bl * v_dd * v_dd * f,
        params.c_bl * v_dd * delta_v * f,
    ))
}

/// Discharge at every grid time, plus its mismatch σ where sampled.
type TraceSamples = (Vec<f64>, Option<Vec<f64>>);

/// Samples the oracle on every grid point.
///
/// Rows are ordered by temperature, supply, word-line voltage and time,
/// slowest first. Points with V_WL above V_DD are skipped. Where
/// `mc_samples > 1` and the grid's MC scope covers the (V_DD, T) point,
/// the discharge is also simulated under `mc_samples` mismatch draws and
/// its sample standard deviation recorded. Draw `j` of
/// trace `i` is seeded with `mix(mix(seed, i), j)`, so the result does not
/// depend on scheduling.
pub fn generate_dataset(
    grid: &GridSpec,
    params: &DeviceParams,
    mc_samples: usize,
    seed: u64,
) -> Result<OracleDataset> {
    params.validate()?;
    grid.validate(params)?;
    let t_max = *grid.times.last().unwrap();
    let h = t_max / DEFAULT_STEPS as f64;

    let mut traces = Vec::new();
    for &temp in &grid.temp {
        for &v_dd in &grid.v_dd {
            for &v_wl in grid.v_wl.iter().filter(|&&w| feasible(w, v_dd)) {
                traces.push((v_wl, v_dd, temp));
            }
        }
    }

    let per_trace: Vec<Result<TraceSamples>> = traces
        .par_iter()
        .enumerate()
        .map(|(i, &(v_wl, v_dd, temp))| {
            let path = ReadPath::new(params, v_dd, temp, None);
            let v = integrate_unchecked(&path, params.c_bl, v_wl, v_dd, &grid.times, h)?;
            let dv: Vec<f64> = v.iter().map(|x| v_dd - x).collect();
            let sigma = if mc_samples > 1 && grid.wants_mc(v_dd, temp, params) {
                Some(mc_sigma(
                    params,
                    v_wl,
                    v_dd,
                    temp,
                    &grid.times,
                    h,
                    mc_samples,
                    mix(seed, i as u64),
                )?)
            } else {
                None
            };
            Ok((dv, sigma))
        })
        .collect();

    let mut rows = Vec::with_capacity(grid.feasible_len());
    for ((v_wl, v_dd, temp), res) in traces.into_iter().zip(per_trace) {
        let (dv, sigma) = res?;
        for (j, &t) in grid.times.iter().enumerate() {
            let d = dv[j].clamp(0.0, v_dd);
            let (e_wr, e_dc) = oracle_energies(d, v_dd, temp, params)?;
            rows.push(OracleRow {
                t,
                v_wl,
                v_dd,
                temp,
                dv: d,
                sigma_dv: sigma.as_ref().map(|s| s[j]),
                e_wr,
                e_dc,
            });
        }
    }
    Ok(OracleDataset {
        rows,
        grid: grid.clone(),
        seed,
        mc_samples,
        params: params.clone(),
    })
}

/// Sample standard deviation of V_BLB at each time over `n` mismatch draws.
#[allow(clippy::too_many_arguments)]
fn mc_sigma(
    params: &DeviceParams,
    v_wl: f64,
    v_dd: f64,
    temp: f64,
    times: &[f64],
    h: f64,
    n: usize,
    trace_seed: u64,
) -> Result<Vec<f64>> {
    let runs: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut rng = derived(trace_seed, j as u64);
            let draw = MismatchDraw::sample(params, &mut rng);
            let path = ReadPath::new(params, v_dd, temp, Some(draw));
            integrate_unchecked(&path, params.c_bl, v_wl, v_dd, times, h)
        })
        .collect();
    let mut mean = vec![0.0; times.len()];
    let mut m2 = vec![0.0; times.len()];
    for (k, run) in runs.into_iter().enumerate() {
        let run = run?;
        let kf = (k + 1) as f64;
        for j in 0..times.len() {
            let d = run[j] - mean[j];
            mean[j] += d / kf;
            m2[j] += d * (run[j] - mean[j]);
        }
    }
    Ok(m2
        .into_iter()
        .map(|s| (s / (n - 1) as f64).sqrt())
        .collect())
}
