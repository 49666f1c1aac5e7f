//! Corner sweeps, figure-of-merit ranking and PVT / mismatch analysis.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::FittedModels;
use crate::rng::mix;
use crate::sim::{
    calibrate_adc, exhaustive_error, exhaustive_serial, mc_pair, CircuitConfig, Mode, Multiplier,
    MAX_OPERAND,
};

/// MC draws per pair used to rank corners by worst-case σ.
pub const DEFAULT_SWEEP_MC: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec3 {
    pub tau0: Vec<f64>,
    pub v_dac0: Vec<f64>,
    pub v_dac_fs: Vec<f64>,
}

impl Default for GridSpec3 {
    /// 4 × 3 × 4 = 48 corners.
    fn default() -> Self {
        GridSpec3 {
            tau0: vec![0.16e-9, 0.20e-9, 0.24e-9, 0.28e-9],
            v_dac0: vec![0.30, 0.35, 0.40],
            v_dac_fs: vec![0.70, 0.80, 0.90, 1.00],
        }
    }
}

impl GridSpec3 {
    pub fn len(&self) -> usize {
        self.tau0.len() * self.v_dac0.len() * self.v_dac_fs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Corners in `tau0`, `v_dac0`, `v_dac_fs` order, slowest first.
    pub fn corners(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.len());
        for &t in &self.tau0 {
            for &v0 in &self.v_dac0 {
                for &vfs in &self.v_dac_fs {
                    out.push((t, v0, vfs));
                }
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::usage("corner grid has an empty axis"));
        }
        for (name, ax) in [
            ("tau0", &self.tau0),
            ("v_dac0", &self.v_dac0),
            ("v_dac_fs", &self.v_dac_fs),
        ] {
            if ax.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::usage(format!(
                    "corner axis {name} must be strictly ascending"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerMetrics {
    pub config: CircuitConfig,
    /// Mean absolute error over the 256 pairs, nominal mode (LSB).
    pub eps_mul: f64,
    /// Mean multiplication energy, nominal mode (J).
    pub e_mul: f64,
    /// Mean energy including the word write (J).
    pub e_op: f64,
    /// `1 / (eps_mul · e_mul)`; infinite when `eps_mul = 0`.
    #[serde(with = "inf_as_null")]
    pub fom: f64,
    /// Largest empirical standard deviation of the combined discharge over
    /// the 256 pairs (V).
    pub sigma_max: f64,
}

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

pub fn fom(eps_mul: f64, e_mul: f64) -> f64 {
    if eps_mul > 0.0 {
        1.0 / (eps_mul * e_mul)
    } else {
        f64::INFINITY
    }
}

/// Evaluates one corner.
pub fn evaluate_corner(
    cfg: &CircuitConfig,
    models: &FittedModels,
    n_mc: usize,
) -> Result<CornerMetrics> {
    let cal = calibrate_adc(cfg, models)?;
    let nominal = exhaustive_error(cfg, models, &cal, Mode::Nominal, 0)?;
    let sigma_max = if n_mc >= 2 {
        let mc = exhaustive_error(cfg, models, &cal, Mode::Mc, n_mc)?;
        mc.pairs
            .iter()
            .filter_map(|p| p.mc.map(|m| m.sigma_dv))
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    Ok(CornerMetrics {
        config: *cfg,
        eps_mul: nominal.eps_mul,
        e_mul: nominal.e_mul_avg,
        e_op: nominal.e_op_avg,
        fom: fom(nominal.eps_mul, nominal.e_mul_avg),
        sigma_max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerFailure {
    pub tau0: f64,
    pub v_dac0: f64,
    pub v_dac_fs: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    /// Sorted by descending FOM.
    pub metrics: Vec<CornerMetrics>,
    pub failures: Vec<CornerFailure>,
}

/// Evaluates every corner of `grid` at the model's nominal operating point.
/// Corner `k` (in grid order) is seeded with `mix(seed, k)`. Corners that
/// fail, for instance by leaving the model domain, are reported in
/// `failures`.
pub fn sweep_corners(
    grid: &GridSpec3,
    models: &FittedModels,
    n_mc: usize,
    seed: u64,
) -> Result<Sweep> {
    grid.validate()?;
    let results: Vec<(usize, Result<CornerMetrics>)> = grid
        .corners()
        .into_par_iter()
        .enumerate()
        .map(|(k, (t, v0, vfs))| {
            let mut cfg = CircuitConfig::nominal(t, v0, vfs, &models.discharge);
            cfg.seed = mix(seed, k as u64);
            (k, evaluate_corner(&cfg, models, n_mc))
        })
        .collect();
    let corners = grid.corners();
    let mut metrics = Vec::new();
    let mut failures = Vec::new();
    for (k, r) in results {
        match r {
            Ok(m) => metrics.push(m),
            Err(e) => {
                let (tau0, v_dac0, v_dac_fs) = corners[k];
                failures.push(CornerFailure {
                    tau0,
                    v_dac0,
                    v_dac_fs,
                    reason: e.to_string(),
                });
            }
        }
    }
    metrics.sort_by(|a, b| b.fom.total_cmp(&a.fom).then_with(|| tie_break(a, b)));
    Ok(Sweep { metrics, failures })
}

fn tie_break(a: &CornerMetrics, b: &CornerMetrics) -> std::cmp::Ordering {
    a.e_mul
        .total_cmp(&b.e_mul)
        .then(a.config.tau0.total_cmp(&b.config.tau0))
        .then(a.config.v_dac_fs.total_cmp(&b.config.v_dac_fs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub fom: CornerMetrics,
    pub power: CornerMetrics,
    pub variation: CornerMetrics,
}

impl Selection {
    pub fn named(&self) -> [(&'static str, &CornerMetrics); 3] {
        [
            ("fom", &self.fom),
            ("power", &self.power),
            ("variation", &self.variation),
        ]
    }

    pub fn get(&self, name: &str) -> Option<&CornerMetrics> {
        self.named()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, m)| m)
    }
}

/// Picks the corner with the largest FOM, the smallest energy and the
/// smallest worst-case σ. Ties go to the smaller energy, then the smaller
/// `tau0`, then the smaller `v_dac_fs`.
pub fn select_corners(metrics: &[CornerMetrics]) -> Result<Selection> {
    if metrics.is_empty() {
        return Err(Error::usage("no corner metrics to select from"));
    }
    let best = |key: &dyn Fn(&CornerMetrics, &CornerMetrics) -> std::cmp::Ordering| {
        metrics
            .iter()
            .min_by(|a, b| key(a, b).then_with(|| tie_break(a, b)))
            .cloned()
            .unwrap()
    };
    Ok(Selection {
        fom: best(&|a, b| b.fom.total_cmp(&a.fom)),
        power: best(&|a, b| a.e_mul.total_cmp(&b.e_mul)),
        variation: best(&|a, b| a.sigma_max.total_cmp(&b.sigma_max)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PvtAxis {
    VDd,
    Temp,
}

impl PvtAxis {
    pub fn name(self) -> &'static str {
        match self {
            PvtAxis::VDd => "v_dd",
            PvtAxis::Temp => "temp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvtPoint {
    pub value: f64,
    /// `None` when the point failed; see `error`.
    pub eps_mul: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvtSweepResult {
    pub axis: PvtAxis,
    pub corner: CircuitConfig,
    pub points: Vec<PvtPoint>,
}

impl PvtSweepResult {
    /// Largest minus smallest ε over the successful points.
    pub fn spread(&self) -> f64 {
        let e: Vec<f64> = self.points.iter().filter_map(|p| p.eps_mul).collect();
        let hi = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
        if e.is_empty() {
            0.0
        } else {
            hi - lo
        }
    }

    pub fn eps_at(&self, value: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|p| (p.value - value).abs() <= 1e-9 * value.abs().max(1.0))
            .and_then(|p| p.eps_mul)
    }
}

/// Default supply axis: seven points from 1.08 V to 1.32 V.
pub fn default_v_dd_axis() -> Vec<f64> {
    (0..7)
        .map(|i| ((1.08 + 0.04 * i as f64) * 1e6).round() / 1e6)
        .collect()
}

pub fn default_temp_axis() -> Vec<f64> {
    vec![253.0, 273.0, 300.0, 328.0, 358.0]
}

/// ε of `corner` along the supply axis (at nominal temperature) and the
/// temperature axis (at nominal supply). The ADC keeps its nominal
/// calibration throughout.
pub fn pvt_sweep(
    corner: &CircuitConfig,
    v_dd_axis: &[f64],
    temp_axis: &[f64],
    models: &FittedModels,
) -> Result<(PvtSweepResult, PvtSweepResult)> {
    let m = &models.discharge;
    let cal = calibrate_adc(corner, models)?;
    let eval = |cfg: CircuitConfig| -> Result<f64> {
        let mul = Multiplier::new(cfg, models, cal)?;
        Ok(exhaustive_serial(&mul)?.eps_mul)
    };
    let run = |axis: PvtAxis, values: &[f64]| -> PvtSweepResult {
        let points = values
            .par_iter()
            .map(|&v| {
                let cfg = match axis {
                    PvtAxis::VDd => corner.at(v, m.t_nom),
                    PvtAxis::Temp => corner.at(m.v_dd_nom, v),
                };
                match eval(cfg) {
                    Ok(e) => PvtPoint {
                        value: v,
                        eps_mul: Some(e),
                        error: None,
                    },
                    Err(e) => PvtPoint {
                        value: v,
                        eps_mul: None,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect();
        PvtSweepResult {
            axis,
            corner: *corner,
            points,
        }
    };
    Ok((run(PvtAxis::VDd, v_dd_axis), run(PvtAxis::Temp, temp_axis)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McPair {
    pub a: u8,
    pub b: u8,
    pub mean_code: f64,
    pub sigma_code: f64,
    /// Empirical σ of the combined discharge (V).
    pub sigma_analog: f64,
    /// σ of the combined discharge predicted by the σ model (V).
    pub sigma_model: f64,
}

/// `n` mismatch draws of every pair at `corner` (nominal calibration).
pub fn mismatch_mc(
    corner: &CircuitConfig,
    n: usize,
    seed: u64,
    models: &FittedModels,
) -> Result<Vec<McPair>> {
    if n < 2 {
        return Err(Error::usage("mismatch MC needs at least 2 draws"));
    }
    let cal = calibrate_adc(corner, models)?;
    let mul = Multiplier::new(*corner, models, cal)?;
    (0..256usize)
        .into_par_iter()
        .map(|k| {
            let (a, b) = ((k / 16) as u8, (k % 16) as u8);
            let s = mc_pair(&mul, a, b, n, seed)?;
            Ok(McPair {
                a,
                b,
                mean_code: s.mean_code,
                sigma_code: s.sigma_code,
                sigma_analog: s.sigma_dv,
                sigma_model: mul.model_sigma_comb(a, b)?,
            })
        })
        .collect()
}

/// The pair with the largest nominal combined discharge.
pub fn max_discharge_pair() -> (u8, u8) {
    (MAX_OPERAND, MAX_OPERAND)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metric(tau0: f64, v0: f64, vfs: f64, eps: f64, e: f64, sigma: f64) -> CornerMetrics {
        CornerMetrics {
            config: CircuitConfig {
                tau0,
                v_dac0: v0,
                v_dac_fs: vfs,
                v_dd: 1.2,
                temp: 300.0,
                adc_bits: 8,
                seed: 0,
            },
            eps_mul: eps,
            e_mul: e,
            e_op: e,
            fom: fom(eps, e),
            sigma_max: sigma,
        }
    }

    #[test]
    fn fom_arithmetic() {
        let f = fom(4.78, 44e-15);
        assert!((f - 4.7546e12).abs() / 4.7546e12 < 1e-4);
        assert!(fom(0.0, 1e-15).is_infinite());
    }

    #[test]
    fn identical_metrics_select_one_corner() {
        let m = vec![
            metric(0.2e-9, 0.3, 0.8, 3.0, 50e-15, 1e-3),
            metric(0.16e-9, 0.3, 0.9, 3.0, 50e-15, 1e-3),
            metric(0.16e-9, 0.3, 0.8, 3.0, 50e-15, 1e-3),
        ];
        let s = select_corners(&m).unwrap();
        for (_, c) in s.named() {
            assert_eq!(c, &m[2]);
        }
    }

    #[test]
    fn dominating_corner_wins_everything() {
        let m = vec![
            metric(0.2e-9, 0.3, 0.8, 5.0, 60e-15, 2e-3),
            metric(0.24e-9, 0.35, 0.9, 2.0, 40e-15, 1e-3),
            metric(0.16e-9, 0.4, 1.0, 6.0, 70e-15, 3e-3),
        ];
        let s = select_corners(&m).unwrap();
        for (_, c) in s.named() {
            assert_eq!(c, &m[1]);
        }
        assert!(select_corners(&[]).unwrap_err().is_usage());
    }

    #[test]
    fn infinite_fom_round_trips_through_json() {
        let m = metric(0.2e-9, 0.3, 0.8, 0.0, 60e-15, 2e-3);
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"fom\":null"));
        let back: CornerMetrics = serde_json::from_str(&s).unwrap();
        assert!(back.fom.is_infinite());
    }

    #[test]
    fn default_axes() {
        assert_eq!(GridSpec3::default().len(), 48);
        let v = default_v_dd_axis();
        assert_eq!(v.len(), 7);
        assert_eq!(v[0], 1.08);
        assert_eq!(v[3], 1.2);
        assert_eq!(v[6], 1.32);
    }
}
