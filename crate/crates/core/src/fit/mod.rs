//! Polynomial discharge, mismatch and energy models and their extraction
//! from oracle data.
//!
//! The bit-line voltage model is
//!
//! ```text
//! V_BL = V_DD + p4(V_WL − V_th) · p2(t) · s(V_DD − V_DD,nom) + t · (T − T_nom) · p3(V_WL)
//! σ    = p3(t) · p3(V_WL)
//! E_wr = p2(V_DD) · p1(T)
//! E_dc = p1(V_DD) · p3(ΔV_BL) · p1(T)
//! ```
//!
//! with `p2(t)` free of a constant term and `s` pinned to `1 + …`.

pub mod als;
pub mod poly;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::device::{DeviceParams, GridSpec, OracleDataset, OracleRow};
use crate::error::{Error, Result};
use als::{fit_product, lstsq, Basis, Factor, Orientation};
pub use poly::PolyCoeffs;

/// Version of the model file layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Relative tolerance for matching axis values and domain bounds.
const AXIS_TOL: f64 = 1e-9;

/// Rows with `|t·(T − T_nom)|` below this (s·K) are left out of the
/// temperature fit.
const MIN_TEMP_WEIGHT: f64 = 1e-20;

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= AXIS_TOL * a.abs().max(b.abs())
}

/// Inclusive ranges of the fitted inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub t: [f64; 2],
    pub v_wl: [f64; 2],
    pub v_dd: [f64; 2],
    pub temp: [f64; 2],
}

fn span(v: &[f64]) -> [f64; 2] {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    [lo, hi]
}

fn within(param: &'static str, x: f64, r: [f64; 2]) -> Result<()> {
    let slack = AXIS_TOL * (r[1] - r[0]).abs().max(r[1].abs()).max(1e-30);
    if x.is_finite() && x >= r[0] - slack && x <= r[1] + slack {
        Ok(())
    } else {
        Err(Error::Domain {
            param,
            value: x,
            min: r[0],
            max: r[1],
        })
    }
}

impl Domain {
    pub fn of_grid(grid: &GridSpec) -> Self {
        Domain {
            t: span(&grid.times),
            v_wl: span(&grid.v_wl),
            v_dd: span(&grid.v_dd),
            temp: span(&grid.temp),
        }
    }

    /// Accepts `0 ≤ t ≤ t_max` and `V_WL ≤ V_DD`; below the first fitted time the pinned
    /// zero of the time factor anchors the model.
    pub fn check(&self, t: f64, v_wl: f64, v_dd: f64, temp: f64) -> Result<()> {
        within("t", t, [0.0, self.t[1]])?;
        within("v_wl", v_wl, self.v_wl)?;
        within("v_dd", v_dd, self.v_dd)?;
        within("v_wl", v_wl, [self.v_wl[0], v_dd])?;
        within("temp", temp, self.temp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DischargeModel {
    pub base_vod: PolyCoeffs,
    pub base_time: PolyCoeffs,
    pub supply: PolyCoeffs,
    pub temp_vwl: PolyCoeffs,
    pub sigma_time: PolyCoeffs,
    pub sigma_vwl: PolyCoeffs,
    pub v_th: f64,
    pub v_dd_nom: f64,
    pub t_nom: f64,
    pub domain: Domain,
}

impl DischargeModel {
    /// Nominal discharge term `p4(V_WL − V_th) · p2(t)` (negative-going).
    pub fn base(&self, t: f64, v_wl: f64) -> f64 {
        self.base_vod.eval(v_wl - self.v_th) * self.base_time.eval(t)
    }

    /// Bit-line voltage without domain checks.
    pub fn vbl_unchecked(&self, t: f64, v_wl: f64, v_dd: f64, temp: f64) -> f64 {
        v_dd + self.base(t, v_wl) * self.supply.eval(v_dd - self.v_dd_nom)
            + t * (temp - self.t_nom) * self.temp_vwl.eval(v_wl)
    }

    pub fn eval_vbl(&self, t: f64, v_wl: f64, v_dd: f64, temp: f64) -> Result<f64> {
        self.domain.check(t, v_wl, v_dd, temp)?;
        Ok(self.vbl_unchecked(t, v_wl, v_dd, temp))
    }

    /// Mismatch standard deviation of the discharge, clamped at zero.
    pub fn sigma(&self, t: f64, v_wl: f64) -> f64 {
        (self.sigma_time.eval(t) * self.sigma_vwl.eval(v_wl)).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub wr_vdd: PolyCoeffs,
    pub wr_temp: PolyCoeffs,
    pub dc_vdd: PolyCoeffs,
    pub dc_dv: PolyCoeffs,
    pub dc_temp: PolyCoeffs,
}

impl EnergyModel {
    /// Write energy of one cell (J), clamped at zero.
    pub fn e_wr(&self, v_dd: f64, temp: f64) -> f64 {
        (self.wr_vdd.eval(v_dd) * self.wr_temp.eval(temp)).max(0.0)
    }

    /// Energy of one bit-line discharge by `dv` (J), clamped at zero.
    pub fn e_dc(&self, dv: f64, v_dd: f64, temp: f64) -> f64 {
        (self.dc_vdd.eval(v_dd) * self.dc_dv.eval(dv) * self.dc_temp.eval(temp)).max(0.0)
    }
}

/// Everything the multiplier simulation needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModels {
    pub discharge: DischargeModel,
    pub energy: EnergyModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsEntry {
    pub rms: f64,
    pub max_abs: f64,
    /// "mV" or "fJ".
    pub unit: String,
    pub rows: usize,
}

impl RmsEntry {
    fn from_residuals(res: &[f64], scale: f64, unit: &str) -> Self {
        let n = res.len();
        let ss: f64 = res.iter().map(|r| r * r).sum();
        let rms = if n == 0 {
            0.0
        } else {
            (ss / n as f64).sqrt() * scale
        };
        let max_abs = res.iter().fold(0.0_f64, |m, r| m.max(r.abs())) * scale;
        RmsEntry {
            rms,
            max_abs,
            unit: unit.to_string(),
            rows: n,
        }
    }
}

/// Model names used as keys in a [`FitReport`].
pub const MODEL_NAMES: [&str; 6] = [
    "base",
    "supply",
    "temperature",
    "sigma",
    "write_energy",
    "discharge_energy",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub entries: BTreeMap<String, RmsEntry>,
    pub domain: Domain,
    /// ALS sweeps per product fit (absent for linear fits).
    pub iterations: BTreeMap<String, usize>,
}

impl FitReport {
    pub fn get(&self, model: &str) -> Option<&RmsEntry> {
        self.entries.get(model)
    }
}

/// Versioned on-disk form of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub models: FittedModels,
    pub training: FitReport,
    pub holdout: Option<FitReport>,
    pub oracle_seed: u64,
    pub params: DeviceParams,
}

fn distinct(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = Vec::new();
    for x in values {
        if !v.iter().any(|y| same(*y, x)) {
            v.push(x);
        }
    }
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

fn nominal_v_dd(r: &OracleRow, p: &DeviceParams) -> bool {
    same(r.v_dd, p.v_dd_nom)
}

fn nominal_temp(r: &OracleRow, p: &DeviceParams) -> bool {
    same(r.temp, p.t_nom)
}

fn require_distinct(what: &str, values: &[f64], needed: usize) -> Result<()> {
    if values.len() < needed {
        Err(Error::fit(format!(
            "{what} needs at least {needed} distinct values, found {}",
            values.len()
        )))
    } else {
        Ok(())
    }
}

/// `p4(V_od) · p2(t)` factors of the nominal discharge.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseFit {
    pub base_vod: PolyCoeffs,
    pub base_time: PolyCoeffs,
    pub v_th: f64,
    pub iterations: usize,
    pub objective: Vec<f64>,
}

impl BaseFit {
    pub fn eval(&self, t: f64, v_wl: f64) -> f64 {
        self.base_vod.eval(v_wl - self.v_th) * self.base_time.eval(t)
    }
}

/// Fits `V_BL − V_DD ≈ p4(V_WL − V_th) · p2(t)` on the nominal-supply,
/// nominal-temperature rows.
///
/// `p2` has no constant term and is scaled to unit coefficient norm with a
/// non-positive linear coefficient; the scale lives in `p4`.
pub fn fit_discharge_base(data: &OracleDataset) -> Result<BaseFit> {
    let p = &data.params;
    let rows: Vec<&OracleRow> = data
        .rows
        .iter()
        .filter(|r| nominal_v_dd(r, p) && nominal_temp(r, p))
        .collect();
    if rows.is_empty() {
        return Err(Error::usage("no rows at nominal supply and temperature"));
    }
    require_distinct(
        "base fit V_WL axis",
        &distinct(rows.iter().map(|r| r.v_wl)),
        5,
    )?;
    require_distinct("base fit time axis", &distinct(rows.iter().map(|r| r.t)), 2)?;
    let v_th = p.v_th0;
    let vod: Vec<f64> = rows.iter().map(|r| r.v_wl - v_th).collect();
    let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let target: Vec<f64> = rows.iter().map(|r| -r.dv).collect();
    let fit = fit_product(
        &[
            Factor {
                basis: Basis::full(4),
                values: &vod,
            },
            Factor {
                basis: Basis {
                    degree: 2,
                    first: 1,
                },
                values: &t,
            },
        ],
        &target,
        &[
            Orientation::positive_at(0.0),
            Orientation::negative_coefficient(1),
        ],
    )?;
    let mut f = fit.factors.into_iter();
    Ok(BaseFit {
        base_vod: f.next().unwrap(),
        base_time: f.next().unwrap(),
        v_th,
        iterations: fit.iterations,
        objective: fit.objective,
    })
}

/// Supply polynomial and a note when it could not be fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct SupplyFit {
    pub supply: PolyCoeffs,
    pub warning: Option<String>,
}

/// Fits `s(ΔV_DD) = 1 + c1·ΔV_DD + c2·ΔV_DD²` on the nominal-temperature
/// rows by linear least squares on `V_BL − V_DD − base = base·(c1·x + c2·x²)`.
pub fn fit_supply(data: &OracleDataset, base: &BaseFit) -> Result<SupplyFit> {
    let p = &data.params;
    let rows: Vec<&OracleRow> = data.rows.iter().filter(|r| nominal_temp(r, p)).collect();
    if rows.is_empty() {
        return Err(Error::usage("no rows at nominal temperature"));
    }
    let off: Vec<f64> = distinct(rows.iter().map(|r| r.v_dd))
        .into_iter()
        .filter(|v| !same(*v, p.v_dd_nom))
        .collect();
    if off.is_empty() {
        return Ok(SupplyFit {
            supply: PolyCoeffs::new(vec![1.0, 0.0, 0.0])?,
            warning: Some("data holds only the nominal supply; supply polynomial set to 1".into()),
        });
    }
    require_distinct("supply fit off-nominal V_DD axis", &off, 2)?;
    let a = DMatrix::from_fn(rows.len(), 2, |i, j| {
        let r = rows[i];
        let x = r.v_dd - p.v_dd_nom;
        base.eval(r.t, r.v_wl) * x.powi(j as i32 + 1)
    });
    let y = DVector::from_iterator(
        rows.len(),
        rows.iter().map(|r| -r.dv - base.eval(r.t, r.v_wl)),
    );
    let c = lstsq(&a, &y)?;
    Ok(SupplyFit {
        supply: PolyCoeffs::new(vec![1.0, c[0], c[1]])?,
        warning: None,
    })
}

/// Fits the additive temperature term `t · (T − T_nom) · p3(V_WL)` by
/// linear least squares on the residual of the supply-extended model.
pub fn fit_temperature(
    data: &OracleDataset,
    base: &BaseFit,
    supply: &PolyCoeffs,
) -> Result<PolyCoeffs> {
    let p = &data.params;
    let rows: Vec<&OracleRow> = data
        .rows
        .iter()
        .filter(|r| !nominal_temp(r, p) && (r.t * (r.temp - p.t_nom)).abs() >= MIN_TEMP_WEIGHT)
        .collect();
    require_distinct(
        "temperature fit off-nominal T axis",
        &distinct(rows.iter().map(|r| r.temp)),
        2,
    )?;
    require_distinct(
        "temperature fit V_WL axis",
        &distinct(rows.iter().map(|r| r.v_wl)),
        4,
    )?;
    let a = DMatrix::from_fn(rows.len(), 4, |i, j| {
        let r = rows[i];
        r.t * (r.temp - p.t_nom) * r.v_wl.powi(j as i32)
    });
    let y = DVector::from_iterator(
        rows.len(),
        rows.iter()
            .map(|r| -r.dv - base.eval(r.t, r.v_wl) * supply.eval(r.v_dd - p.v_dd_nom)),
    );
    let c = lstsq(&a, &y)?;
    PolyCoeffs::new(c.iter().copied().collect())
}

/// `p3(t) · p3(V_WL)` factors of the mismatch standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaFit {
    pub sigma_time: PolyCoeffs,
    pub sigma_vwl: PolyCoeffs,
    pub iterations: usize,
}

/// Fits `σ ≈ p3(t) · p3(V_WL)` on every row carrying a standard deviation.
/// The time factor has unit coefficient norm and is non-negative at the
/// largest time.
pub fn fit_mismatch_sigma(data: &OracleDataset) -> Result<SigmaFit> {
    let rows: Vec<(&OracleRow, f64)> = data
        .rows
        .iter()
        .filter_map(|r| r.sigma_dv.map(|s| (r, s)))
        .collect();
    if rows.is_empty() {
        return Err(Error::usage("dataset has no sigma_dv column values"));
    }
    let ts = distinct(rows.iter().map(|(r, _)| r.t));
    require_distinct("sigma fit time axis", &ts, 4)?;
    require_distinct(
        "sigma fit V_WL axis",
        &distinct(rows.iter().map(|(r, _)| r.v_wl)),
        4,
    )?;
    let v_wl: Vec<f64> = rows.iter().map(|(r, _)| r.v_wl).collect();
    let t: Vec<f64> = rows.iter().map(|(r, _)| r.t).collect();
    let target: Vec<f64> = rows.iter().map(|(_, s)| *s).collect();
    let fit = fit_product(
        &[
            Factor {
                basis: Basis::full(3),
                values: &v_wl,
            },
            Factor {
                basis: Basis::full(3),
                values: &t,
            },
        ],
        &target,
        &[
            Orientation::positive_at(0.0),
            Orientation::positive_at(*ts.last().unwrap()),
        ],
    )?;
    let mut f = fit.factors.into_iter();
    let sigma_vwl = f.next().unwrap();
    let sigma_time = f.next().unwrap();
    Ok(SigmaFit {
        sigma_time,
        sigma_vwl,
        iterations: fit.iterations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyFit {
    pub model: EnergyModel,
    pub wr_iterations: usize,
    pub dc_iterations: usize,
}

/// Fits the write energy as `p2(V_DD) · p1(T)` and the discharge energy as
/// `p1(V_DD) · p3(ΔV_BL) · p1(T)`. The supply factor carries the scale; the
/// other factors have unit coefficient norm and are non-negative at the
/// nominal temperature and the largest discharge.
pub fn fit_energy(data: &OracleDataset) -> Result<EnergyFit> {
    let p = &data.params;
    let rows = &data.rows;
    if rows.is_empty() {
        return Err(Error::usage("empty dataset"));
    }
    let v_dd: Vec<f64> = rows.iter().map(|r| r.v_dd).collect();
    let temp: Vec<f64> = rows.iter().map(|r| r.temp).collect();
    let dv: Vec<f64> = rows.iter().map(|r| r.dv).collect();
    require_distinct("write energy V_DD axis", &distinct(v_dd.iter().copied()), 3)?;
    require_distinct("energy T axis", &distinct(temp.iter().copied()), 2)?;
    require_distinct("discharge energy ΔV axis", &distinct(dv.iter().copied()), 4)?;
    let e_wr: Vec<f64> = rows.iter().map(|r| r.e_wr).collect();
    let e_dc: Vec<f64> = rows.iter().map(|r| r.e_dc).collect();
    let dv_max = dv.iter().copied().fold(0.0, f64::max);

    let wr = fit_product(
        &[
            Factor {
                basis: Basis::full(2),
                values: &v_dd,
            },
            Factor {
                basis: Basis::full(1),
                values: &temp,
            },
        ],
        &e_wr,
        &[
            Orientation::positive_at(0.0),
            Orientation::positive_at(p.t_nom),
        ],
    )?;
    let dc = fit_product(
        &[
            Factor {
                basis: Basis::full(1),
                values: &v_dd,
            },
            Factor {
                basis: Basis::full(3),
                values: &dv,
            },
            Factor {
                basis: Basis::full(1),
                values: &temp,
            },
        ],
        &e_dc,
        &[
            Orientation::positive_at(0.0),
            Orientation::positive_at(dv_max),
            Orientation::positive_at(p.t_nom),
        ],
    )?;
    let mut w = wr.factors.into_iter();
    let mut d = dc.factors.into_iter();
    Ok(EnergyFit {
        model: EnergyModel {
            wr_vdd: w.next().unwrap(),
            wr_temp: w.next().unwrap(),
            dc_vdd: d.next().unwrap(),
            dc_dv: d.next().unwrap(),
            dc_temp: d.next().unwrap(),
        },
        wr_iterations: wr.iterations,
        dc_iterations: dc.iterations,
    })
}

/// Runs every fit on `data`. The σ factors are zero when the data carries
/// no standard deviations.
pub fn fit_all(data: &OracleDataset) -> Result<(FittedModels, FitReport)> {
    let base = fit_discharge_base(data)?;
    let supply = fit_supply(data, &base)?;
    let temp_vwl = fit_temperature(data, &base, &supply.supply)?;
    let sigma = if data.has_sigma() {
        Some(fit_mismatch_sigma(data)?)
    } else {
        None
    };
    let energy = fit_energy(data)?;
    let p = &data.params;
    let discharge = DischargeModel {
        base_vod: base.base_vod.clone(),
        base_time: base.base_time.clone(),
        supply: supply.supply,
        temp_vwl,
        sigma_time: sigma
            .as_ref()
            .map_or_else(|| PolyCoeffs::zeros(3), |s| s.sigma_time.clone()),
        sigma_vwl: sigma
            .as_ref()
            .map_or_else(|| PolyCoeffs::zeros(3), |s| s.sigma_vwl.clone()),
        v_th: base.v_th,
        v_dd_nom: p.v_dd_nom,
        t_nom: p.t_nom,
        domain: Domain::of_grid(&data.grid),
    };
    let models = FittedModels {
        discharge,
        energy: energy.model,
    };
    let mut report = rms_report(&models, data)?;
    report.iterations.insert("base".into(), base.iterations);
    if let Some(s) = &sigma {
        report.iterations.insert("sigma".into(), s.iterations);
    }
    report
        .iterations
        .insert("write_energy".into(), energy.wr_iterations);
    report
        .iterations
        .insert("discharge_energy".into(), energy.dc_iterations);
    Ok((models, report))
}

/// RMS and maximum residuals of every sub-model on `data`.
///
/// * `base`: nominal supply and temperature rows, base term only.
/// * `supply`: nominal temperature rows, supply-extended model.
/// * `temperature`: all rows, full model.
/// * `sigma`: rows with a standard deviation.
/// * `write_energy`, `discharge_energy`: all rows.
///
/// Entries without rows are omitted.
pub fn rms_report(models: &FittedModels, data: &OracleDataset) -> Result<FitReport> {
    if data.rows.is_empty() {
        return Err(Error::usage("empty holdout dataset"));
    }
    let m = &models.discharge;
    let e = &models.energy;
    for r in &data.rows {
        m.domain.check(r.t, r.v_wl, r.v_dd, r.temp)?;
    }
    let is_nom_v = |r: &OracleRow| same(r.v_dd, m.v_dd_nom);
    let is_nom_t = |r: &OracleRow| same(r.temp, m.t_nom);
    let oracle_vbl = |r: &OracleRow| r.v_dd - r.dv;

    let mut base = Vec::new();
    let mut supply = Vec::new();
    let mut full = Vec::new();
    let mut sigma = Vec::new();
    let mut wr = Vec::new();
    let mut dc = Vec::new();
    for r in &data.rows {
        let v = oracle_vbl(r);
        if is_nom_v(r) && is_nom_t(r) {
            base.push(v - (r.v_dd + m.base(r.t, r.v_wl)));
        }
        let model_v = m.vbl_unchecked(r.t, r.v_wl, r.v_dd, r.temp);
        if is_nom_t(r) {
            supply.push(v - model_v);
        }
        full.push(v - model_v);
        if let Some(s) = r.sigma_dv {
            sigma.push(s - m.sigma(r.t, r.v_wl));
        }
        wr.push(r.e_wr - e.e_wr(r.v_dd, r.temp));
        dc.push(r.e_dc - e.e_dc(r.dv, r.v_dd, r.temp));
    }
    let mut entries = BTreeMap::new();
    for (name, res, scale, unit) in [
        ("base", &base, 1e3, "mV"),
        ("supply", &supply, 1e3, "mV"),
        ("temperature", &full, 1e3, "mV"),
        ("sigma", &sigma, 1e3, "mV"),
        ("write_energy", &wr, 1e15, "fJ"),
        ("discharge_energy", &dc, 1e15, "fJ"),
    ] {
        if !res.is_empty() {
            entries.insert(name.to_string(), RmsEntry::from_residuals(res, scale, unit));
        }
    }
    Ok(FitReport {
        entries,
        domain: m.domain.clone(),
        iterations: BTreeMap::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rms_entry_bounds() {
        let e = RmsEntry::from_residuals(&[1e-3, -2e-3, 0.5e-3], 1e3, "mV");
        assert!(e.rms <= e.max_abs);
        assert!((e.max_abs - 2.0).abs() < 1e-12);
    }

    #[test]
    fn domain_allows_zero_time_and_rounding() {
        let d = Domain {
            t: [0.02e-9, 2.56e-9],
            v_wl: [0.3, 1.2],
            v_dd: [1.08, 1.32],
            temp: [253.0, 358.0],
        };
        assert!(d.check(0.0, 0.3, 1.2 * 1.1, 300.0).is_ok());
        assert!(d.check(8.0 * 0.32e-9, 1.2, 1.2, 300.0).is_ok());
        let e = d.check(3e-9, 1.0, 1.2, 300.0).unwrap_err();
        assert!(e.to_string().starts_with("t ="));
        assert!(d.check(1e-9, 1.0, 1.2, 400.0).is_err());
    }
}
