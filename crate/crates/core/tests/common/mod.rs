//! Datasets generated exactly from the fitted model family, with the
//! generating coefficients kept for comparison.
#![allow(dead_code)]

use imc_core::device::{DeviceParams, GridSpec, McScope, OracleDataset, OracleRow};

/// Plain power-series evaluation, independent of the library's polynomial type.
pub fn poly(c: &[f64], x: f64) -> f64 {
    c.iter()
        .enumerate()
        .map(|(i, a)| a * x.powi(i as i32))
        .sum()
}

pub struct Truth {
    pub v_th: f64,
    pub v_dd_nom: f64,
    pub t_nom: f64,
    pub vod: [f64; 5],
    /// Time factor without constant term, coefficients of t and t².
    pub time: [f64; 2],
    pub supply: [f64; 3],
    pub temp_vwl: [f64; 4],
    pub sigma_t: [f64; 4],
    pub sigma_vwl: [f64; 4],
    pub wr_vdd: [f64; 3],
    pub wr_temp: [f64; 2],
    pub dc_vdd: [f64; 2],
    pub dc_dv: [f64; 4],
    pub dc_temp: [f64; 2],
}

impl Truth {
    pub fn new(p: &DeviceParams) -> Self {
        Truth {
            v_th: p.v_th0,
            v_dd_nom: p.v_dd_nom,
            t_nom: p.t_nom,
            vod: [0.004, 0.06, 0.11, -0.02, 0.005],
            time: [-0.05e9, 0.004e18],
            supply: [1.0, 0.8, -0.3],
            temp_vwl: [2e3, -1e3, 3e2, -5e1],
            sigma_t: [1e-8, 0.3e6, 0.02e15, -0.001e24],
            sigma_vwl: [0.2, 0.5, -0.1, 0.02],
            wr_vdd: [1e-15, 2e-15, 28e-15],
            wr_temp: [0.85, 5e-4],
            dc_vdd: [1e-15, 25e-15],
            dc_dv: [0.0, 1.0, 0.05, -0.01],
            dc_temp: [0.85, 5e-4],
        }
    }

    pub fn vbl(&self, t: f64, v_wl: f64, v_dd: f64, temp: f64) -> f64 {
        let base = poly(&self.vod, v_wl - self.v_th) * (self.time[0] * t + self.time[1] * t * t);
        v_dd + base * poly(&self.supply, v_dd - self.v_dd_nom)
            + t * (temp - self.t_nom) * poly(&self.temp_vwl, v_wl)
    }

    pub fn sigma(&self, t: f64, v_wl: f64) -> f64 {
        poly(&self.sigma_t, t) * poly(&self.sigma_vwl, v_wl)
    }

    pub fn e_wr(&self, v_dd: f64, temp: f64) -> f64 {
        poly(&self.wr_vdd, v_dd) * poly(&self.wr_temp, temp)
    }

    pub fn e_dc(&self, dv: f64, v_dd: f64, temp: f64) -> f64 {
        poly(&self.dc_vdd, v_dd) * poly(&self.dc_dv, dv) * poly(&self.dc_temp, temp)
    }
}

pub fn family_grid() -> GridSpec {
    GridSpec {
        times: (1..=12).map(|i| i as f64 * 0.2e-9).collect(),
        v_wl: (0..10).map(|i| 0.35 + 0.08 * i as f64).collect(),
        v_dd: vec![1.08, 1.14, 1.2, 1.26, 1.32],
        temp: vec![253.0, 300.0, 358.0],
        mc_scope: McScope::Nominal,
    }
}

/// Every grid point, with σ on the nominal supply and temperature only.
pub fn family_dataset(p: &DeviceParams, truth: &Truth, grid: &GridSpec) -> OracleDataset {
    let mut rows = Vec::new();
    for &temp in &grid.temp {
        for &v_dd in &grid.v_dd {
            for &v_wl in &grid.v_wl {
                for &t in &grid.times {
                    let dv = v_dd - truth.vbl(t, v_wl, v_dd, temp);
                    assert!(dv > 0.0, "generator left the physical range");
                    let nominal = v_dd == p.v_dd_nom && temp == p.t_nom;
                    rows.push(OracleRow {
                        t,
                        v_wl,
                        v_dd,
                        temp,
                        dv,
                        sigma_dv: nominal.then(|| truth.sigma(t, v_wl)),
                        e_wr: truth.e_wr(v_dd, temp),
                        e_dc: truth.e_dc(dv, v_dd, temp),
                    });
                }
            }
        }
    }
    OracleDataset {
        rows,
        grid: grid.clone(),
        seed: 0,
        mc_samples: 2,
        params: p.clone(),
    }
}

/// Largest prediction errors of fitted models against the generator:
/// V_BL (V), σ (V), write energy (fJ), discharge energy (fJ).
pub fn max_errors(
    models: &imc_core::fit::FittedModels,
    truth: &Truth,
    data: &OracleDataset,
) -> [f64; 4] {
    let d = &models.discharge;
    let e = &models.energy;
    let mut worst = [0.0_f64; 4];
    for r in &data.rows {
        let v = d.eval_vbl(r.t, r.v_wl, r.v_dd, r.temp).unwrap();
        worst[0] = worst[0].max((v - truth.vbl(r.t, r.v_wl, r.v_dd, r.temp)).abs());
        worst[1] = worst[1].max((d.sigma(r.t, r.v_wl) - truth.sigma(r.t, r.v_wl)).abs());
        worst[2] = worst[2].max((e.e_wr(r.v_dd, r.temp) - r.e_wr).abs() * 1e15);
        worst[3] = worst[3].max((e.e_dc(r.dv, r.v_dd, r.temp) - r.e_dc).abs() * 1e15);
    }
    worst
}

/// Models fitted to a reduced oracle grid that covers the default corners.
pub fn oracle_models() -> imc_core::fit::FittedModels {
    use std::sync::OnceLock;
    static MODELS: OnceLock<imc_core::fit::FittedModels> = OnceLock::new();
    MODELS
        .get_or_init(|| {
            let p = DeviceParams::default();
            let grid = GridSpec {
                times: (1..=64).map(|i| i as f64 * 0.04e-9).collect(),
                v_wl: (0..10).map(|i| 0.3 + 0.1 * i as f64).collect(),
                ..GridSpec::default()
            };
            let data = imc_core::device::generate_dataset(&grid, &p, 200, 11).unwrap();
            imc_core::fit::fit_all(&data).unwrap().0
        })
        .clone()
}
