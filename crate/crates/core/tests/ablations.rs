//! Oracle behavior and fitted models with individual effects switched off.

mod common;

use imc_core::device::{generate_dataset, simulate_discharge, DeviceParams, GridSpec, McScope};
use imc_core::fit::{fit_all, fit_discharge_base, rms_report};

fn dv(v_wl: f64, t: f64, v_dd: f64, temp: f64, p: &DeviceParams) -> f64 {
    simulate_discharge(v_wl, t, p, v_dd, temp, None, 256)
        .unwrap()
        .final_drop()
}

fn small_grid() -> GridSpec {
    GridSpec {
        times: (1..=32).map(|i| i as f64 * 0.08e-9).collect(),
        v_wl: (0..10).map(|i| 0.3 + 0.1 * i as f64).collect(),
        ..GridSpec::default()
    }
}

#[test]
fn discharge_is_monotone_in_word_line() {
    let p = DeviceParams::default();
    let g = GridSpec::default();
    for t in [0.16e-9, 1.28e-9, 2.56e-9] {
        let d: Vec<f64> = g.v_wl.iter().map(|&w| dv(w, t, 1.2, 300.0, &p)).collect();
        for w in d.windows(2) {
            assert!(w[1] >= w[0] - 1e-5, "{d:?}");
        }
    }
}

#[test]
fn supply_moves_discharge_more_than_temperature() {
    let p = DeviceParams::default();
    let (t, v_wl) = (1.28e-9, 0.75);
    let nom = dv(v_wl, t, 1.2, 300.0, &p);
    let hot = dv(v_wl, t, 1.2, 358.0, &p);
    let high = dv(v_wl, t, 1.32, 300.0, &p);
    assert!(
        (hot - nom).abs() < (high - nom).abs(),
        "T {:e}, V_DD {:e}",
        hot - nom,
        high - nom
    );
}

#[test]
fn without_temperature_coefficients_only_subthreshold_tracks_temperature() {
    let p = DeviceParams {
        alpha_vth: 0.0,
        mu_exp: 0.0,
        leak_beta: 0.0,
        ..DeviceParams::default()
    };
    for v_wl in [0.6, 0.9, 1.2] {
        let a = dv(v_wl, 2.56e-9, 1.2, 300.0, &p);
        for temp in [253.0, 358.0] {
            let rel = (dv(v_wl, 2.56e-9, 1.2, temp, &p) - a) / a;
            assert!(rel.abs() < 1e-5, "V_WL {v_wl}, T {temp}: {rel:e}");
        }
    }
    // The subthreshold slope n·V_T still scales with temperature.
    let a = dv(0.3, 2.56e-9, 1.2, 300.0, &p);
    assert!(dv(0.3, 2.56e-9, 1.2, 358.0, &p) > 1.2 * a);
}

#[test]
fn without_mismatch_sigma_model_vanishes() {
    let p = DeviceParams {
        sigma_vth: 0.0,
        sigma_k_rel: 0.0,
        ..DeviceParams::default()
    };
    let data = generate_dataset(&small_grid(), &p, 50, 4).unwrap();
    assert!(data
        .rows
        .iter()
        .filter_map(|r| r.sigma_dv)
        .all(|s| s == 0.0));
    let (models, report) = fit_all(&data).unwrap();
    assert_eq!(report.get("sigma").unwrap().rms, 0.0);
    assert_eq!(models.discharge.sigma(1e-9, 0.8), 0.0);
}

#[test]
fn subthreshold_word_lines_fit_to_the_leakage_floor() {
    let p = DeviceParams::default();
    let grid = GridSpec {
        times: (1..=32).map(|i| i as f64 * 0.08e-9).collect(),
        v_wl: vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.25],
        v_dd: vec![1.2],
        temp: vec![300.0],
        mc_scope: McScope::Nominal,
    };
    let data = generate_dataset(&grid, &p, 1, 0).unwrap();
    let floor = data.rows.iter().map(|r| r.dv).fold(0.0, f64::max);
    assert!(floor < 5e-4, "leakage floor {floor:e}");
    let base = fit_discharge_base(&data).unwrap();
    for r in &data.rows {
        assert!(base.eval(r.t, r.v_wl).abs() <= 2.0 * floor);
    }
}

#[test]
fn zero_discharge_costs_no_energy() {
    let p = DeviceParams::default();
    let data = generate_dataset(&small_grid(), &p, 1, 0).unwrap();
    let (models, _) = fit_all(&data).unwrap();
    let e = &models.energy;
    let full = e.e_dc(0.3, 1.2, 300.0);
    assert!(
        e.e_dc(0.0, 1.2, 300.0) <= 1e-6 * full,
        "{:e} vs {full:e}",
        e.e_dc(0.0, 1.2, 300.0)
    );
}

#[test]
fn holdout_equal_to_training_reproduces_training_rms() {
    let p = DeviceParams::default();
    let data = generate_dataset(&small_grid(), &p, 1, 0).unwrap();
    let (models, training) = fit_all(&data).unwrap();
    let again = rms_report(&models, &data).unwrap();
    assert_eq!(training.entries, again.entries);
}

#[test]
fn sigma_estimates_agree_across_disjoint_seeds() {
    let p = DeviceParams::default();
    let g = GridSpec::point(1.28e-9, 0.8, 1.2, 300.0);
    let a = generate_dataset(&g, &p, 10_000, 1).unwrap().rows[0]
        .sigma_dv
        .unwrap();
    let b = generate_dataset(&g, &p, 10_000, 2).unwrap().rows[0]
        .sigma_dv
        .unwrap();
    assert!((a - b).abs() / a < 0.02, "{a:e} vs {b:e}");
}
