//! Corner selection, sweeps and PVT axes.

mod common;

use imc_core::explore::{
    fom, pvt_sweep, select_corners, sweep_corners, CornerMetrics, GridSpec3, PvtAxis,
};
use imc_core::sim::CircuitConfig;

fn metrics(tau0_ns: f64, v0: f64, vfs: f64, eps: f64, e_fj: f64, sigma_mv: f64) -> CornerMetrics {
    let e = e_fj * 1e-15;
    CornerMetrics {
        config: CircuitConfig {
            tau0: tau0_ns * 1e-9,
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
        sigma_max: sigma_mv * 1e-3,
    }
}

/// Reference selected-corner table; σ values are placeholders that
/// make the third row the most robust.
fn reference_rows() -> Vec<CornerMetrics> {
    vec![
        metrics(0.16, 0.3, 1.0, 4.78, 44.0, 5.04),
        metrics(0.16, 0.3, 0.7, 15.0, 37.0, 6.0),
        metrics(0.24, 0.4, 1.0, 9.6, 69.8, 3.0),
    ]
}

fn key(m: &CornerMetrics) -> (f64, f64, f64) {
    (m.config.tau0 * 1e9, m.config.v_dac0, m.config.v_dac_fs)
}

#[test]
fn reference_rows_select_reference_corners() {
    let s = select_corners(&reference_rows()).unwrap();
    assert_eq!(key(&s.fom), (0.16, 0.3, 1.0));
    assert_eq!(key(&s.power), (0.16, 0.3, 0.7));
    assert_eq!(key(&s.variation), (0.24, 0.4, 1.0));
}

#[test]
fn fom_choice_survives_energy_rescale() {
    let rows = reference_rows();
    let scaled: Vec<CornerMetrics> = rows
        .iter()
        .map(|m| {
            let e = m.e_mul * 1000.0;
            CornerMetrics {
                e_mul: e,
                e_op: e,
                fom: fom(m.eps_mul, e),
                ..m.clone()
            }
        })
        .collect();
    let a = select_corners(&rows).unwrap();
    let b = select_corners(&scaled).unwrap();
    assert_eq!(key(&a.fom), key(&b.fom));
    assert_eq!(key(&a.power), key(&b.power));
}

#[test]
fn reference_fom_arithmetic() {
    let f = fom(4.78, 44e-15);
    assert!((f - 4.7547e12).abs() / f < 1e-4, "{f:e}");
    assert_eq!(fom(0.0, 44e-15), f64::INFINITY);
}

#[test]
fn ties_prefer_lower_energy_then_shorter_tau() {
    let mut rows = vec![
        metrics(0.20, 0.3, 0.8, 2.0, 10.0, 1.0),
        metrics(0.16, 0.3, 0.9, 2.0, 10.0, 1.0),
        metrics(0.16, 0.3, 0.8, 2.0, 10.0, 1.0),
    ];
    let s = select_corners(&rows).unwrap();
    assert_eq!(key(&s.fom), (0.16, 0.3, 0.8));
    assert_eq!(key(&s.variation), (0.16, 0.3, 0.8));
    rows.reverse();
    assert_eq!(select_corners(&rows).unwrap(), s);
}

#[test]
fn single_corner_sweep_recomputes_fom() {
    let m = common::oracle_models();
    let grid = GridSpec3 {
        tau0: vec![0.2e-9],
        v_dac0: vec![0.35],
        v_dac_fs: vec![0.9],
    };
    let s = sweep_corners(&grid, &m, 20, 9).unwrap();
    assert_eq!(s.metrics.len(), 1);
    let c = &s.metrics[0];
    assert_eq!(c.fom, 1.0 / (c.eps_mul * c.e_mul));
    assert!(c.e_op > c.e_mul);
}

#[test]
fn out_of_domain_corners_are_reported_not_fatal() {
    let m = common::oracle_models();
    let grid = GridSpec3 {
        tau0: vec![0.2e-9, 1.0e-9],
        v_dac0: vec![0.35],
        v_dac_fs: vec![0.9],
    };
    let s = sweep_corners(&grid, &m, 0, 9).unwrap();
    assert_eq!(s.metrics.len(), 1);
    assert_eq!(s.failures.len(), 1);
    assert_eq!(s.failures[0].tau0, 1.0e-9);
}

#[test]
fn empty_grid_is_usage_error() {
    let m = common::oracle_models();
    let grid = GridSpec3 {
        tau0: vec![],
        ..GridSpec3::default()
    };
    assert!(sweep_corners(&grid, &m, 0, 0).unwrap_err().is_usage());
    assert!(select_corners(&[]).unwrap_err().is_usage());
}

#[test]
fn nominal_only_axes_reproduce_corner_error() {
    let m = common::oracle_models();
    let grid = GridSpec3 {
        tau0: vec![0.16e-9],
        v_dac0: vec![0.3],
        v_dac_fs: vec![1.0],
    };
    let c = sweep_corners(&grid, &m, 0, 0).unwrap().metrics[0].clone();
    let (v, t) = pvt_sweep(&c.config, &[1.2], &[300.0], &m).unwrap();
    assert_eq!(v.axis, PvtAxis::VDd);
    assert_eq!(v.eps_at(1.2), Some(c.eps_mul));
    assert_eq!(t.eps_at(300.0), Some(c.eps_mul));
    assert_eq!(v.spread(), 0.0);
}

#[test]
fn off_domain_pvt_points_carry_errors() {
    let m = common::oracle_models();
    let c = CircuitConfig::nominal(0.16e-9, 0.3, 1.0, &m.discharge);
    let (v, _) = pvt_sweep(&c, &[1.2, 1.5], &[300.0], &m).unwrap();
    assert!(v.points[1].eps_mul.is_none());
    assert!(v.points[1].error.as_deref().unwrap().contains("v_dd"));
}
