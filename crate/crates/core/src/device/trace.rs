use serde::{Deserialize, Serialize};

use super::{DeviceParams, MismatchDraw, ReadPath, TEMP_MAX, TEMP_MIN};
use crate::error::{check_range, Error, Result};

/// RK4 steps per discharge.
pub const DEFAULT_STEPS: usize = 256;
const MIN_STEPS: usize = 64;

/// BLB voltage over time for one discharge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DischargeTrace {
    pub times: Vec<f64>,
    pub voltages: Vec<f64>,
    pub v_wl: f64,
    pub v_dd: f64,
    pub temp: f64,
    pub draw: Option<MismatchDraw>,
}

impl DischargeTrace {
    /// Total discharge at the end of the trace.
    pub fn final_drop(&self) -> f64 {
        self.v_dd - self.voltages.last().copied().unwrap_or(self.v_dd)
    }
}

fn check_inputs(params: &DeviceParams, v_wl: f64, v_dd: f64, temp: f64) -> Result<()> {
    params.validate()?;
    check_range("v_dd", v_dd, 0.0, 2.0 * params.v_dd_nom)?;
    check_range("v_wl", v_wl, 0.0, v_dd)?;
    check_range("temp", temp, TEMP_MIN, TEMP_MAX)
}

/// Integrates the discharge for `duration` seconds from `V_BLB(0) = v_dd`
/// with `steps` fixed RK4 steps (at least 64).
pub fn simulate_discharge(
    v_wl: f64,
    duration: f64,
    params: &DeviceParams,
    v_dd: f64,
    temp: f64,
    draw: Option<MismatchDraw>,
    steps: usize,
) -> Result<DischargeTrace> {
    check_inputs(params, v_wl, v_dd, temp)?;
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(Error::usage(format!(
            "duration must be >= 0, got {duration}"
        )));
    }
    if duration == 0.0 {
        return Ok(DischargeTrace {
            times: vec![0.0],
            voltages: vec![v_dd],
            v_wl,
            v_dd,
            temp,
            draw,
        });
    }
    let steps = steps.max(MIN_STEPS);
    let times: Vec<f64> = (0..=steps)
        .map(|i| duration * i as f64 / steps as f64)
        .collect();
    let path = ReadPath::new(params, v_dd, temp, draw);
    let voltages = integrate_unchecked(
        &path,
        params.c_bl,
        v_wl,
        v_dd,
        &times,
        duration / steps as f64,
    )?;
    Ok(DischargeTrace {
        times,
        voltages,
        v_wl,
        v_dd,
        temp,
        draw,
    })
}

/// BLB voltage at each of `times` (ascending, non-negative). Steps never
/// exceed `max_step` and land exactly on every requested time.
pub fn simulate_at_times(
    v_wl: f64,
    times: &[f64],
    params: &DeviceParams,
    v_dd: f64,
    temp: f64,
    draw: Option<MismatchDraw>,
    max_step: f64,
) -> Result<Vec<f64>> {
    check_inputs(params, v_wl, v_dd, temp)?;
    let path = ReadPath::new(params, v_dd, temp, draw);
    integrate_unchecked(&path, params.c_bl, v_wl, v_dd, times, max_step)
}

/// Same as [`simulate_at_times`] without input validation, for inner loops
/// that validated once up front.
pub(crate) fn integrate_unchecked(
    path: &ReadPath,
    c_bl: f64,
    v_wl: f64,
    v_dd: f64,
    times: &[f64],
    max_step: f64,
) -> Result<Vec<f64>> {
    let mut node = 0.0;
    let mut rate = |v: f64| {
        let (i, x) = path.solve(v_wl, v, node);
        node = x;
        -i / c_bl
    };
    let mut out = Vec::with_capacity(times.len());
    let mut t = 0.0;
    let mut v = v_dd;
    for &target in times {
        if !(target >= t) {
            return Err(Error::usage(
                "sample times must be ascending and non-negative",
            ));
        }
        let span = target - t;
        if span > 0.0 {
            let n = (span / max_step - 1e-9).ceil().max(1.0) as usize;
            let h = span / n as f64;
            for _ in 0..n {
                let k1 = rate(v);
                let k2 = rate(v + 0.5 * h * k1);
                let k3 = rate(v + 0.5 * h * k2);
                let k4 = rate(v + h * k3);
                v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                if !v.is_finite() {
                    return Err(Error::Numeric(format!(
                        "bit-line voltage became {v} at t = {t:e} s (v_wl = {v_wl})"
                    )));
                }
                v = v.max(0.0);
            }
        }
        t = target;
        out.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAU0: f64 = 0.16e-9;

    #[test]
    fn zero_duration_is_single_point() {
        let p = DeviceParams::default();
        let tr = simulate_discharge(0.8, 0.0, &p, 1.2, 300.0, None, DEFAULT_STEPS).unwrap();
        assert_eq!(tr.times, vec![0.0]);
        assert_eq!(tr.voltages, vec![1.2]);
    }

    #[test]
    fn grounded_word_line_barely_discharges() {
        let p = DeviceParams::default();
        let tr = simulate_discharge(0.0, 10.0 * TAU0, &p, 1.2, 300.0, None, DEFAULT_STEPS).unwrap();
        let dv = tr.final_drop();
        assert!(dv > 0.0 && dv < 0.1e-3, "dv = {dv}");
    }

    #[test]
    fn trace_is_monotone_and_bounded() {
        let p = DeviceParams::default();
        for &v_wl in &[0.0, 0.3, 0.6, 1.0, 1.2] {
            let tr = simulate_discharge(v_wl, 40e-9, &p, 1.2, 358.0, None, DEFAULT_STEPS).unwrap();
            assert_eq!(tr.voltages[0], 1.2);
            for w in tr.voltages.windows(2) {
                assert!(w[1] <= w[0]);
            }
            assert!(tr.voltages.iter().all(|v| (0.0..=1.2).contains(v)));
        }
    }

    #[test]
    fn discharge_bends_after_leaving_saturation() {
        // Slope stays nearly constant while V_BLB > V_WL - V_th and drops
        // once the pass transistor enters the triode region.
        let p = DeviceParams {
            k_pulldown: 0.0,
            ..Default::default()
        };
        let v_wl = 1.0;
        let tr = simulate_discharge(v_wl, 20e-9, &p, 1.2, 300.0, None, 512).unwrap();
        let knee = v_wl - p.v_th0;
        let slopes: Vec<(f64, f64)> = tr
            .voltages
            .windows(2)
            .zip(tr.times.windows(2))
            .map(|(v, t)| (v[0], (v[0] - v[1]) / (t[1] - t[0])))
            .collect();
        let initial = slopes[0].1;
        let sat_min = slopes
            .iter()
            .filter(|(v, _)| *v > knee + 0.05)
            .map(|s| s.1)
            .fold(f64::INFINITY, f64::min);
        let deep = slopes
            .iter()
            .filter(|(v, _)| *v < knee - 0.4)
            .map(|s| s.1)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            sat_min > 0.9 * initial,
            "saturation slope sagged: {sat_min} vs {initial}"
        );
        assert!(
            deep < 0.75 * initial,
            "no triode slowdown: {deep} vs {initial}"
        );
    }

    #[test]
    fn halving_step_changes_little() {
        let p = DeviceParams::default();
        for &v_wl in &[0.3, 0.7, 1.2] {
            let a = simulate_discharge(v_wl, 2.56e-9, &p, 1.2, 300.0, None, 256).unwrap();
            let b = simulate_discharge(v_wl, 2.56e-9, &p, 1.2, 300.0, None, 512).unwrap();
            for (i, va) in a.voltages.iter().enumerate() {
                assert!((va - b.voltages[2 * i]).abs() < 0.05e-3);
            }
        }
    }

    #[test]
    fn sampled_times_match_uniform_trace() {
        let p = DeviceParams::default();
        let tr = simulate_discharge(0.9, 2.56e-9, &p, 1.2, 300.0, None, 256).unwrap();
        let times: Vec<f64> = (1..=128).map(|j| 0.02e-9 * j as f64).collect();
        let v = simulate_at_times(0.9, &times, &p, 1.2, 300.0, None, 0.01e-9).unwrap();
        for (j, vj) in v.iter().enumerate() {
            assert!((vj - tr.voltages[2 * (j + 1)]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_word_line_above_supply() {
        let p = DeviceParams::default();
        assert!(simulate_discharge(1.3, 1e-9, &p, 1.2, 300.0, None, 256).is_err());
    }
}
