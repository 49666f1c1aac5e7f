//! Wall-clock comparison of the fitted-model multiplier against the same
//! computation through the transistor-level oracle, on the calling thread.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::device::{
    oracle_energies, simulate_discharge, DeviceParams, MismatchDraw, DEFAULT_STEPS,
};
use crate::error::{Error, Result};
use crate::fit::FittedModels;
use crate::rng::{derived, Rng};
use crate::sim::{
    calibrate_adc, dac_voltage, exhaustive_serial, CircuitConfig, Multiplier, BITS, MAX_OPERAND,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub task: String,
    /// Seconds per run of the fitted-model route.
    pub fast_s: f64,
    /// Seconds per run of the oracle route.
    pub oracle_s: f64,
    pub speedup: f64,
    /// Runs averaged for the fitted-model timing.
    pub fast_repeats: usize,
}

/// Times `f` over enough repetitions to last at least `min_s` seconds.
fn time_repeated<T>(min_s: f64, mut f: impl FnMut() -> Result<T>) -> Result<(f64, usize, T)> {
    let start = Instant::now();
    let mut reps = 0;
    loop {
        let out = f()?;
        reps += 1;
        let el = start.elapsed().as_secs_f64();
        if el >= min_s {
            return Ok((el / reps as f64, reps, out));
        }
    }
}

fn oracle_drop(
    params: &DeviceParams,
    v_wl: f64,
    t: f64,
    cfg: &CircuitConfig,
    draw: Option<MismatchDraw>,
) -> Result<f64> {
    Ok(simulate_discharge(v_wl, t, params, cfg.v_dd, cfg.temp, draw, DEFAULT_STEPS)?.final_drop())
}

/// Result of the oracle route: mean absolute error and mean energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleSweep {
    pub eps_mul: f64,
    pub e_mul_avg: f64,
}

/// The 256-pair nominal sweep with every discharge integrated by the oracle,
/// including its own full-scale calibration.
pub fn oracle_sweep(cfg: &CircuitConfig, params: &DeviceParams) -> Result<OracleSweep> {
    cfg.validate()?;
    let v_fs = dac_voltage(MAX_OPERAND, cfg)?;
    let mut full = 0.0;
    for i in 0..BITS {
        full += oracle_drop(params, v_fs, (1u32 << i) as f64 * cfg.tau0, cfg, None)?;
    }
    if !(full > 0.0) {
        return Err(Error::Numeric("oracle full-scale discharge is zero".into()));
    }
    let lsb = full / 225.0;
    let (mut eps, mut energy) = (0.0, 0.0);
    for a in 0..=MAX_OPERAND {
        for b in 0..=MAX_OPERAND {
            let v_wl = dac_voltage(b, cfg)?;
            let mut sum = 0.0;
            for i in 0..BITS {
                if a >> i & 1 == 1 {
                    let dv = oracle_drop(params, v_wl, (1u32 << i) as f64 * cfg.tau0, cfg, None)?;
                    energy +=
                        oracle_energies(dv.clamp(0.0, cfg.v_dd), cfg.v_dd, cfg.temp, params)?.1;
                    sum += dv;
                }
            }
            let code = (sum / lsb).round().clamp(0.0, 255.0);
            eps += (code - (a as f64 * b as f64)).abs();
        }
    }
    Ok(OracleSweep {
        eps_mul: eps / 256.0,
        e_mul_avg: energy / 256.0,
    })
}

/// Fitted-model versus oracle time for the full 256-pair sweep at `cfg`,
/// including calibration on both routes.
pub fn bench_sweep(
    cfg: &CircuitConfig,
    models: &FittedModels,
    params: &DeviceParams,
) -> Result<(Timing, OracleSweep)> {
    let (fast_s, reps, _) = time_repeated(0.2, || {
        let cal = calibrate_adc(cfg, models)?;
        exhaustive_serial(&Multiplier::new(*cfg, models, cal)?)
    })?;
    let start = Instant::now();
    let oracle = oracle_sweep(cfg, params)?;
    let oracle_s = start.elapsed().as_secs_f64();
    Ok((
        Timing {
            task: "256-pair sweep".into(),
            fast_s,
            oracle_s,
            speedup: oracle_s / fast_s,
            fast_repeats: reps,
        },
        oracle,
    ))
}

/// `draws` mismatch samples of the `15 × 15` product. The oracle route
/// draws an independent device mismatch for each of the four bit lines.
pub fn bench_mc(
    cfg: &CircuitConfig,
    models: &FittedModels,
    params: &DeviceParams,
    draws: usize,
    seed: u64,
) -> Result<Timing> {
    let cal = calibrate_adc(cfg, models)?;
    let mul = Multiplier::new(*cfg, models, cal)?;
    let (fast_s, reps, _) = time_repeated(0.2, || {
        let mut acc = 0u64;
        for j in 0..draws {
            acc += mul
                .sampled(MAX_OPERAND, MAX_OPERAND, &mut derived(seed, j as u64))?
                .code as u64;
        }
        Ok(acc)
    })?;
    let v_fs = dac_voltage(MAX_OPERAND, cfg)?;
    let start = Instant::now();
    for j in 0..draws {
        let mut rng: Rng = derived(seed, j as u64);
        for i in 0..BITS {
            let draw = MismatchDraw::sample(params, &mut rng);
            oracle_drop(params, v_fs, (1u32 << i) as f64 * cfg.tau0, cfg, Some(draw))?;
        }
    }
    let oracle_s = start.elapsed().as_secs_f64();
    Ok(Timing {
        task: format!("{draws}-draw MC"),
        fast_s,
        oracle_s,
        speedup: oracle_s / fast_s,
        fast_repeats: reps,
    })
}
