//! Event-level model of the 4-bit discharge multiplier.
//!
//! The stored word `a` sits on four bit-line columns. Bit `i` discharges
//! its BLB for `2^i · τ0` with the word line driven by a linear DAC from the
//! input code `b`. The four bit-line voltages are averaged by equal sampling
//! capacitors and the mean is quantized by an ADC calibrated so that the
//! nominal `15 × 15` product reads 225.

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::fit::{DischargeModel, FittedModels};
use crate::rng::{derived, mix, Rng};

pub const BITS: u32 = 4;
pub const MAX_OPERAND: u8 = 15;
/// Product at the ADC calibration point.
pub const FULL_SCALE_PRODUCT: u32 = 225;

/// One design corner at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitConfig {
    /// Discharge time of the least significant bit line (s).
    pub tau0: f64,
    /// DAC output for code 0 (V).
    pub v_dac0: f64,
    /// DAC output for code 15 (V).
    pub v_dac_fs: f64,
    pub v_dd: f64,
    pub temp: f64,
    pub adc_bits: u32,
    pub seed: u64,
}

impl CircuitConfig {
    /// Corner at the model's nominal supply and temperature with an 8-bit ADC.
    pub fn nominal(tau0: f64, v_dac0: f64, v_dac_fs: f64, model: &DischargeModel) -> Self {
        CircuitConfig {
            tau0,
            v_dac0,
            v_dac_fs,
            v_dd: model.v_dd_nom,
            temp: model.t_nom,
            adc_bits: 8,
            seed: 0,
        }
    }

    pub fn at(self, v_dd: f64, temp: f64) -> Self {
        CircuitConfig { v_dd, temp, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            return Err(Error::Domain {
                param: "tau0",
                value: self.tau0,
                min: 0.0,
                max: f64::INFINITY,
            });
        }
        check_range("v_dac_fs", self.v_dac_fs, 0.0, self.v_dd)?;
        check_range("v_dac0", self.v_dac0, 0.0, self.v_dac_fs)?;
        if self.v_dac0 >= self.v_dac_fs {
            return Err(Error::usage(format!(
                "v_dac0 = {} must be below v_dac_fs = {}",
                self.v_dac0, self.v_dac_fs
            )));
        }
        if !(8..=16).contains(&self.adc_bits) {
            return Err(Error::usage(format!(
                "adc_bits = {} must be in 8..=16 to represent products up to 225",
                self.adc_bits
            )));
        }
        Ok(())
    }

    fn max_code(&self) -> u32 {
        (1u32 << self.adc_bits) - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Mean discharge from the fitted model.
    Nominal,
    /// Each discharge perturbed by a Gaussian mismatch draw.
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdcCalibration {
    /// Combined discharge of the nominal `15 × 15` product (V).
    pub dv_fullscale: f64,
    /// `dv_fullscale / 225` (V).
    pub lsb_volt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MulResult {
    pub code: u32,
    /// Mean of the four bit-line discharges (V).
    pub dv_comb: f64,
    pub dv_per_bit: [f64; 4],
    /// Discharge energy of the multiplication (J).
    pub e_mul: f64,
    /// `e_mul` plus the write of the 4-bit word (J).
    pub e_op: f64,
    pub exact: u32,
    pub err_lsb: i64,
}

/// Model bit-line voltage; see [`DischargeModel::eval_vbl`].
pub fn eval_vbl(model: &DischargeModel, t: f64, v_wl: f64, v_dd: f64, temp: f64) -> Result<f64> {
    model.eval_vbl(t, v_wl, v_dd, temp)
}

/// Bit-line voltage with a mismatch draw `N(0, σ(t, V_WL))`, clamped to
/// `[0, V_DD]`.
pub fn sample_vbl(
    model: &DischargeModel,
    t: f64,
    v_wl: f64,
    v_dd: f64,
    temp: f64,
    rng: &mut Rng,
) -> Result<f64> {
    let z: f64 = rng.sample(StandardNormal);
    Ok(perturb(
        model,
        t,
        v_wl,
        v_dd,
        model.eval_vbl(t, v_wl, v_dd, temp)?,
        z,
    ))
}

fn perturb(model: &DischargeModel, t: f64, v_wl: f64, v_dd: f64, v: f64, z: f64) -> f64 {
    let s = model.sigma(t, v_wl);
    if s == 0.0 {
        v
    } else {
        (v + s * z).clamp(0.0, v_dd)
    }
}

pub fn dac_voltage(code: u8, cfg: &CircuitConfig) -> Result<f64> {
    if code > MAX_OPERAND {
        return Err(Error::Domain {
            param: "dac code",
            value: code as f64,
            min: 0.0,
            max: MAX_OPERAND as f64,
        });
    }
    Ok(cfg.v_dac0 + code as f64 * (cfg.v_dac_fs - cfg.v_dac0) / MAX_OPERAND as f64)
}

fn check_times(cfg: &CircuitConfig, model: &DischargeModel) -> Result<()> {
    let [t_min, t_max] = model.domain.t;
    if cfg.tau0 < t_min * (1.0 - 1e-9) {
        return Err(Error::Domain {
            param: "tau0",
            value: cfg.tau0,
            min: t_min,
            max: t_max / 8.0,
        });
    }
    check_range("tau0", cfg.tau0, 0.0, t_max / 8.0 * (1.0 + 1e-9))
}

/// Calibrates the ADC on the nominal `15 × 15` product at the model's
/// nominal supply and temperature, whatever the operating point of `cfg`.
///
/// Every bit-line time `2^i · τ0` must lie in the fitted time range.
pub fn calibrate_adc(cfg: &CircuitConfig, models: &FittedModels) -> Result<AdcCalibration> {
    let m = &models.discharge;
    let nominal = cfg.at(m.v_dd_nom, m.t_nom);
    nominal.validate()?;
    check_times(&nominal, m)?;
    let v_wl = dac_voltage(MAX_OPERAND, &nominal)?;
    let mut sum = 0.0;
    for i in 0..BITS {
        let t = (1u32 << i) as f64 * cfg.tau0;
        sum += (m.v_dd_nom - m.eval_vbl(t, v_wl, m.v_dd_nom, m.t_nom)?).max(0.0);
    }
    if !(sum > 0.0) {
        return Err(Error::Numeric(format!(
            "full-scale discharge is {sum} V; the corner does not discharge"
        )));
    }
    Ok(AdcCalibration {
        dv_fullscale: sum,
        lsb_volt: sum / FULL_SCALE_PRODUCT as f64,
    })
}

/// A corner with its operating point checked against the model domain.
#[derive(Debug, Clone, Copy)]
pub struct Multiplier<'a> {
    pub cfg: CircuitConfig,
    pub models: &'a FittedModels,
    pub cal: AdcCalibration,
    e_wr: f64,
}

impl<'a> Multiplier<'a> {
    pub fn new(cfg: CircuitConfig, models: &'a FittedModels, cal: AdcCalibration) -> Result<Self> {
        cfg.validate()?;
        let m = &models.discharge;
        check_times(&cfg, m)?;
        // Corners of the input space; everything else lies between them.
        m.domain
            .check(8.0 * cfg.tau0, cfg.v_dac0, cfg.v_dd, cfg.temp)?;
        m.domain
            .check(8.0 * cfg.tau0, cfg.v_dac_fs, cfg.v_dd, cfg.temp)?;
        if !(cal.lsb_volt > 0.0) {
            return Err(Error::usage("ADC calibration must have a positive LSB"));
        }
        Ok(Multiplier {
            cfg,
            models,
            cal,
            e_wr: models.energy.e_wr(cfg.v_dd, cfg.temp),
        })
    }

    /// Multiplies with the normals for the four bit lines given up front.
    fn run(&self, a: u8, b: u8, z: Option<[f64; 4]>) -> Result<MulResult> {
        if a > MAX_OPERAND {
            return Err(Error::Domain {
                param: "a",
                value: a as f64,
                min: 0.0,
                max: MAX_OPERAND as f64,
            });
        }
        let cfg = &self.cfg;
        let m = &self.models.discharge;
        let v_wl = dac_voltage(b, cfg)?;
        let mut dv = [0.0; 4];
        let mut e_mul = 0.0;
        for i in 0..BITS as usize {
            if a >> i & 1 == 0 {
                continue;
            }
            let t = (1u32 << i) as f64 * cfg.tau0;
            let mut v = m.vbl_unchecked(t, v_wl, cfg.v_dd, cfg.temp);
            if let Some(z) = z {
                v = perturb(m, t, v_wl, cfg.v_dd, v, z[i]);
            }
            dv[i] = (cfg.v_dd - v).clamp(0.0, cfg.v_dd);
            e_mul += self.models.energy.e_dc(dv[i], cfg.v_dd, cfg.temp);
        }
        let dv_comb = dv.iter().sum::<f64>() / BITS as f64;
        let ratio = dv_comb / (self.cal.lsb_volt / BITS as f64);
        let code = ratio.round().clamp(0.0, cfg.max_code() as f64) as u32;
        let exact = a as u32 * b as u32;
        Ok(MulResult {
            code,
            dv_comb,
            dv_per_bit: dv,
            e_mul,
            e_op: e_mul + BITS as f64 * self.e_wr,
            exact,
            err_lsb: code as i64 - exact as i64,
        })
    }

    pub fn nominal(&self, a: u8, b: u8) -> Result<MulResult> {
        self.run(a, b, None)
    }

    /// One mismatch-perturbed multiplication. Four normals are drawn from
    /// `rng` in bit order whether or not the bit is set.
    pub fn sampled(&self, a: u8, b: u8, rng: &mut Rng) -> Result<MulResult> {
        let mut z = [0.0; 4];
        for zi in &mut z {
            *zi = rng.sample(StandardNormal);
        }
        self.run(a, b, Some(z))
    }

    pub fn multiply(&self, a: u8, b: u8, mode: Mode, rng: &mut Rng) -> Result<MulResult> {
        match mode {
            Mode::Nominal => self.nominal(a, b),
            Mode::Mc => self.sampled(a, b, rng),
        }
    }

    /// Standard deviation of the combined discharge predicted by the σ
    /// model for independent bit-line draws.
    pub fn model_sigma_comb(&self, a: u8, b: u8) -> Result<f64> {
        let v_wl = dac_voltage(b, &self.cfg)?;
        let m = &self.models.discharge;
        let var: f64 = (0..BITS as usize)
            .filter(|i| a >> i & 1 == 1)
            .map(|i| m.sigma((1u32 << i) as f64 * self.cfg.tau0, v_wl).powi(2))
            .fold(0.0, |s, x| s + x);
        Ok(var.sqrt() / BITS as f64)
    }
}

/// Single multiplication; see [`Multiplier`].
#[allow(clippy::too_many_arguments)]
pub fn multiply(
    a: u8,
    b: u8,
    cfg: &CircuitConfig,
    models: &FittedModels,
    cal: &AdcCalibration,
    mode: Mode,
    rng: &mut Rng,
) -> Result<MulResult> {
    Multiplier::new(*cfg, models, *cal)?.multiply(a, b, mode, rng)
}

/// Monte-Carlo statistics of one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McStats {
    pub mean_code: f64,
    pub sigma_code: f64,
    pub mean_dv: f64,
    pub sigma_dv: f64,
    pub mean_abs_err: f64,
    pub mean_e_op: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub a: u8,
    pub b: u8,
    /// Nominal-mode result.
    pub nominal: MulResult,
    pub mc: Option<McStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exhaustive {
    /// Mean |code − a·b| over the 256 pairs (and draws in MC mode), LSB.
    pub eps_mul: f64,
    /// Mean multiplication energy over pairs (J).
    pub e_mul_avg: f64,
    /// Mean energy including the word write (J).
    pub e_op_avg: f64,
    pub pairs: Vec<PairRow>,
}

/// Pair index in row-major `(a, b)` order.
pub fn pair_index(a: u8, b: u8) -> usize {
    a as usize * 16 + b as usize
}

/// Sample mean and standard deviation (n − 1) by Welford's method.
pub(crate) fn mean_std(xs: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for x in xs {
        n += 1;
        let d = x - mean;
        mean += d / n as f64;
        m2 += d * (x - mean);
    }
    let sd = if n > 1 {
        (m2 / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Monte-Carlo statistics of `(a, b)` over `n` draws. Draw `j` uses the
/// stream `derived(seed, j)` for every pair, so pair-to-pair differences
/// are not masked by sampling noise.
pub fn mc_pair(mul: &Multiplier<'_>, a: u8, b: u8, n: usize, seed: u64) -> Result<McStats> {
    let exact = a as f64 * b as f64;
    let runs = (0..n)
        .map(|j| mul.sampled(a, b, &mut derived(seed, j as u64)))
        .collect::<Result<Vec<_>>>()?;
    let (mean_code, sigma_code) = mean_std(runs.iter().map(|r| r.code as f64));
    let (mean_dv, sigma_dv) = mean_std(runs.iter().map(|r| r.dv_comb));
    let mean_abs_err = runs
        .iter()
        .map(|r| (r.code as f64 - exact).abs())
        .sum::<f64>()
        / n as f64;
    let mean_e_op = runs.iter().map(|r| r.e_op).sum::<f64>() / n as f64;
    Ok(McStats {
        mean_code,
        sigma_code,
        mean_dv,
        sigma_dv,
        mean_abs_err,
        mean_e_op,
    })
}

/// Runs all 256 input pairs.
///
/// In MC mode every pair is also simulated `n_mc` times (seeded from
/// `cfg.seed`) and ε and the energies are averaged over the draws.
pub fn exhaustive_error(
    cfg: &CircuitConfig,
    models: &FittedModels,
    cal: &AdcCalibration,
    mode: Mode,
    n_mc: usize,
) -> Result<Exhaustive> {
    let mul = Multiplier::new(*cfg, models, *cal)?;
    if mode == Mode::Mc && n_mc < 1 {
        return Err(Error::usage("MC mode needs at least one draw"));
    }
    let seed = mix(cfg.seed, 0x6d63);
    let pairs = (0..256usize)
        .into_par_iter()
        .map(|k| {
            let (a, b) = ((k / 16) as u8, (k % 16) as u8);
            let nominal = mul.nominal(a, b)?;
            let mc = match mode {
                Mode::Nominal => None,
                Mode::Mc => Some(mc_pair(&mul, a, b, n_mc, seed)?),
            };
            Ok(PairRow { a, b, nominal, mc })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(pairs))
}

/// Same as [`exhaustive_error`] in nominal mode, on the calling thread.
pub fn exhaustive_serial(mul: &Multiplier<'_>) -> Result<Exhaustive> {
    let mut pairs = Vec::with_capacity(256);
    for a in 0..=MAX_OPERAND {
        for b in 0..=MAX_OPERAND {
            pairs.push(PairRow {
                a,
                b,
                nominal: mul.nominal(a, b)?,
                mc: None,
            });
        }
    }
    Ok(summarize(pairs))
}

fn summarize(pairs: Vec<PairRow>) -> Exhaustive {
    let n = pairs.len() as f64;
    let (eps, e_mul, e_op) = pairs.iter().fold((0.0, 0.0, 0.0), |acc, p| match &p.mc {
        None => (
            acc.0 + p.nominal.err_lsb.unsigned_abs() as f64,
            acc.1 + p.nominal.e_mul,
            acc.2 + p.nominal.e_op,
        ),
        Some(mc) => (
            acc.0 + mc.mean_abs_err,
            acc.1 + mc.mean_e_op - (p.nominal.e_op - p.nominal.e_mul),
            acc.2 + mc.mean_e_op,
        ),
    });
    Exhaustive {
        eps_mul: eps / n,
        e_mul_avg: e_mul / n,
        e_op_avg: e_op / n,
        pairs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> CircuitConfig {
        CircuitConfig {
            tau0: 0.16e-9,
            v_dac0: 0.3,
            v_dac_fs: 1.0,
            v_dd: 1.2,
            temp: 300.0,
            adc_bits: 8,
            seed: 1,
        }
    }

    #[test]
    fn dac_endpoints_and_midcode() {
        let c = cfg();
        assert_eq!(dac_voltage(0, &c).unwrap(), 0.3);
        assert!((dac_voltage(15, &c).unwrap() - 1.0).abs() < 1e-15);
        assert!((dac_voltage(5, &c).unwrap() - (0.3 + 5.0 * 0.7 / 15.0)).abs() < 1e-15);
        assert!((dac_voltage(5, &c).unwrap() - 0.533_333_333_333_333_3).abs() < 1e-12);
        assert!(dac_voltage(16, &c).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = cfg();
        assert!(c.validate().is_ok());
        c.v_dac0 = 1.0;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.adc_bits = 7;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.tau0 = 0.0;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.v_dac_fs = 1.3;
        assert!(c.validate().is_err());
    }

    #[test]
    fn mean_std_matches_two_pass() {
        let xs = [1.0, 2.0, 4.0, 7.0];
        let (m, s) = mean_std(xs);
        assert!((m - 3.5).abs() < 1e-15);
        let var = xs.iter().map(|x| (x - 3.5f64).powi(2)).sum::<f64>() / 3.0;
        assert!((s - var.sqrt()).abs() < 1e-15);
    }
}
