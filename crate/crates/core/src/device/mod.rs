//! Transistor-level reference model of the bit-line discharge.
//!
//! The read path of a cell storing '1' is a pass transistor (gate = word
//! line, drain = BLB) in series with the cell's pull-down transistor (gate
//! at the supply). The pass device follows a square law with channel-length
//! modulation and an exponential subthreshold tail; the pull-down is a
//! triode-region conductance whose strength tracks the supply. The bit-line
//! capacitance discharges through this path:
//!
//! ```text
//! C_BL · dV/dt = −I_path(V_WL, V)
//! ```

mod dataset;
mod params;
mod trace;

pub use dataset::{
    generate_dataset, oracle_energies, GridSpec, McScope, OracleDataset, OracleRow, DATASET_HEADER,
};
pub use params::{DeviceParams, MismatchDraw};
pub(crate) use trace::integrate_unchecked;
pub use trace::{simulate_at_times, simulate_discharge, DischargeTrace, DEFAULT_STEPS};

use crate::error::{check_range, Result};

/// Boltzmann constant over elementary charge, V/K.
pub const K_OVER_Q: f64 = 8.617_333_262e-5;

pub const TEMP_MIN: f64 = 233.0;
pub const TEMP_MAX: f64 = 398.0;

pub fn thermal_voltage(temp: f64) -> f64 {
    K_OVER_Q * temp
}

/// Drain current of the pass transistor with grounded source.
///
/// Square law `(k/2)·V_od²·(1 + λ·V_DS)` in saturation and the usual triode
/// expression below `V_DS = V_od`. Below an overdrive of `2·n·V_T` the
/// channel charge term switches to an exponential with slope `1/(n·V_T)`,
/// matched in value and slope, which yields the subthreshold current
/// `I_sub0·exp(V_od/(n·V_T))` around and below threshold.
pub fn transistor_current(v_gs: f64, v_ds: f64, params: &DeviceParams, temp: f64) -> Result<f64> {
    let vmax = 2.0 * params.v_dd_nom;
    check_range("v_gs", v_gs, 0.0, vmax)?;
    check_range("v_ds", v_ds, 0.0, vmax)?;
    check_range("temp", temp, TEMP_MIN, TEMP_MAX)?;
    Ok(PassDevice::new(params, temp, None).current(v_gs, v_ds))
}

/// Pass transistor at a fixed temperature and mismatch draw.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PassDevice {
    v_th: f64,
    k: f64,
    n_vt: f64,
    v_blend: f64,
    lambda: f64,
}

impl PassDevice {
    pub(crate) fn new(p: &DeviceParams, temp: f64, draw: Option<MismatchDraw>) -> Self {
        let draw = draw.unwrap_or_default();
        let n_vt = p.n_sub * thermal_voltage(temp);
        PassDevice {
            v_th: p.v_th(temp) + draw.d_vth,
            k: p.k_at(temp) * (1.0 + draw.d_k_rel),
            n_vt,
            v_blend: 2.0 * n_vt,
            lambda: p.lambda_cl,
        }
    }

    /// Channel charge function; the current is `F(V_od) − F(V_od − V_DS)`.
    #[inline]
    fn charge(&self, x: f64) -> f64 {
        if x >= self.v_blend {
            0.5 * self.k * x * x
        } else {
            0.5 * self.k * self.v_blend * self.v_blend * ((x - self.v_blend) / self.n_vt).exp()
        }
    }

    #[inline]
    fn charge_slope(&self, x: f64) -> f64 {
        if x >= self.v_blend {
            self.k * x
        } else {
            self.charge(x) / self.n_vt
        }
    }

    #[inline]
    pub(crate) fn current(&self, v_gs: f64, v_ds: f64) -> f64 {
        let v_ds = v_ds.max(0.0);
        let v_od = v_gs - self.v_th;
        (self.charge(v_od) - self.charge(v_od - v_ds)).max(0.0) * (1.0 + self.lambda * v_ds)
    }
}

/// Pass transistor in series with the cell pull-down, at fixed supply,
/// temperature and mismatch draw.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ReadPath {
    pass: PassDevice,
    /// Pull-down gain at temperature (A/V²); zero means a grounded source.
    k_pd: f64,
    /// Pull-down gate overdrive (V).
    v_ov_pd: f64,
}

impl ReadPath {
    pub(crate) fn new(p: &DeviceParams, v_dd: f64, temp: f64, draw: Option<MismatchDraw>) -> Self {
        let d = draw.unwrap_or_default();
        ReadPath {
            pass: PassDevice::new(p, temp, draw),
            k_pd: p.k_pulldown * (temp / p.t_nom).powf(p.mu_exp) * (1.0 + d.d_k_pd_rel),
            v_ov_pd: (v_dd - p.v_th(temp) - d.d_vth_pd).max(0.0),
        }
    }

    #[inline]
    fn pulldown(&self, v_x: f64) -> (f64, f64) {
        if v_x < self.v_ov_pd {
            (
                self.k_pd * (self.v_ov_pd * v_x - 0.5 * v_x * v_x),
                self.k_pd * (self.v_ov_pd - v_x),
            )
        } else {
            (0.5 * self.k_pd * self.v_ov_pd * self.v_ov_pd, 0.0)
        }
    }

    /// Current drawn from a bit line at `v_bl` with word line at `v_wl`.
    #[cfg(test)]
    pub(crate) fn current(&self, v_wl: f64, v_bl: f64) -> f64 {
        self.solve(v_wl, v_bl, 0.0).0
    }

    /// Path current and internal node voltage, with Newton started from
    /// `guess` (clamped into the bracket).
    pub(crate) fn solve(&self, v_wl: f64, v_bl: f64, guess: f64) -> (f64, f64) {
        let v_bl = v_bl.max(0.0);
        if self.k_pd == 0.0 {
            return (self.pass.current(v_wl, v_bl), 0.0);
        }
        // Internal node voltage where pass current equals pull-down current.
        // The mismatch between the two is strictly decreasing in v_x on
        // [0, v_bl], positive at 0 and non-positive at v_bl.
        let pass = &self.pass;
        let lam = pass.lambda;
        let far = pass.charge(v_wl - pass.v_th - v_bl);
        let (mut lo, mut hi) = (0.0_f64, v_bl);
        let mut x = guess.clamp(0.0, v_bl);
        for _ in 0..100 {
            let v_od = v_wl - x - pass.v_th;
            let v_ds = v_bl - x;
            let near = pass.charge(v_od);
            let ip = (near - far).max(0.0) * (1.0 + lam * v_ds);
            let dip = -(pass.charge_slope(v_od) * (1.0 + lam * v_ds) + (near - far).max(0.0) * lam);
            let (ipd, dipd) = self.pulldown(x);
            let g = ip - ipd;
            if g > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let dg = dip - dipd;
            let mut next = if dg < 0.0 { x - g / dg } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 1e-15 + 1e-13 * x.abs() || hi - lo <= 1e-16 {
                x = next;
                break;
            }
            x = next;
        }
        (self.pulldown(x).0, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> DeviceParams {
        DeviceParams::default()
    }

    #[test]
    fn cutoff_current_is_below_isub0() {
        let p = p();
        let i = transistor_current(0.0, p.v_dd_nom, &p, p.t_nom).unwrap();
        assert!(i > 0.0 && i <= p.i_sub0());
    }

    #[test]
    fn threshold_current_is_isub0() {
        let p = p();
        let i = transistor_current(p.v_th0, p.v_dd_nom, &p, p.t_nom).unwrap();
        let expect = p.i_sub0() * (1.0 + p.lambda_cl * p.v_dd_nom);
        assert!((i - expect).abs() <= 1e-9 * expect, "{i} vs {expect}");
    }

    #[test]
    fn saturation_is_square_law() {
        let p = p();
        let i = transistor_current(p.v_th0 + 0.3, p.v_dd_nom, &p, p.t_nom).unwrap();
        // k/2 · 0.09 · (1 + λ·1.2), evaluated by hand for the defaults.
        let expect = 0.5 * 10e-6 * 0.09 * (1.0 + 0.1 * 1.2);
        assert!((i - expect).abs() <= 1e-9 * expect, "{i} vs {expect}");
    }

    #[test]
    fn continuous_across_saturation_boundary() {
        let p = p();
        let v_gs = p.v_th0 + 0.4;
        let below = transistor_current(v_gs, 0.4 - 1e-9, &p, p.t_nom).unwrap();
        let above = transistor_current(v_gs, 0.4 + 1e-9, &p, p.t_nom).unwrap();
        assert!((below - above).abs() < 1e-12 * above.max(1e-18) + 1e-15);
    }

    #[test]
    fn strictly_increasing_in_vgs() {
        let p = p();
        for &v_ds in &[0.01, 0.1, 0.5, 1.2] {
            let mut prev = -1.0;
            for i in 0..=240 {
                let v_gs = 0.005 * i as f64;
                let cur = transistor_current(v_gs, v_ds, &p, 300.0).unwrap();
                assert!(cur > prev, "v_ds={v_ds} v_gs={v_gs}");
                prev = cur;
            }
        }
    }

    #[test]
    fn domain_errors_name_parameter() {
        let p = p();
        let e = transistor_current(-0.1, 1.0, &p, 300.0).unwrap_err();
        assert!(e.to_string().contains("v_gs"));
        let e = transistor_current(0.5, 1.0, &p, 500.0).unwrap_err();
        assert!(e.to_string().contains("temp"));
    }

    #[test]
    fn series_path_balances_currents() {
        let p = p();
        let path = ReadPath::new(&p, 1.2, 300.0, None);
        let i = path.current(1.0, 1.1);
        let bare = PassDevice::new(&p, 300.0, None).current(1.0, 1.1);
        assert!(i > 0.0 && i < bare);
        // Stronger pull-down approaches the bare transistor.
        let mut strong = p.clone();
        strong.k_pulldown = 1.0;
        let i_strong = ReadPath::new(&strong, 1.2, 300.0, None).current(1.0, 1.1);
        assert!((i_strong - bare).abs() < 1e-3 * bare);
    }

    #[test]
    fn path_current_grows_with_supply() {
        let p = p();
        let lo = ReadPath::new(&p, 1.08, 300.0, None).current(0.8, 1.0);
        let hi = ReadPath::new(&p, 1.32, 300.0, None).current(0.8, 1.0);
        assert!(hi > lo * 1.05);
    }
}
