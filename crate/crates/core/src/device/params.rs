use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::thermal_voltage;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Constants of the reference transistor model and bit-line array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceParams {
    /// Nominal threshold voltage (V).
    pub v_th0: f64,
    /// Pass-transistor transconductance factor (A/V²).
    pub k_gain: f64,
    /// Channel-length modulation (1/V).
    pub lambda_cl: f64,
    /// Subthreshold slope factor.
    pub n_sub: f64,
    /// Bit-line capacitance (F).
    pub c_bl: f64,
    /// Nominal supply (V).
    pub v_dd_nom: f64,
    /// Nominal temperature (K).
    pub t_nom: f64,
    /// Threshold reduction per kelvin (V/K).
    pub alpha_vth: f64,
    /// Mobility temperature exponent; gains scale with `(T/T_nom)^mu_exp`.
    pub mu_exp: f64,
    /// Threshold mismatch spread (V).
    pub sigma_vth: f64,
    /// Relative gain mismatch spread.
    pub sigma_k_rel: f64,
    /// Energy temperature sensitivity (1/K).
    pub leak_beta: f64,
    /// Cell pull-down transconductance factor (A/V²); 0 grounds the pass
    /// transistor's source.
    pub k_pulldown: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        DeviceParams {
            v_th0: 0.30,
            k_gain: 10e-6,
            lambda_cl: 0.1,
            n_sub: 1.5,
            c_bl: 30e-15,
            v_dd_nom: 1.2,
            t_nom: 300.0,
            alpha_vth: 1e-3,
            mu_exp: -1.5,
            sigma_vth: 0.02,
            sigma_k_rel: 0.02,
            leak_beta: 5e-4,
            k_pulldown: 1e-6,
        }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k_gain", self.k_gain),
            ("c_bl", self.c_bl),
            ("v_dd_nom", self.v_dd_nom),
            ("t_nom", self.t_nom),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::usage(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("sigma_vth", self.sigma_vth),
            ("sigma_k_rel", self.sigma_k_rel),
            ("k_pulldown", self.k_pulldown),
            ("lambda_cl", self.lambda_cl),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::usage(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("v_th0", self.v_th0),
            ("alpha_vth", self.alpha_vth),
            ("mu_exp", self.mu_exp),
            ("leak_beta", self.leak_beta),
        ] {
            if !v.is_finite() {
                return Err(Error::usage(format!("{name} must be finite")));
            }
        }
        if !(self.v_th0 > 0.0 && self.v_th0 < self.v_dd_nom) {
            return Err(Error::usage(format!(
                "v_th0 = {} must lie in (0, v_dd_nom = {})",
                self.v_th0, self.v_dd_nom
            )));
        }
        if !(self.n_sub >= 1.0) {
            return Err(Error::usage(format!(
                "n_sub must be >= 1, got {}",
                self.n_sub
            )));
        }
        Ok(())
    }

    /// Threshold at `temp`, without mismatch.
    pub fn v_th(&self, temp: f64) -> f64 {
        self.v_th0 - self.alpha_vth * (temp - self.t_nom)
    }

    /// Pass-transistor gain at `temp`, without mismatch.
    pub fn k_at(&self, temp: f64) -> f64 {
        self.k_gain * (temp / self.t_nom).powf(self.mu_exp)
    }

    /// Subthreshold current at `V_GS = V_th`, nominal temperature.
    ///
    /// Fixed by continuity with the square law: the exponential reaches the
    /// square-law value (and slope) at an overdrive of `2·n_sub·V_T`.
    pub fn i_sub0(&self) -> f64 {
        let v_b = 2.0 * self.n_sub * thermal_voltage(self.t_nom);
        0.5 * self.k_gain * v_b * v_b * (-2.0_f64).exp()
    }

    /// Energy temperature factor `1 + β·(T − T_nom)`.
    pub fn energy_temp_factor(&self, temp: f64) -> f64 {
        1.0 + self.leak_beta * (temp - self.t_nom)
    }
}

/// One Gaussian mismatch sample of the read path. The pass transistor and
/// the pull-down draw independently from the same spreads.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MismatchDraw {
    /// Pass-transistor threshold shift (V).
    pub d_vth: f64,
    /// Pass-transistor relative gain deviation.
    pub d_k_rel: f64,
    /// Pull-down threshold shift (V).
    pub d_vth_pd: f64,
    /// Pull-down relative gain deviation.
    pub d_k_pd_rel: f64,
}

impl MismatchDraw {
    pub fn sample(params: &DeviceParams, rng: &mut Rng) -> Self {
        // Spreads are validated non-negative.
        let vth = Normal::new(0.0, params.sigma_vth).expect("validated sigma");
        let k = Normal::new(0.0, params.sigma_k_rel).expect("validated sigma");
        let d_vth = vth.sample(rng);
        let d_k_rel = k.sample(rng);
        let d_vth_pd = vth.sample(rng);
        let d_k_pd_rel = k.sample(rng);
        MismatchDraw {
            d_vth,
            d_k_rel,
            d_vth_pd,
            d_k_pd_rel,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        DeviceParams::default().validate().unwrap();
    }

    #[test]
    fn rejects_threshold_above_supply() {
        let p = DeviceParams {
            v_th0: 1.5,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let p = DeviceParams {
            n_sub: 0.5,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let p: DeviceParams = serde_json::from_str(r#"{"c_bl": 4e-14}"#).unwrap();
        assert_eq!(p.c_bl, 4e-14);
        assert_eq!(p.v_dd_nom, 1.2);
        assert!(serde_json::from_str::<DeviceParams>(r#"{"cbl": 1}"#).is_err());
    }
}
