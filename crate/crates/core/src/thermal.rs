//! Cantilever mechanics and absorption heating.
//!
//! The cantilever is a clamped-free beam; heat deposited at its center
//! flows to the clamp through the cross-section `S = b h` with conductivity
//! `kappa(T) = kappa0 * T^n`.

use serde::{Deserialize, Serialize};

use crate::constants::rad_to_hz;
use crate::error::{Error, Result};

/// Root of the first clamped-free beam mode, `cos(x) cosh(x) = -1`.
const FIRST_MODE_ROOT: f64 = 1.875;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CantileverGeometry {
    #[serde(rename = "cantilever_l")]
    pub l: f64,
    #[serde(rename = "cantilever_b")]
    pub b: f64,
    #[serde(rename = "cantilever_h")]
    pub h: f64,
    pub rho: f64,
    #[serde(rename = "Y")]
    pub youngs_modulus: f64,
}

impl CantileverGeometry {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("oscillator.cantilever_l", self.l),
            ("oscillator.cantilever_b", self.b),
            ("oscillator.cantilever_h", self.h),
            ("oscillator.rho", self.rho),
            ("oscillator.Y", self.youngs_modulus),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::range(name, v, "must be positive"));
            }
        }
        if self.l <= self.b || self.l <= self.h {
            return Err(Error::range(
                "oscillator.cantilever_l",
                self.l,
                "beam must be longer than its width and thickness",
            ));
        }
        Ok(())
    }

    pub fn cross_section(&self) -> f64 {
        self.b * self.h
    }

    pub fn second_moment(&self) -> f64 {
        self.b * self.h.powi(3) / 12.0
    }

    pub fn mass(&self) -> f64 {
        self.rho * self.b * self.h * self.l
    }

    /// Beam theory gets unreliable once the beam is stubby.
    pub fn aspect_warning(&self) -> bool {
        self.l <= 3.0 * self.b.max(self.h)
    }
}

/// Fundamental angular frequency of the clamped-free beam (rad/s).
pub fn cantilever_frequency(g: &CantileverGeometry) -> f64 {
    let s = g.cross_section();
    FIRST_MODE_ROOT.powi(2) * (g.youngs_modulus * g.second_moment() / (g.rho * s * g.l.powi(4))).sqrt()
}

/// Center temperature for a given absorbed power.
pub fn hotspot_temperature(p_abs: f64, t_env: f64, kappa0: f64, n_exp: f64, g: &CantileverGeometry) -> f64 {
    let n1 = n_exp + 1.0;
    (t_env.powf(n1) + p_abs * g.l * n1 / (2.0 * g.cross_section() * kappa0)).powf(1.0 / n1)
}

/// Power conducted to the clamp when the center sits at `t0`.
pub fn conducted_power(t0: f64, t_env: f64, kappa0: f64, n_exp: f64, g: &CantileverGeometry) -> f64 {
    let n1 = n_exp + 1.0;
    2.0 * g.cross_section() * kappa0 / (g.l * n1) * (t0.powf(n1) - t_env.powf(n1))
}

pub fn temperature_gradient(t0: f64, t_env: f64, g: &CantileverGeometry) -> f64 {
    (t0 - t_env) / g.l
}

pub fn absorbed_power(p_circ: f64, absorption: f64) -> f64 {
    p_circ * absorption
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThermalSummary {
    #[serde(rename = "f0_Hz")]
    pub f0_hz: f64,
    pub mass_kg: f64,
    #[serde(rename = "T0_K")]
    pub t0_k: f64,
    #[serde(rename = "gradT_K_per_m")]
    pub grad_t_k_per_m: f64,
    #[serde(rename = "P_abs_W")]
    pub p_abs_w: f64,
    pub aspect_warning: bool,
}

/// Heating estimate for a cantilever carrying `p_circ` of circulating power.
pub fn summarize(
    g: &CantileverGeometry,
    p_circ: f64,
    absorption: f64,
    t_env: f64,
    kappa0: f64,
    n_exp: f64,
) -> ThermalSummary {
    let p_abs = absorbed_power(p_circ, absorption);
    let t0 = hotspot_temperature(p_abs, t_env, kappa0, n_exp, g);
    ThermalSummary {
        f0_hz: rad_to_hz(cantilever_frequency(g)),
        mass_kg: g.mass(),
        t0_k: t0,
        grad_t_k_per_m: temperature_gradient(t0, t_env, g),
        p_abs_w: p_abs,
        aspect_warning: g.aspect_warning(),
    }
}
