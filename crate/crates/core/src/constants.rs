//! CODATA 2018 exact values.

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K).
pub const K_B: f64 = 1.380_649e-23;
/// Speed of light in vacuum (m/s).
pub const C: f64 = 299_792_458.0;

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub k_b: f64,
    pub c: f64,
}

impl PhysicalConstants {
    pub const CODATA: Self = Self {
        hbar: HBAR,
        k_b: K_B,
        c: C,
    };
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::CODATA
    }
}

#[inline]
pub fn hz_to_rad(f: f64) -> f64 {
    TWO_PI * f
}

#[inline]
pub fn rad_to_hz(w: f64) -> f64 {
    w / TWO_PI
}
