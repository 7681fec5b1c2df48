use serde::{Deserialize, Serialize};

use crate::constants::{hz_to_rad, rad_to_hz};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Lin,
    Log,
}

/// Sideband frequency axis. Bounds are angular frequencies (rad/s).
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    omega_min: f64,
    omega_max: f64,
    count: usize,
    spacing: Spacing,
}

impl FrequencyGrid {
    pub fn new(omega_min: f64, omega_max: f64, count: usize, spacing: Spacing) -> Result<Self> {
        if count < 2 {
            return Err(Error::range("grid.count", count as f64, "need at least 2 samples"));
        }
        if !(omega_min.is_finite() && omega_max.is_finite()) || omega_max <= omega_min {
            return Err(Error::range(
                "grid.f_max_Hz",
                rad_to_hz(omega_max),
                "must exceed f_min_Hz",
            ));
        }
        if spacing == Spacing::Log && omega_min <= 0.0 {
            return Err(Error::range(
                "grid.f_min_Hz",
                rad_to_hz(omega_min),
                "log spacing needs a positive lower bound",
            ));
        }
        Ok(Self {
            omega_min,
            omega_max,
            count,
            spacing,
        })
    }

    pub fn from_hz(f_min: f64, f_max: f64, count: usize, spacing: Spacing) -> Result<Self> {
        Self::new(hz_to_rad(f_min), hz_to_rad(f_max), count, spacing)
    }

    /// Parses `fmin,fmax,count,log|lin` with frequencies in Hz.
    pub fn parse_hz(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
        let bad = || Error::Parse(format!("grid `{spec}`: expected fmin,fmax,count,log|lin"));
        if parts.len() != 4 {
            return Err(bad());
        }
        let f_min: f64 = parts[0].parse().map_err(|_| bad())?;
        let f_max: f64 = parts[1].parse().map_err(|_| bad())?;
        let count: usize = parts[2].parse().map_err(|_| bad())?;
        let spacing = match parts[3] {
            "log" => Spacing::Log,
            "lin" => Spacing::Lin,
            _ => return Err(bad()),
        };
        Self::from_hz(f_min, f_max, count, spacing)
    }

    pub fn omega_min(&self) -> f64 {
        self.omega_min
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    /// Sample points in rad/s, strictly increasing, endpoints exact.
    pub fn omegas(&self) -> Vec<f64> {
        let n = self.count;
        let last = (n - 1) as f64;
        (0..n)
            .map(|i| {
                if i == 0 {
                    return self.omega_min;
                }
                if i == n - 1 {
                    return self.omega_max;
                }
                let t = i as f64 / last;
                match self.spacing {
                    Spacing::Lin => self.omega_min + t * (self.omega_max - self.omega_min),
                    Spacing::Log => {
                        let (a, b) = (self.omega_min.ln(), self.omega_max.ln());
                        (a + t * (b - a)).exp()
                    }
                }
            })
            .collect()
    }
}
