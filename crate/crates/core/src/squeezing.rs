//! Squeezing after the filter.
//!
//! The squeezed quadrature passes the all-pass filter and picks up the
//! decoherence budget as uncorrelated added noise:
//! `s_out = 10^(-r/10) |H|^2 + S_total`.

use serde::Serialize;

use crate::budget::BudgetPoint;
use crate::derived::DerivedParams;
use crate::exec::Execution;
use crate::filter::{phase_lag, transfer_approx};
use crate::grid::FrequencyGrid;

pub fn db_to_power(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

/// Output quadrature spectrum at `Omega` for `r_in_db` of input squeezing.
pub fn output_spectrum(big_omega: f64, r_in_db: f64, d: &DerivedParams) -> f64 {
    db_to_power(r_in_db) * transfer_approx(big_omega, d).norm_sqr() + BudgetPoint::at(big_omega, d).s_total
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SqueezingCurve {
    pub omega: Vec<f64>,
    pub s_out: Vec<f64>,
    pub db_out: Vec<f64>,
    pub r_in_db: f64,
    pub epsilon: f64,
}

impl SqueezingCurve {
    pub fn evaluate(grid: &FrequencyGrid, r_in_db: f64, d: &DerivedParams, exec: Execution) -> Self {
        let omega = grid.omegas();
        let s_out = exec.map(&omega, |&w| output_spectrum(w, r_in_db, d));
        let db_out = s_out.iter().map(|s| -10.0 * s.log10()).collect();
        Self {
            omega,
            s_out,
            db_out,
            r_in_db,
            epsilon: d.epsilon,
        }
    }
}

/// One curve per end loss, everything else held at the configured values.
pub fn squeezing_curve(
    grid: &FrequencyGrid,
    r_in_db: f64,
    epsilons: &[f64],
    d: &DerivedParams,
    exec: Execution,
) -> Vec<SqueezingCurve> {
    epsilons
        .iter()
        .map(|&eps| SqueezingCurve::evaluate(grid, r_in_db, &d.with_epsilon(eps), exec))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RotationPoint {
    pub omega: f64,
    /// Quadrature rotation angle, half the sideband phase (rad).
    pub angle: f64,
}

pub fn rotation_profile(grid: &FrequencyGrid, d: &DerivedParams) -> Vec<RotationPoint> {
    grid.omegas()
        .into_iter()
        .map(|omega| RotationPoint {
            omega,
            angle: 0.5 * phase_lag(omega, d),
        })
        .collect()
}
