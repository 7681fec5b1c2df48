//! Decoherence budget referred to the filter output, in shot-noise units.
//!
//! Every term is a Lorentzian of half-width `gamma_opt` centered on
//! `Omega = delta`, scaled by its own peak value.

use serde::Serialize;

use crate::constants::{C, HBAR, K_B};
use crate::derived::DerivedParams;
use crate::exec::Execution;
use crate::grid::FrequencyGrid;

/// `gamma^2 / (x^2 + gamma^2)`, taken as zero for a vanishing width.
fn lorentzian(x: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        return 0.0;
    }
    gamma * gamma / (x * x + gamma * gamma)
}

/// Thermal-force noise.
pub fn s_th(big_omega: f64, d: &DerivedParams) -> f64 {
    if d.gamma_opt == 0.0 {
        return 0.0;
    }
    8.0 * K_B * d.temperature / (HBAR * d.gamma_opt * d.q_m) * lorentzian(big_omega - d.delta, d.gamma_opt)
}

/// Radiation-pressure noise from the filter-cavity loss.
pub fn s_loss(big_omega: f64, d: &DerivedParams) -> f64 {
    C * d.epsilon / (d.gamma * d.length) * lorentzian(big_omega - d.delta, d.gamma_opt)
}

/// Noise from the lower sideband, which a finite `omega_m / gamma` lets through.
pub fn s_lower_sideband(big_omega: f64, d: &DerivedParams) -> f64 {
    (d.gamma / d.omega_m).powi(2) * lorentzian(big_omega - d.delta, d.gamma_opt)
}

/// Residual trap back-action through the lossy end mirror; zero without a trap.
pub fn s_trap_loss(big_omega: f64, d: &DerivedParams) -> f64 {
    if d.p_trap == 0.0 || d.gamma_opt == 0.0 {
        return 0.0;
    }
    4.0 * d.omega_0p * d.p_trap * d.epsilon / (d.mass * d.gamma_opt * d.omega_m * C * C * d.t_s * d.t_f)
        * lorentzian(big_omega - d.delta, d.gamma_opt)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetPoint {
    pub s_th: f64,
    pub s_eps: f64,
    pub s_lower: f64,
    pub s_trap: f64,
    pub s_total: f64,
}

impl BudgetPoint {
    pub fn at(big_omega: f64, d: &DerivedParams) -> Self {
        let s_th = s_th(big_omega, d);
        let s_eps = s_loss(big_omega, d);
        let s_lower = if d.include_lower_sideband {
            s_lower_sideband(big_omega, d)
        } else {
            0.0
        };
        let s_trap = s_trap_loss(big_omega, d);
        Self {
            s_th,
            s_eps,
            s_lower,
            s_trap,
            s_total: s_th + s_eps + s_lower + s_trap,
        }
    }
}

/// Budget sampled on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBudget {
    pub omega: Vec<f64>,
    pub points: Vec<BudgetPoint>,
}

impl NoiseBudget {
    pub fn evaluate(grid: &FrequencyGrid, d: &DerivedParams, exec: Execution) -> Self {
        let omega = grid.omegas();
        let points = exec.map(&omega, |&w| BudgetPoint::at(w, d));
        Self { omega, points }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThermalCondition {
    pub pass: bool,
    /// `hbar gamma_opt Q_m / (8 k_B T)`; above 1 passes.
    pub margin: f64,
    /// Largest admissible `T / Q_m` (K).
    pub threshold: f64,
    pub t_over_q: f64,
}

/// Thermal coherence requirement `8 k_B T / Q_m < hbar gamma_opt`.
pub fn thermal_condition(t: f64, q_m: f64, gamma_opt: f64) -> ThermalCondition {
    let threshold = HBAR * gamma_opt / (8.0 * K_B);
    let t_over_q = t / q_m;
    let margin = threshold / t_over_q;
    ThermalCondition {
        pass: margin > 1.0,
        margin,
        threshold,
        t_over_q,
    }
}

/// Budget at `Omega = delta`, where every term peaks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetSummary {
    pub s_th: f64,
    pub s_eps: f64,
    pub s_lower: f64,
    pub s_trap: f64,
    pub s_total: f64,
    /// Total below 1.
    pub pass: bool,
    /// `1 / s_total`; above 1 passes.
    pub margin: f64,
    pub thermal: ThermalCondition,
}

pub fn s_total_max(d: &DerivedParams) -> BudgetSummary {
    let p = BudgetPoint::at(d.delta, d);
    BudgetSummary {
        s_th: p.s_th,
        s_eps: p.s_eps,
        s_lower: p.s_lower,
        s_trap: p.s_trap,
        s_total: p.s_total,
        pass: p.s_total < 1.0,
        margin: 1.0 / p.s_total,
        thermal: thermal_condition(d.temperature, d.q_m, d.gamma_opt),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{SystemConfig, TABLE_I};
    use crate::constants::TWO_PI;
    use crate::derived::derive;
    use crate::filter::solve_exact;

    fn params(overrides: &[&str]) -> DerivedParams {
        derive(&SystemConfig::with_overrides(TABLE_I, overrides).unwrap()).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn thermal_peak_value() {
        let mut d = params(&[]);
        d.temperature = 1.0;
        d.q_m = 2e10;
        d.gamma_opt = TWO_PI * 100.0;
        // 8 * 1.380649e-23 / (1.054571817e-34 * 628.3185 * 2e10)
        let peak = 8.0 * 1.380_649e-23 / (1.054_571_817e-34 * TWO_PI * 100.0 * 2e10);
        assert!(rel(s_th(d.delta, &d), peak) < 1e-15);
        assert!((peak - 0.0833).abs() < 1e-4);
        assert!(rel(s_th(d.delta + d.gamma_opt, &d), peak / 2.0) < 1e-12);
        d.temperature = 0.0;
        assert_eq!(s_th(d.delta, &d), 0.0);
    }

    #[test]
    fn thermal_scaling() {
        let d = params(&[]);
        let base = s_th(d.delta + 37.0, &d);
        let mut hot = d.clone();
        hot.temperature *= 2.0;
        assert!(rel(s_th(d.delta + 37.0, &hot), 2.0 * base) < 1e-15);
        let mut stiff = d.clone();
        stiff.q_m *= 2.0;
        assert!(rel(s_th(d.delta + 37.0, &stiff), base / 2.0) < 1e-15);
    }

    #[test]
    fn loss_peak_is_four_eps_over_t() {
        let d = params(&[]);
        assert!(rel(s_loss(d.delta, &d), 0.16) < 1e-12);
        assert_eq!(s_loss(d.delta, &params(&["epsilon=0"])), 0.0);
        let long = params(&["L=1.0"]);
        assert!(rel(s_loss(long.delta, &long), 0.16) < 1e-12);
    }

    #[test]
    fn lower_sideband_prefactor() {
        let d = params(&["omega_m_eff_Hz=20000"]);
        let expected = (d.gamma / (TWO_PI * 20000.0)).powi(2);
        assert!(rel(s_lower_sideband(d.delta, &d), expected) < 1e-15);
        assert!((expected - 0.0889).abs() < 5e-4);
        let mut fast = d.clone();
        fast.omega_m = 1e12;
        assert!(s_lower_sideband(fast.delta, &fast) < 1e-12);
    }

    #[test]
    fn lower_sideband_tracks_exact_solver() {
        let d = params(&[]);
        let exact = solve_exact(d.delta, &d).unwrap().t_lower.norm_sqr();
        let ratio = s_lower_sideband(d.delta, &d) / exact;
        assert!(ratio > 0.1 && ratio < 10.0, "{ratio}");
    }

    #[test]
    fn loss_term_matches_passive_cavity_off_resonance() {
        // away from the transparency window the exact loss channel is the
        // bare cavity's 4 gamma_f gamma_eps / gamma_tot^2, i.e. the printed peak
        let d = params(&[]);
        let off = solve_exact(d.delta + 10.0 * d.gamma_opt, &d).unwrap().loss_gain();
        let ratio = off / s_loss(d.delta, &d);
        assert!(ratio > 0.85 && ratio <= 1.0, "{ratio}");
        let on = solve_exact(d.delta, &d).unwrap().loss_gain();
        assert!(on < 0.1 * off);
    }

    #[test]
    fn trap_term_from_spring_identity() {
        // 4 w0' P eps / (m g w c^2 Ts Tf) = 2 eps w16^2 / (g w sqrt(Ts)),
        // with w16^2 = 2 P w0' / (m c^2 sqrt(Ts) Tf)
        let d = params(&["omega_m_eff_Hz=20000"]);
        let w16_sq = 2.0 * d.p_trap * d.omega_0p / (d.mass * C * C * d.t_s.sqrt() * d.t_f);
        let expected = 2.0 * d.epsilon * w16_sq / (d.gamma_opt * d.omega_m * d.t_s.sqrt());
        assert!(rel(s_trap_loss(d.delta, &d), expected) < 1e-12);
        let double = params(&["omega_m_eff_Hz=20000", "P_trap=3.2e-3"]);
        assert!(rel(s_trap_loss(d.delta, &double), 2.0 * s_trap_loss(d.delta, &d)) < 1e-12);
        assert_eq!(
            s_trap_loss(d.delta, &params(&["omega_m_eff_Hz=20000", "epsilon=0"])),
            0.0
        );
        assert_eq!(s_trap_loss(d.delta, &params(&["trap.enabled=false"])), 0.0);
    }

    #[test]
    fn lorentzian_symmetry() {
        let d = params(&[]);
        for &x in &[0.3, 17.0, 290.0, 5e3] {
            for f in [s_th, s_loss, s_lower_sideband, s_trap_loss] {
                let a = f(d.delta + x, &d);
                let b = f(d.delta - x, &d);
                assert!(rel(a, b) < 1e-12);
            }
        }
    }

    #[test]
    fn total_is_component_sum() {
        let d = params(&[]);
        let grid = FrequencyGrid::from_hz(1.0, 1e4, 101, crate::grid::Spacing::Log).unwrap();
        let b = NoiseBudget::evaluate(&grid, &d, Execution::available());
        for p in &b.points {
            let sum = p.s_th + p.s_eps + p.s_lower + p.s_trap;
            assert!((p.s_total - sum).abs() <= 1e-15 * sum);
        }
    }

    #[test]
    fn table_i_total_and_scaling_law() {
        let s = s_total_max(&params(&[]));
        let law = 3e3 * 1e-5f64.powf(0.8) / 0.5f64.powf(0.4);
        assert!((law - 0.396).abs() < 1e-3);
        assert!(s.s_total > law / 2.0 && s.s_total < 2.0 * law, "{}", s.s_total);
        assert!(s.pass);
    }

    #[test]
    fn empty_budget() {
        let mut d = params(&["epsilon=0", "trap.enabled=false"]);
        d.temperature = 0.0;
        d.include_lower_sideband = false;
        let s = s_total_max(&d);
        assert_eq!(s.s_total, 0.0);
        assert!(s.pass);
    }

    #[test]
    fn thermal_threshold() {
        let c = thermal_condition(1.0, 2e10, TWO_PI * 100.0);
        assert!(rel(c.threshold, 6.0e-10) < 0.02);
        assert!(c.pass && c.t_over_q == 5e-11);
        let edge = thermal_condition(c.threshold * 1e10, 1e10, TWO_PI * 100.0);
        assert!((edge.margin - 1.0).abs() < 1e-15);
    }
}
