//! Linearized filter-cavity response.
//!
//! The control field sits at detuning `big_delta = omega_m - delta` below
//! the cavity resonance. A signal sideband at `Omega` from the cavity
//! resonance lives at `omega = big_delta + Omega` from the control carrier,
//! where it beats with the mechanical motion; its mirror image at `-omega`
//! is the lower sideband. With `omega_m >> gamma` the response collapses to
//! the all-pass `(x - i g) / (x + i g)` with `x = Omega - delta`.

use num_complex::Complex64;
use serde::Serialize;

use crate::constants::{HBAR, K_B};
use crate::derived::DerivedParams;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grid::FrequencyGrid;
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Susceptibilities {
    pub chi_m: Complex64,
    pub chi_c: Complex64,
}

/// Mechanical and cavity susceptibilities at `omega` from the control carrier.
pub fn susceptibilities(omega: f64, d: &DerivedParams) -> Susceptibilities {
    Susceptibilities {
        chi_m: -1.0 / (d.mass * Complex64::new(omega * omega - d.omega_m * d.omega_m, d.gamma_m * omega)),
        chi_c: 1.0 / Complex64::new(d.gamma, -(omega - d.big_delta)),
    }
}

/// Transfer coefficients from each input port to the output at `omega`
/// (signal frequency `Omega` from the cavity resonance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidebandSolution {
    pub omega: f64,
    pub t_upper: Complex64,
    /// From the conjugate input at the image frequency.
    pub t_lower: Complex64,
    /// From the thermal force (output per newton).
    pub t_thermal: Complex64,
    /// From the loss port at `omega`.
    pub t_loss: Complex64,
    /// From the conjugate loss port at the image frequency.
    pub t_loss_conj: Complex64,
}

impl SidebandSolution {
    /// Power gain from both loss-port inputs.
    pub fn loss_gain(&self) -> f64 {
        self.t_loss.norm_sqr() + self.t_loss_conj.norm_sqr()
    }
}

/// Single-sided thermal force spectral density `8 m gamma_m k_B T` (N^2/Hz).
pub fn thermal_force_psd(d: &DerivedParams) -> f64 {
    8.0 * d.mass * d.gamma_m * K_B * d.temperature
}

/// Solves the two-sideband system for `{a(w), a^dag(-w), x(w)}` with the
/// loss port at rate `gamma_eps` and the output `a_out = -a_in + sqrt(2 gamma_f) a`.
pub fn solve_exact(big_omega: f64, d: &DerivedParams) -> Result<SidebandSolution> {
    let omega = d.big_delta + big_omega;
    let i = Complex64::i();
    let zero = Complex64::new(0.0, 0.0);
    let gamma_tot = d.gamma_f + d.gamma_eps;
    // x is carried as g * x so the rows have comparable magnitude
    let g = if d.gbar0 > 0.0 { d.gbar0 } else { 1.0 };
    let coupling = d.gbar0 / g;
    // omega^2 - omega_m^2 factored to keep the small difference exact
    let detune = big_omega - d.delta;
    let inv_chi_m = -d.mass * Complex64::new(detune * (omega + d.omega_m), d.gamma_m * omega);
    let a = vec![
        vec![
            Complex64::new(coupling, 0.0),
            Complex64::new(coupling, 0.0),
            inv_chi_m / (HBAR * g * g),
        ],
        vec![Complex64::new(gamma_tot, -big_omega), zero, i * coupling],
        vec![
            zero,
            Complex64::new(gamma_tot, -(big_omega + 2.0 * d.big_delta)),
            -i * coupling,
        ],
    ];
    let sf = (2.0 * d.gamma_f).sqrt();
    let se = (2.0 * d.gamma_eps).sqrt();
    let r = |v: f64| Complex64::new(v, 0.0);
    // columns: a_in, a_in^dag, F, l_in, l_in^dag
    let b = vec![
        vec![zero, zero, r(1.0 / (HBAR * g)), zero, zero],
        vec![r(sf), zero, zero, r(se), zero],
        vec![zero, r(sf), zero, zero, r(se)],
    ];
    let sol = linalg::solve(a, b).ok_or(Error::Singular { omega, det: 0.0 })?;
    if sol.det_abs < 1e-300 {
        return Err(Error::Singular {
            omega,
            det: sol.det_abs,
        });
    }
    let row = &sol.x[0];
    Ok(SidebandSolution {
        omega: big_omega,
        t_upper: -1.0 + sf * row[0],
        t_lower: sf * row[1],
        t_thermal: sf * row[2],
        t_loss: sf * row[3],
        t_loss_conj: sf * row[4],
    })
}

/// Two-sideband solution over a grid.
pub fn sweep_exact(grid: &FrequencyGrid, d: &DerivedParams, exec: Execution) -> Result<Vec<SidebandSolution>> {
    exec.map(&grid.omegas(), |&w| solve_exact(w, d)).into_iter().collect()
}

/// Resolved-sideband all-pass response.
pub fn transfer_approx(big_omega: f64, d: &DerivedParams) -> Complex64 {
    let x = big_omega - d.delta;
    Complex64::new(x, d.gamma_m - d.gamma_opt) / Complex64::new(x, d.gamma_m + d.gamma_opt)
}

/// OMIT bandwidth of the configured control field.
pub fn gamma_opt(d: &DerivedParams) -> f64 {
    crate::derived::gamma_opt(d.p_c, d.omega_0, d.mass, d.omega_m, d.t_f)
}

/// Resolved-sideband map from the thermal force to the output.
pub fn nth_transfer(big_omega: f64, d: &DerivedParams) -> Result<Complex64> {
    if d.gbar0 == 0.0 {
        return Err(Error::ControlOff);
    }
    let den = Complex64::new(big_omega - d.delta, d.gamma_m - d.gamma_opt);
    if den.norm() <= 1e-9 * (d.gamma_opt + d.gamma_m) {
        return Err(Error::PoleProximity { distance: den.norm() });
    }
    Ok(Complex64::i() * (2.0 * d.gamma).sqrt() * d.gamma_opt / (HBAR * d.gbar0 * den))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhasePoint {
    pub omega: f64,
    pub phase: f64,
}

/// Continuous phase lag of the all-pass response.
///
/// Equal to `-arg H` up to a multiple of `2 pi`, on the branch that is `pi`
/// at `Omega = delta`, tends to `0` far above and `2 pi` far below. It is
/// built from the two factors of `H` so coarse grids cannot unwrap onto the
/// wrong branch.
pub fn phase_lag(big_omega: f64, d: &DerivedParams) -> f64 {
    let x = big_omega - d.delta;
    (d.gamma_m + d.gamma_opt).atan2(x) - (d.gamma_m - d.gamma_opt).atan2(x)
}

pub fn phase_response(grid: &FrequencyGrid, d: &DerivedParams) -> Vec<PhasePoint> {
    grid.omegas()
        .into_iter()
        .map(|omega| PhasePoint {
            omega,
            phase: phase_lag(omega, d),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{SystemConfig, TABLE_I};
    use crate::derived::derive;
    use crate::grid::Spacing;
    use std::f64::consts::PI;

    fn params(overrides: &[&str]) -> DerivedParams {
        derive(&SystemConfig::with_overrides(TABLE_I, overrides).unwrap()).unwrap()
    }

    fn table_i() -> DerivedParams {
        params(&[])
    }

    #[test]
    fn static_and_resonant_susceptibilities() {
        let d = table_i();
        let s = susceptibilities(0.0, &d);
        assert!((s.chi_m.re * d.mass * d.omega_m.powi(2) - 1.0).abs() < 1e-14);
        assert_eq!(s.chi_m.im, 0.0);
        let s = susceptibilities(d.big_delta, &d);
        assert!((s.chi_c * d.gamma - 1.0).norm() < 1e-15);
        let s = susceptibilities(d.omega_m, &d);
        let expected = Complex64::new(0.0, 1.0 / (d.mass * d.gamma_m * d.omega_m));
        assert!((s.chi_m - expected).norm() < 1e-12 * expected.norm());
    }

    #[test]
    fn susceptibilities_invert_their_definitions() {
        let d = table_i();
        for &w in &[1.0, 3e3, d.omega_m * 0.999, 1e6] {
            let s = susceptibilities(w, &d);
            let m_inv = -d.mass * Complex64::new(w * w - d.omega_m.powi(2), d.gamma_m * w);
            assert!((s.chi_m * m_inv - 1.0).norm() < 1e-12);
            let c_inv = Complex64::new(d.gamma, -(w - d.big_delta));
            assert!((s.chi_c * c_inv - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn decoupled_cavity_is_all_pass() {
        let d = params(&["P_c=0", "epsilon=0"]);
        for &w in &[-1e5, -300.0, 0.0, 628.0, 4e4] {
            let s = solve_exact(w, &d).unwrap();
            assert!((s.t_upper.norm() - 1.0).abs() < 1e-12);
            assert_eq!(s.t_thermal.norm(), 0.0);
            let bare = Complex64::new(d.gamma, w) / Complex64::new(d.gamma, -w);
            assert!((s.t_upper - bare).norm() < 1e-12);
        }
    }

    #[test]
    fn frozen_mechanics_gives_bare_cavity() {
        let mut d = table_i();
        d.mass = 1e30;
        let s = solve_exact(d.delta, &d).unwrap();
        let gt = d.gamma_f + d.gamma_eps;
        let bare = -1.0 + 2.0 * d.gamma_f / Complex64::new(gt, -d.delta);
        assert!((s.t_upper - bare).norm() < 1e-9);
        assert!(s.t_thermal.norm() < 1e-9 * solve_exact(d.delta, &table_i()).unwrap().t_thermal.norm());
    }

    #[test]
    fn exact_thermal_noise_matches_lorentzian_peak() {
        let d = table_i();
        let s = solve_exact(d.delta, &d).unwrap();
        let exact = s.t_thermal.norm_sqr() * thermal_force_psd(&d);
        let peak = 8.0 * K_B * d.temperature / (HBAR * d.gamma_opt * d.q_m);
        let bound = 10.0 * (d.gamma / d.omega_m).powi(2);
        assert!((exact / peak - 1.0).abs() < bound, "{exact} vs {peak}");
    }

    #[test]
    fn all_pass_limits() {
        let mut d = table_i();
        d.gamma_m = 0.0;
        assert_eq!(transfer_approx(d.delta, &d), Complex64::new(-1.0, 0.0));
        let h = transfer_approx(d.delta + d.gamma_opt, &d);
        assert!((h - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        assert!((transfer_approx(d.delta + 1e6 * d.gamma_opt, &d) - 1.0).norm() < 1e-5);
        for k in -60..=60 {
            let w = d.delta + d.gamma_opt * 1.3f64.powi(k) * if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!((transfer_approx(w, &d).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bandwidth_is_linear_in_control_power() {
        let a = params(&["omega_m_eff_Hz=20000"]);
        let b = params(&["omega_m_eff_Hz=20000", "P_c=2e-4"]);
        assert!((gamma_opt(&b) / gamma_opt(&a) - 2.0).abs() < 1e-15);
        assert_eq!(gamma_opt(&params(&["P_c=0"])), 0.0);
        assert_eq!(gamma_opt(&a), a.gamma_opt);
    }

    #[test]
    fn thermal_transfer_peak_and_rolloff() {
        let mut d = table_i();
        d.gamma_m = 0.0;
        let t = nth_transfer(d.delta, &d).unwrap();
        let expected = 2.0 * d.gamma / (HBAR * d.gbar0).powi(2);
        assert!((t.norm_sqr() / expected - 1.0).abs() < 1e-12);
        assert!(nth_transfer(d.delta + 1e9, &d).unwrap().norm() < 1e-6 * t.norm());
        d.gamma_m = d.gamma_opt;
        assert!(matches!(nth_transfer(d.delta, &d), Err(Error::PoleProximity { .. })));
        assert!(matches!(
            nth_transfer(d.delta, &params(&["P_c=0"])),
            Err(Error::ControlOff)
        ));
    }

    #[test]
    fn phase_lag_is_minus_arg_of_response() {
        let d = table_i();
        for k in -40..40 {
            let w = d.delta + d.gamma_opt * 1.2f64.powi(k) * if k % 2 == 0 { 1.0 } else { -1.0 };
            let diff = phase_lag(w, &d) + transfer_approx(w, &d).arg();
            let wrapped = diff - 2.0 * PI * (diff / (2.0 * PI)).round();
            assert!(wrapped.abs() < 1e-12);
        }
    }

    #[test]
    fn phase_sweeps_two_pi() {
        let mut d = table_i();
        d.gamma_m = 0.0;
        let lo = (d.delta - 1e4 * d.gamma_opt).max(0.0);
        let grid = FrequencyGrid::new(lo, d.delta + 1e4 * d.gamma_opt, 4001, Spacing::Lin).unwrap();
        let p = phase_response(&grid, &d);
        assert!(p.last().unwrap().phase.abs() < 1e-3);
        for w in p.windows(2) {
            assert!(w[1].phase <= w[0].phase + 1e-12, "{:?}", w);
        }
        let g = FrequencyGrid::new(
            d.delta - 1e6 * d.gamma_opt,
            d.delta + 1e6 * d.gamma_opt,
            2001,
            Spacing::Lin,
        )
        .unwrap();
        let p = phase_response(&g, &d);
        let span = p[0].phase - p.last().unwrap().phase;
        assert!((span - 2.0 * PI).abs() < 1e-5);
        let mid = p[1000];
        assert!((mid.omega - d.delta).abs() < 1e-6 * d.gamma_opt);
        assert!((mid.phase - PI).abs() < 1e-9);
    }
}
