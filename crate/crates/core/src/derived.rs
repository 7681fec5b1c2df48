//! Quantities computed once from a configuration.

use crate::config::{Bath, SystemConfig};
use crate::constants::{PhysicalConstants, C, HBAR, TWO_PI};
use crate::dilution::{self, EffectiveOscillator, RigidityExpansion, TrapSystem};
use crate::error::Result;
use crate::thermal;

/// Trap state at the operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapState {
    pub system: TrapSystem,
    pub expansion: RigidityExpansion,
    pub oscillator: EffectiveOscillator,
    pub g_a: f64,
    /// Circulating trap power in the left sub-cavity (W).
    pub circulating_power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedParams {
    pub constants: PhysicalConstants,

    pub length: f64,
    pub t_f: f64,
    pub epsilon: f64,
    pub p_c: f64,
    /// Bare filter-cavity half-bandwidth `c T_f / 4L`.
    pub gamma: f64,
    /// Front-mirror coupling rate; equal to `gamma` for this cavity.
    pub gamma_f: f64,
    pub gamma_eps: f64,
    pub omega_0: f64,
    pub omega_0p: f64,
    pub delta: f64,
    /// Control detuning `omega_m - delta`.
    pub big_delta: f64,
    pub gbar0: f64,
    /// OMIT bandwidth from the control power and the effective `omega_m`.
    pub gamma_opt: f64,
    pub include_lower_sideband: bool,

    pub mass: f64,
    pub omega_m0: f64,
    pub gamma_m: f64,
    /// Effective (trapped) mechanical frequency.
    pub omega_m: f64,
    /// Effective quality factor.
    pub q_m: f64,

    pub p_trap: f64,
    pub t_s: f64,
    pub omega_s: f64,
    pub delta_t: f64,
    pub trap: Option<TrapState>,

    pub t_env: f64,
    /// Temperature that drives the thermal force.
    pub temperature: f64,
}

/// OMIT bandwidth `4 P_c omega_0 / (m omega_m c^2 T_f)`.
pub fn gamma_opt(p_c: f64, omega_0: f64, mass: f64, omega_m: f64, t_f: f64) -> f64 {
    4.0 * p_c * omega_0 / (mass * omega_m * C * C * t_f)
}

/// Control power that gives the OMIT bandwidth `gamma_opt`.
pub fn control_power_for(gamma_opt: f64, omega_0: f64, mass: f64, omega_m: f64, t_f: f64) -> f64 {
    gamma_opt * mass * omega_m * C * C * t_f / (4.0 * omega_0)
}

/// Solves the trap at its configured operating point, if it is switched on.
pub fn trap_state(cfg: &SystemConfig) -> Result<Option<TrapState>> {
    if !cfg.trap.is_active() {
        return Ok(None);
    }
    let mut system = TrapSystem::from_config(cfg)?;
    if cfg.trap.compensate_damping {
        system = system.with_delta_t(dilution::compensated_detuning(&system));
    }
    let expansion = dilution::rigidity_expansion(&system)?;
    let o = &cfg.oscillator;
    let oscillator = dilution::effective_oscillator(o.omega_m0(), o.gamma_m(), o.m, &expansion);
    Ok(Some(TrapState {
        system,
        expansion,
        oscillator,
        g_a: system.g_a(),
        circulating_power: dilution::circulating_power(&system),
    }))
}

/// Effective `(omega_m, Q_m)`: configured overrides first, then the trap, then the bare values.
pub fn effective_mechanics(cfg: &SystemConfig, trap: Option<&TrapState>) -> (f64, f64) {
    let o = &cfg.oscillator;
    let (trapped_omega, trapped_q) = match trap {
        Some(t) => (t.oscillator.omega_m_eff, t.oscillator.q_m_eff),
        None => (o.omega_m0(), o.q_m0),
    };
    let omega_m = o.omega_m_eff_hz.map_or(trapped_omega, |f| TWO_PI * f);
    let q_m = match (o.q_m_eff, o.omega_m_eff_hz) {
        (Some(q), _) => q,
        (None, Some(_)) => omega_m / o.gamma_m(),
        (None, None) => trapped_q,
    };
    (omega_m, q_m)
}

pub fn derive(cfg: &SystemConfig) -> Result<DerivedParams> {
    let trap = trap_state(cfg)?;
    Ok(derive_with_trap(cfg, trap))
}

/// Assembles the parameters around an already solved trap.
pub fn derive_with_trap(cfg: &SystemConfig, trap: Option<TrapState>) -> DerivedParams {
    let c = &cfg.cavity;
    let o = &cfg.oscillator;
    let l = c.length;
    let gamma = C * c.t_f / (4.0 * l);
    let omega_0 = TWO_PI * C / c.lambda_control;
    let omega_0p = TWO_PI * C / cfg.trap.lambda_trap;
    let omega_s = 4.0 * C * cfg.trap.t_s.sqrt() / l;
    let (omega_m, q_m) = effective_mechanics(cfg, trap.as_ref());

    let env = &cfg.environment;
    let temperature = match env.bath {
        Bath::Environment => env.temperature,
        Bath::Hotspot => {
            // validated: hotspot needs the cantilever geometry
            let g = o.cantilever.as_ref().expect("hotspot bath needs cantilever geometry");
            let p_circ = trap.as_ref().map_or(0.0, |t| t.circulating_power);
            thermal::hotspot_temperature(
                thermal::absorbed_power(p_circ, env.absorption),
                env.temperature,
                env.kappa0,
                env.n_exp,
                g,
            )
        }
    };

    let delta = c.delta();
    DerivedParams {
        constants: PhysicalConstants::CODATA,
        length: l,
        t_f: c.t_f,
        epsilon: c.epsilon,
        p_c: c.p_c,
        gamma,
        gamma_f: gamma,
        gamma_eps: C * c.epsilon / (4.0 * l),
        omega_0,
        omega_0p,
        delta,
        big_delta: omega_m - delta,
        gbar0: (2.0 * c.p_c * omega_0 / (HBAR * C * l)).sqrt(),
        gamma_opt: gamma_opt(c.p_c, omega_0, o.m, omega_m, c.t_f),
        include_lower_sideband: c.include_lower_sideband,
        mass: o.m,
        omega_m0: o.omega_m0(),
        gamma_m: o.gamma_m(),
        omega_m,
        q_m,
        p_trap: if cfg.trap.is_active() { cfg.trap.p_trap } else { 0.0 },
        t_s: cfg.trap.t_s,
        omega_s,
        delta_t: trap.as_ref().map_or(omega_s, |t| t.system.delta_t),
        trap,
        t_env: env.temperature,
        temperature,
    }
}

impl DerivedParams {
    /// Copy with a different end loss, keeping the operating point fixed.
    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        let mut d = self.clone();
        d.epsilon = epsilon;
        d.gamma_eps = C * epsilon / (4.0 * self.length);
        d
    }

    /// Copy with a different bath temperature.
    pub fn with_temperature(&self, temperature: f64) -> Self {
        let mut d = self.clone();
        d.temperature = temperature;
        d
    }

    pub fn trap_active(&self) -> bool {
        self.trap.is_some()
    }
}
