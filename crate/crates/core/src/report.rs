//! Recomputed design quantities set against their quoted values.
//!
//! The report never fails on a mismatch; it lists the relative deviation and
//! leaves the judgement to the reader.

use serde::Serialize;

use crate::budget::{s_total_max, thermal_condition};
use crate::config::SystemConfig;
use crate::constants::{rad_to_hz, TWO_PI};
use crate::derived::derive;
use crate::dilution::analytic_rigidity;
use crate::error::Result;
use crate::thermal;

/// Quoted values for the reference design.
pub mod claimed {
    pub const GAMMA_OPT_HZ: f64 = 100.0;
    pub const OMEGA_OPT_HZ: f64 = 20e3;
    pub const Q_M: f64 = 2e10;
    pub const GAMMA_HZ: f64 = -8e-3;
    pub const M_OPT_KG: f64 = -8.5e-15;
    /// The prose gives 100 Hz for the bare resonance; the parameter table gives 200 Hz.
    pub const OMEGA_M0_HZ: f64 = 100.0;
    pub const Q_M0: f64 = 1e8;
    pub const CIRCULATING_POWER_W: f64 = 10.0;
    pub const ABSORBED_POWER_W: f64 = 1e-4;
    pub const HOTSPOT_K: f64 = 10.0;
    pub const CANTILEVER_F0_HZ: f64 = 180.0;
    pub const MASS_KG: f64 = 500e-12;
    pub const T_OVER_Q_K: f64 = 6.0e-10;
}

/// Rows every trapped report carries, in order.
pub const CORE_ROWS: [&str; 5] = ["gamma_opt_Hz", "omega_opt_Hz", "Q_m", "Gamma_Hz", "m_opt_kg"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub parameter: String,
    pub computed: f64,
    pub claimed: f64,
    /// `(computed - claimed) / |claimed|`.
    pub rel_dev: f64,
}

impl ReportRow {
    fn new(parameter: &str, computed: f64, claimed: f64) -> Self {
        Self {
            parameter: parameter.to_string(),
            computed,
            claimed,
            rel_dev: (computed - claimed) / claimed.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn row(&self, parameter: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.parameter == parameter)
    }

    /// True when every core row is present.
    pub fn is_complete(&self) -> bool {
        CORE_ROWS.iter().all(|p| self.row(p).is_some())
    }

    /// Fixed-width table with a header line.
    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.parameter.len()).max().unwrap_or(0).max(9);
        let mut out = format!(
            "{:<width$}  {:>18}  {:>18}  {:>18}\n",
            "parameter", "computed", "claimed", "rel_dev"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<width$}  {:>18.11e}  {:>18.11e}  {:>18.11e}\n",
                r.parameter, r.computed, r.claimed, r.rel_dev
            ));
        }
        out
    }
}

pub fn consistency_report(cfg: &SystemConfig) -> Result<Report> {
    let d = derive(cfg)?;
    let mut rows = vec![ReportRow::new(
        "gamma_opt_Hz",
        rad_to_hz(d.gamma_opt),
        claimed::GAMMA_OPT_HZ,
    )];

    if let Some(trap) = &d.trap {
        let e = &trap.expansion;
        rows.push(ReportRow::new(
            "omega_opt_Hz",
            rad_to_hz(e.omega_opt),
            claimed::OMEGA_OPT_HZ,
        ));
        rows.push(ReportRow::new("Q_m", d.q_m, claimed::Q_M));
        rows.push(ReportRow::new("Gamma_Hz", rad_to_hz(e.gamma), claimed::GAMMA_HZ));
        rows.push(ReportRow::new("m_opt_kg", e.m_opt, claimed::M_OPT_KG));

        let a = analytic_rigidity(&trap.system);
        rows.push(ReportRow::new(
            "omega_opt_Hz_leading_order",
            a.omega_opt_sq.max(0.0).sqrt() / TWO_PI,
            claimed::OMEGA_OPT_HZ,
        ));
        rows.push(ReportRow::new(
            "circulating_power_W",
            trap.circulating_power,
            claimed::CIRCULATING_POWER_W,
        ));
        let p_abs = thermal::absorbed_power(trap.circulating_power, cfg.environment.absorption);
        rows.push(ReportRow::new("absorbed_power_W", p_abs, claimed::ABSORBED_POWER_W));
        if let Some(g) = &cfg.oscillator.cantilever {
            let env = &cfg.environment;
            let t0 = thermal::hotspot_temperature(p_abs, env.temperature, env.kappa0, env.n_exp, g);
            rows.push(ReportRow::new("hotspot_T0_K", t0, claimed::HOTSPOT_K));
        }
    }

    rows.push(ReportRow::new(
        "omega_m0_Hz",
        rad_to_hz(d.omega_m0),
        claimed::OMEGA_M0_HZ,
    ));
    rows.push(ReportRow::new("Q_m0", cfg.oscillator.q_m0, claimed::Q_M0));

    if d.trap.is_some() {
        let tc = thermal_condition(d.temperature, d.q_m, TWO_PI * claimed::GAMMA_OPT_HZ);
        rows.push(ReportRow::new(
            "T_over_Q_threshold_K",
            tc.threshold,
            claimed::T_OVER_Q_K,
        ));
        let law = 3e3 * d.epsilon.powf(0.8) / d.length.powf(0.4);
        if law > 0.0 {
            rows.push(ReportRow::new("S_total_max", s_total_max(&d).s_total, law));
        }
        if let Some(g) = &cfg.oscillator.cantilever {
            rows.push(ReportRow::new(
                "cantilever_f0_Hz",
                rad_to_hz(thermal::cantilever_frequency(g)),
                claimed::CANTILEVER_F0_HZ,
            ));
            rows.push(ReportRow::new("cantilever_mass_kg", g.mass(), claimed::MASS_KG));
        }
    }
    Ok(Report { rows })
}
