//! Design search: trap power and front-mirror transmission (and optionally
//! the bath temperature) that minimize the peak decoherence budget.
//!
//! The control power is not a free variable. It is set at every candidate so
//! that the OMIT bandwidth equals the target, and the trap detuning is always
//! chosen to cancel the optical damping. Candidates whose trapped oscillator
//! is unstable, or whose front mirror transmits less than the end loss, are
//! excluded and counted.
//!
//! The search works in log coordinates: a coarse grid over the whole box,
//! then local grids around the incumbent that shrink whenever the best point
//! is interior and recenter when it lands on the local edge.

use serde::Serialize;

use crate::budget::{s_total_max, BudgetSummary};
use crate::config::{OptimizerSettings, SystemConfig};
use crate::constants::{C, TWO_PI};
use crate::derived::{control_power_for, derive_with_trap, effective_mechanics, trap_state};
use crate::error::{Error, Result};
use crate::exec::Execution;

const SHRINK: f64 = 0.2;
const MAX_ITERATIONS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignPoint {
    pub p_trap: f64,
    pub t_f: f64,
    pub temperature: f64,
    pub p_c: f64,
    #[serde(rename = "delta_t_Hz")]
    pub delta_t_hz: f64,
    #[serde(rename = "omega_m_eff_Hz")]
    pub omega_m_eff_hz: f64,
    pub q_m_eff: f64,
    #[serde(rename = "gamma_opt_Hz")]
    pub gamma_opt_hz: f64,
    /// Peak budget `S_total` at `Omega = delta`.
    pub objective: f64,
    pub budget: BudgetSummary,
    /// Relative miss of the bandwidth target.
    pub constraint_residual: f64,
    pub inertia_warning: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceStep {
    pub iteration: usize,
    pub p_trap: f64,
    pub t_f: f64,
    pub temperature: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub best: DesignPoint,
    /// Incumbent after every improvement; the objective never increases.
    pub trace: Vec<TraceStep>,
    pub evaluations: usize,
    pub excluded: usize,
}

/// Evaluates one candidate. Excluded candidates come back as `Infeasible`.
pub fn evaluate_design(
    base: &SystemConfig,
    gamma_opt_target_hz: f64,
    p_trap: f64,
    t_f: f64,
    temperature: f64,
) -> Result<DesignPoint> {
    let mut cfg = base.clone();
    cfg.cavity.t_f = t_f;
    cfg.trap.enabled = true;
    cfg.trap.p_trap = p_trap;
    cfg.trap.compensate_damping = true;
    cfg.trap.delta_t_hz = None;
    cfg.oscillator.omega_m_eff_hz = None;
    cfg.oscillator.q_m_eff = None;
    cfg.environment.temperature = temperature;

    if cfg.cavity.epsilon >= t_f {
        return Err(Error::Infeasible(format!(
            "T_f = {t_f:e} does not exceed the end loss {:e}",
            cfg.cavity.epsilon
        )));
    }
    let trap = trap_state(&cfg)?.ok_or(Error::TrapDisabled)?;
    let osc = trap.oscillator;
    if osc.unstable || osc.anti_restoring {
        return Err(Error::Infeasible(format!(
            "trapped oscillator unstable at P_trap = {p_trap:e} W, T_f = {t_f:e}"
        )));
    }
    let delta_t = trap.system.delta_t;
    let (omega_m, _) = effective_mechanics(&cfg, Some(&trap));
    let target = TWO_PI * gamma_opt_target_hz;
    let omega_0 = TWO_PI * C / cfg.cavity.lambda_control;
    cfg.cavity.p_c = control_power_for(target, omega_0, cfg.oscillator.m, omega_m, t_f);

    let d = derive_with_trap(&cfg, Some(trap));
    let budget = s_total_max(&d);
    Ok(DesignPoint {
        p_trap,
        t_f,
        temperature: d.temperature,
        p_c: d.p_c,
        delta_t_hz: delta_t / TWO_PI,
        omega_m_eff_hz: d.omega_m / TWO_PI,
        q_m_eff: d.q_m,
        gamma_opt_hz: d.gamma_opt / TWO_PI,
        objective: budget.s_total,
        budget,
        constraint_residual: (d.gamma_opt - target).abs() / target,
        inertia_warning: osc.inertia_warning,
    })
}

/// One search axis, held in log coordinates.
#[derive(Debug, Clone, Copy)]
struct Axis {
    min: f64,
    max: f64,
    lo: f64,
    hi: f64,
}

impl Axis {
    fn new(name: &str, min: f64, max: f64) -> Result<Self> {
        if !(min > 0.0 && min.is_finite()) {
            return Err(Error::range(name, min, "lower bound must be positive"));
        }
        if !(max >= min && max.is_finite()) {
            return Err(Error::range(name, max, "upper bound below the lower bound"));
        }
        Ok(Self {
            min,
            max,
            lo: min.ln(),
            hi: max.ln(),
        })
    }

    fn fixed(&self) -> bool {
        self.min == self.max
    }

    /// Physical value; the bounds themselves map back exactly.
    fn value(&self, z: f64) -> f64 {
        if z <= self.lo {
            self.min
        } else if z >= self.hi {
            self.max
        } else {
            z.exp().clamp(self.min, self.max)
        }
    }

    fn coarse(&self, n: usize) -> Vec<f64> {
        if self.fixed() {
            return vec![self.lo];
        }
        (0..n)
            .map(|k| {
                if k + 1 == n {
                    self.hi
                } else {
                    self.lo + (self.hi - self.lo) * k as f64 / (n - 1) as f64
                }
            })
            .collect()
    }

    fn local(&self, center: f64, half: f64, n: usize) -> Vec<f64> {
        if self.fixed() || half == 0.0 {
            return vec![center];
        }
        (0..n)
            .map(|k| (center + half * (2.0 * k as f64 / (n - 1) as f64 - 1.0)).clamp(self.lo, self.hi))
            .collect()
    }

    fn interior(&self, z: f64) -> bool {
        z > self.lo && z < self.hi
    }
}

fn axes(base: &SystemConfig, s: &OptimizerSettings) -> Result<[Axis; 3]> {
    let (t_min, t_max) = match (s.t_min, s.t_max) {
        (None, None) => (base.environment.temperature, base.environment.temperature),
        (Some(lo), Some(hi)) => (lo, hi),
        (Some(_), None) => return Err(Error::Invalid("T_min given without T_max".into())),
        (None, Some(_)) => return Err(Error::Invalid("T_max given without T_min".into())),
    };
    Ok([
        Axis::new("P_trap_min", s.p_trap_min, s.p_trap_max)?,
        Axis::new("T_f_min", s.t_f_min, s.t_f_max)?,
        Axis::new("T_min", t_min, t_max)?,
    ])
}

fn check_settings(s: &OptimizerSettings) -> Result<()> {
    if s.coarse_points < 2 {
        return Err(Error::range("coarse_points", s.coarse_points as f64, "need at least 2"));
    }
    if s.refine_points < 3 {
        return Err(Error::range("refine_points", s.refine_points as f64, "need at least 3"));
    }
    if s.gamma_opt_target_hz.is_nan() || s.gamma_opt_target_hz <= 0.0 {
        return Err(Error::range(
            "gamma_opt_target_Hz",
            s.gamma_opt_target_hz,
            "must be positive",
        ));
    }
    Ok(())
}

fn cartesian(values: &[Vec<f64>; 3]) -> Vec<([usize; 3], [f64; 3])> {
    let mut out = Vec::with_capacity(values.iter().map(Vec::len).product());
    for (i, &a) in values[0].iter().enumerate() {
        for (j, &b) in values[1].iter().enumerate() {
            for (k, &c) in values[2].iter().enumerate() {
                out.push(([i, j, k], [a, b, c]));
            }
        }
    }
    out
}

struct Search<'a> {
    base: &'a SystemConfig,
    target_hz: f64,
    axes: [Axis; 3],
    exec: Execution,
    evaluations: usize,
    excluded: usize,
}

impl Search<'_> {
    fn physical(&self, z: [f64; 3]) -> [f64; 3] {
        [
            self.axes[0].value(z[0]),
            self.axes[1].value(z[1]),
            self.axes[2].value(z[2]),
        ]
    }

    /// Best point of a batch, first index winning ties.
    fn best_of(&mut self, batch: &[([usize; 3], [f64; 3])]) -> Option<([usize; 3], [f64; 3], f64)> {
        let scores = self.exec.map(batch, |(_, z)| {
            let [p, t_f, t] = self.physical(*z);
            evaluate_design(self.base, self.target_hz, p, t_f, t)
                .ok()
                .map(|d| d.objective)
        });
        self.evaluations += batch.len();
        let mut best: Option<([usize; 3], [f64; 3], f64)> = None;
        for ((idx, z), score) in batch.iter().zip(scores) {
            match score {
                Some(f) if f.is_finite() => {
                    if best.is_none_or(|b| f < b.2) {
                        best = Some((*idx, *z, f));
                    }
                }
                _ => self.excluded += 1,
            }
        }
        best
    }
}

pub fn optimize(base: &SystemConfig, settings: &OptimizerSettings, exec: Execution) -> Result<OptimizationResult> {
    check_settings(settings)?;
    let axes = axes(base, settings)?;
    let mut search = Search {
        base,
        target_hz: settings.gamma_opt_target_hz,
        axes,
        exec,
        evaluations: 0,
        excluded: 0,
    };

    let coarse = [
        axes[0].coarse(settings.coarse_points),
        axes[1].coarse(settings.coarse_points),
        axes[2].coarse(settings.coarse_points),
    ];
    let Some((_, mut center, mut objective)) = search.best_of(&cartesian(&coarse)) else {
        return Err(Error::Infeasible(format!(
            "all {} coarse candidates were excluded",
            search.evaluations
        )));
    };

    let mut trace = Vec::new();
    let step = |iteration: usize, z: [f64; 3], objective: f64, s: &Search| {
        let [p_trap, t_f, temperature] = s.physical(z);
        TraceStep {
            iteration,
            p_trap,
            t_f,
            temperature,
            objective,
        }
    };
    trace.push(step(0, center, objective, &search));

    let mut half = [0.0; 3];
    for (h, (a, v)) in half.iter_mut().zip(axes.iter().zip(&coarse)) {
        if !a.fixed() {
            *h = (a.hi - a.lo) / (v.len() - 1) as f64;
        }
    }

    let n = settings.refine_points;
    let mut shrinks = 0;
    let mut iteration = 0;
    while shrinks < settings.refine_rounds && iteration < MAX_ITERATIONS {
        iteration += 1;
        let local = [
            axes[0].local(center[0], half[0], n),
            axes[1].local(center[1], half[1], n),
            axes[2].local(center[2], half[2], n),
        ];
        let mut on_edge = false;
        if let Some((idx, z, f)) = search.best_of(&cartesian(&local)) {
            if f < objective {
                on_edge = (0..3).any(|d| {
                    local[d].len() > 1 && (idx[d] == 0 || idx[d] + 1 == local[d].len()) && axes[d].interior(z[d])
                });
                center = z;
                objective = f;
                trace.push(step(iteration, center, objective, &search));
            }
        }
        if !on_edge {
            for h in &mut half {
                *h *= SHRINK;
            }
            shrinks += 1;
        }
    }

    let [p, t_f, t] = search.physical(center);
    let best = evaluate_design(base, settings.gamma_opt_target_hz, p, t_f, t)?;
    Ok(OptimizationResult {
        best,
        trace,
        evaluations: search.evaluations,
        excluded: search.excluded,
    })
}

/// Optimized budget at one `(epsilon, L)`; `None` marks an infeasible gap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingSample {
    pub epsilon: f64,
    pub length: f64,
    pub objective: Option<f64>,
    pub design: Option<DesignPoint>,
}

/// Fit of `S = A eps^p L^q` in log space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    /// `None` when all samples share one end loss.
    pub exponent_eps: Option<f64>,
    /// `None` when all samples share one length.
    pub exponent_l: Option<f64>,
    pub prefactor: f64,
    /// RMS of the log residuals.
    pub residual: f64,
    pub samples: Vec<ScalingSample>,
    pub gaps: usize,
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 || lo == hi {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| match k {
            0 => lo,
            k if k + 1 == n => hi,
            k => (a + (b - a) * k as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

/// The `(epsilon, L)` lattice configured for the scaling study.
pub fn scaling_axes(s: &OptimizerSettings) -> (Vec<f64>, Vec<f64>) {
    (
        log_space(s.scaling_eps_min, s.scaling_eps_max, s.scaling_points),
        log_space(s.scaling_l_min, s.scaling_l_max, s.scaling_points),
    )
}

/// Least-squares power law through `(epsilon, L, S)` triples.
pub fn fit_power_law(samples: Vec<ScalingSample>) -> Result<ScalingFit> {
    let rows: Vec<[f64; 3]> = samples
        .iter()
        .filter_map(|s| match s.objective {
            Some(v) if v > 0.0 && s.epsilon > 0.0 && s.length > 0.0 => Some([s.epsilon.ln(), s.length.ln(), v.ln()]),
            _ => None,
        })
        .collect();
    let gaps = samples.len() - rows.len();
    if rows.is_empty() {
        return Err(Error::Infeasible("no usable samples for the scaling fit".into()));
    }
    let n = rows.len() as f64;
    let mean = |k: usize| rows.iter().map(|r| r[k]).sum::<f64>() / n;
    let (me, ml, ms) = (mean(0), mean(1), mean(2));
    let cov = |a: usize, ma: f64, b: usize, mb: f64| rows.iter().map(|r| (r[a] - ma) * (r[b] - mb)).sum::<f64>();
    let (see, sll, sel) = (cov(0, me, 0, me), cov(1, ml, 1, ml), cov(0, me, 1, ml));
    let (ses, sls) = (cov(0, me, 2, ms), cov(1, ml, 2, ms));

    let tiny = 1e-12 * n;
    let (p, q) = match (see > tiny, sll > tiny) {
        (true, true) => {
            let det = see * sll - sel * sel;
            if det.abs() <= 1e-12 * see * sll {
                return Err(Error::Invalid(
                    "end loss and length are collinear in the samples".into(),
                ));
            }
            (Some((ses * sll - sls * sel) / det), Some((sls * see - ses * sel) / det))
        }
        (true, false) => (Some(ses / see), None),
        (false, true) => (None, Some(sls / sll)),
        (false, false) => (None, None),
    };
    let (pv, qv) = (p.unwrap_or(0.0), q.unwrap_or(0.0));
    let intercept = ms - pv * me - qv * ml;
    let residual = (rows
        .iter()
        .map(|r| (r[2] - intercept - pv * r[0] - qv * r[1]).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(ScalingFit {
        exponent_eps: p,
        exponent_l: q,
        prefactor: intercept.exp(),
        residual,
        samples,
        gaps,
    })
}

/// Optimizes at every `(epsilon, L)` pair and fits the power law.
pub fn scaling_fit(
    base: &SystemConfig,
    settings: &OptimizerSettings,
    epsilons: &[f64],
    lengths: &[f64],
    exec: Execution,
) -> Result<ScalingFit> {
    let mut samples = Vec::with_capacity(epsilons.len() * lengths.len());
    for &epsilon in epsilons {
        for &length in lengths {
            let mut cfg = base.clone();
            cfg.cavity.epsilon = epsilon;
            cfg.cavity.length = length;
            let design = match optimize(&cfg, settings, exec) {
                Ok(r) => Some(r.best),
                Err(Error::Infeasible(_)) => None,
                Err(e) => return Err(e),
            };
            samples.push(ScalingSample {
                epsilon,
                length,
                objective: design.as_ref().map(|d| d.objective),
                design,
            });
        }
    }
    fit_power_law(samples)
}
