//! Coupled-cavity optical trap.
//!
//! A mirror-endowed oscillator splits a Fabry-Perot cavity into a left mode
//! `a` (front mirror rate `gamma_f`) and a right mode `b` (end mirror loss
//! rate `gamma_eps`), coupled at rate `omega_s`. A trap beam at detuning
//! `delta_t` enters through the front mirror. Everything below is linear in
//! the fluctuations around the steady state, in the trap-beam rotating frame.
//!
//! The rigidity `K(w)` is a tiny remainder of large, nearly cancelling
//! terms, so its Taylor coefficients are taken from a double-double
//! evaluation of the same expressions.

use num_complex::{Complex, Complex64};
use serde::Serialize;

use crate::config::SystemConfig;
use crate::constants::{C, HBAR, TWO_PI};
use crate::ddouble::{DoubleDouble, Real};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg;

/// Parameters of the trap cavity and the oscillator it holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapSystem {
    pub mass: f64,
    pub gamma_f: f64,
    pub gamma_eps: f64,
    pub omega_s: f64,
    pub delta_t: f64,
    /// Frequency pull per unit displacement, `omega_0' / L`.
    pub g0: f64,
    /// Drive amplitude `sqrt(P_trap / (hbar omega_0'))`.
    pub a_in: f64,
    /// Trap carrier angular frequency.
    pub omega_0p: f64,
    pub length: f64,
}

impl TrapSystem {
    /// Trap as configured, with `delta_t` defaulting to the doublet resonance.
    /// Damping compensation is not applied here; see [`compensated_detuning`].
    pub fn from_config(cfg: &SystemConfig) -> Result<Self> {
        if !cfg.trap.is_active() {
            return Err(Error::TrapDisabled);
        }
        let l = cfg.cavity.length;
        let omega_0p = TWO_PI * C / cfg.trap.lambda_trap;
        let omega_s = 4.0 * C * cfg.trap.t_s.sqrt() / l;
        Ok(Self {
            mass: cfg.oscillator.m,
            gamma_f: C * cfg.cavity.t_f / (4.0 * l),
            gamma_eps: C * cfg.cavity.epsilon / (4.0 * l),
            omega_s,
            delta_t: cfg.trap.delta_t_hz.map_or(omega_s, |f| TWO_PI * f),
            g0: omega_0p / l,
            a_in: (cfg.trap.p_trap / (HBAR * omega_0p)).sqrt(),
            omega_0p,
            length: l,
        })
    }

    pub fn with_delta_t(mut self, delta_t: f64) -> Self {
        self.delta_t = delta_t;
        self
    }

    pub fn with_gamma_eps(mut self, gamma_eps: f64) -> Self {
        self.gamma_eps = gamma_eps;
        self
    }

    pub fn p_trap(&self) -> f64 {
        self.a_in * self.a_in * HBAR * self.omega_0p
    }

    /// Small parameter of the leading-order expansions.
    pub fn eta(&self) -> f64 {
        ((self.delta_t - self.omega_s) / self.omega_s)
            .abs()
            .max(self.gamma_eps / self.gamma_f)
    }

    /// `|G_a|` with `G_a = G_0 a_bar`.
    pub fn g_a(&self) -> f64 {
        Kernel::<f64>::new(self).ga.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyFields {
    pub a_bar: Complex64,
    pub b_bar: Complex64,
    pub a_in_bar: f64,
}

/// Steady intracavity amplitudes for single-sided pumping.
pub fn steady_fields(sys: &TrapSystem) -> SteadyFields {
    let k = Kernel::<f64>::new(sys);
    SteadyFields {
        a_bar: k.a_bar,
        b_bar: k.b_bar,
        a_in_bar: sys.a_in,
    }
}

/// Circulating power in the left sub-cavity, normalized so the resonant
/// overcoupled case gives `2 P_trap / T_f`.
pub fn circulating_power(sys: &TrapSystem) -> f64 {
    let a = steady_fields(sys).a_bar;
    a.norm_sqr() * HBAR * sys.omega_0p * C / (4.0 * sys.length)
}

/// Response of one sub-cavity mode to displacement and the two input ports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeCoefficients {
    pub x: Complex64,
    pub a_in: Complex64,
    pub b_in: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluctuationFields {
    pub a: ModeCoefficients,
    pub b: ModeCoefficients,
    /// Largest relative gap between the closed form and a direct linear solve.
    pub solve_mismatch: f64,
}

/// Closed-form fluctuation fields at `omega`, cross-checked by a direct solve.
pub fn fluctuation_fields(sys: &TrapSystem, omega: f64) -> Result<FluctuationFields> {
    let k = Kernel::<DoubleDouble>::new(sys);
    let [a, b] = k.fields(DoubleDouble::new(omega));
    let (a, b) = (a.to_f64(), b.to_f64());
    let [na, nb] = fluctuation_fields_numeric(sys, omega)?;
    // the x terms cancel near the doublet, so compare against the size of
    // the individual contributions rather than their sum
    let u = omega + sys.delta_t;
    let d = Complex64::new(
        u * u - sys.omega_s.powi(2) - sys.gamma_eps * sys.gamma_f,
        u * (sys.gamma_f + sys.gamma_eps),
    );
    let ga = sys.g_a();
    let x_scale = ga * (sys.omega_s + u.abs() + sys.gamma_f) / d.norm();
    let pairs = [
        (a.x, na.x, x_scale),
        (a.a_in, na.a_in, 0.0),
        (a.b_in, na.b_in, 0.0),
        (b.x, nb.x, x_scale),
        (b.a_in, nb.a_in, 0.0),
        (b.b_in, nb.b_in, 0.0),
    ];
    let mismatch = pairs
        .iter()
        .map(|(p, q, floor)| {
            let scale = p.norm().max(q.norm()).max(*floor);
            if scale == 0.0 {
                0.0
            } else {
                (p - q).norm() / scale
            }
        })
        .fold(0.0, f64::max);
    Ok(FluctuationFields {
        a,
        b,
        solve_mismatch: mismatch,
    })
}

/// The same fields from Gaussian elimination of the 2x2 system.
pub fn fluctuation_fields_numeric(sys: &TrapSystem, omega: f64) -> Result<[ModeCoefficients; 2]> {
    let k = Kernel::<f64>::new(sys);
    let i = Complex64::i();
    let u = omega + sys.delta_t;
    let a = vec![
        vec![Complex64::new(sys.gamma_f, -u), i * sys.omega_s],
        vec![i * sys.omega_s, Complex64::new(sys.gamma_eps, -u)],
    ];
    let zero = Complex64::new(0.0, 0.0);
    let rhs = vec![
        vec![-i * k.ga, Complex64::new((2.0 * sys.gamma_f).sqrt(), 0.0), zero],
        vec![i * k.gb, zero, Complex64::new((2.0 * sys.gamma_eps).sqrt(), 0.0)],
    ];
    let sol = linalg::solve(a, rhs).ok_or(Error::Singular { omega, det: 0.0 })?;
    if sol.det_abs < 1e-300 {
        return Err(Error::Singular {
            omega,
            det: sol.det_abs,
        });
    }
    let pick = |row: &Vec<Complex64>| ModeCoefficients {
        x: row[0],
        a_in: row[1],
        b_in: row[2],
    };
    Ok([pick(&sol.x[0]), pick(&sol.x[1])])
}

/// Radiation-pressure force at `omega`, split into the displacement-dependent
/// rigidity and the input-driven back-action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiationForce {
    /// Force is `-k_opt * x + F_BA`.
    pub k_opt: Complex64,
    /// Coefficient on `a_in(omega)` and on `a_in^dag(-omega)`.
    pub ba_a: (Complex64, Complex64),
    /// Coefficient on `b_in(omega)` and on `b_in^dag(-omega)`.
    pub ba_b: (Complex64, Complex64),
}

pub fn radiation_force(sys: &TrapSystem, omega: f64) -> RadiationForce {
    let k = Kernel::<f64>::new(sys);
    let f = k.force(omega);
    RadiationForce {
        k_opt: -(f[0].0 + f[0].1),
        ba_a: f[1],
        ba_b: f[2],
    }
}

/// `K_opt(omega)` in double-double precision, rounded to f64.
pub fn k_opt(sys: &TrapSystem, omega: f64) -> Complex64 {
    let k = Kernel::<DoubleDouble>::new(sys);
    let v = k.k_opt(DoubleDouble::new(omega));
    Complex64::new(v.re.to_f64(), v.im.to_f64())
}

/// Leading-order closed forms for the rigidity coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticRigidity {
    pub omega_opt_sq: f64,
    pub gamma: f64,
    pub m_opt: f64,
}

pub fn analytic_rigidity(sys: &TrapSystem) -> AnalyticRigidity {
    let g2 = sys.g_a().powi(2);
    let ws = sys.omega_s;
    let m = sys.mass;
    AnalyticRigidity {
        omega_opt_sq: HBAR * g2 / (m * ws),
        gamma: 16.0 * HBAR * g2 / (m * sys.gamma_f * ws) * (sys.delta_t - ws) / ws
            - 8.0 * HBAR * g2 * sys.gamma_f / (m * ws.powi(3)) * (sys.gamma_eps / sys.gamma_f),
        m_opt: -HBAR * g2 / ws.powi(3),
    }
}

/// `K(w) ~ m omega_opt^2 - i m Gamma w - m_opt w^2` near `w = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RigidityExpansion {
    /// Signed; negative means the optical spring is anti-restoring.
    pub omega_opt_sq: f64,
    pub omega_opt: f64,
    /// Optical damping rate (rad/s); negative is anti-damping.
    pub gamma: f64,
    pub m_opt: f64,
    pub step: f64,
    /// Largest relative change of a coefficient when the step is halved.
    pub richardson_change: f64,
    pub analytic: AnalyticRigidity,
}

/// Default finite-difference step for the expansion.
pub fn default_step(sys: &TrapSystem) -> f64 {
    1e-4 * sys.gamma_f.min(sys.omega_s)
}

pub fn rigidity_expansion(sys: &TrapSystem) -> Result<RigidityExpansion> {
    rigidity_expansion_with_step(sys, default_step(sys))
}

/// Central differences of `K` at `w = 0`, Richardson-extrapolated from steps
/// `step` and `step / 2`.
pub fn rigidity_expansion_with_step(sys: &TrapSystem, step: f64) -> Result<RigidityExpansion> {
    let scale = sys.gamma_f.min(sys.omega_s);
    if step.is_nan() || step <= 0.0 || step >= 0.1 * scale {
        return Err(Error::ExpansionWindow { step, scale });
    }
    let k = Kernel::<DoubleDouble>::new(sys);
    let coarse = k.taylor(step);
    let fine = k.taylor(step / 2.0);
    let m = sys.mass;
    // second-order error cancels in (4 fine - coarse) / 3
    let extrapolate = |a: f64, b: f64| (4.0 * b - a) / 3.0;
    let as_physical = |c: [f64; 3]| [c[0] / m, c[1] / m, -c[2]];
    let pc = as_physical(coarse);
    let pf = as_physical(fine);
    let v: Vec<f64> = (0..3).map(|j| extrapolate(pc[j], pf[j])).collect();
    // Gamma can vanish; judge each change against its natural size
    let w2 = pf[0].abs();
    let natural = [w2, w2 / sys.gamma_f, m * w2 / sys.omega_s.powi(2)];
    let change = (0..3)
        .map(|j| {
            let s = pf[j].abs().max(natural[j]);
            if s == 0.0 {
                0.0
            } else {
                (pf[j] - pc[j]).abs() / s
            }
        })
        .fold(0.0, f64::max);
    Ok(RigidityExpansion {
        omega_opt_sq: v[0],
        omega_opt: v[0].max(0.0).sqrt(),
        gamma: v[1],
        m_opt: v[2],
        step,
        richardson_change: change,
        analytic: analytic_rigidity(sys),
    })
}

/// Optical damping alone, which is all the detuning search needs.
pub fn optical_damping(sys: &TrapSystem) -> f64 {
    let k = Kernel::<DoubleDouble>::new(sys);
    let h = default_step(sys);
    let c = k.taylor(h);
    c[1] / sys.mass
}

/// Trap detuning near the doublet resonance at which the optical damping vanishes.
pub fn compensated_detuning(sys: &TrapSystem) -> f64 {
    let ws = sys.omega_s;
    let mut x0 = ws;
    let mut f0 = optical_damping(&sys.with_delta_t(x0));
    let mut x1 = ws * (1.0 + 1e-7);
    let mut f1 = optical_damping(&sys.with_delta_t(x1));
    for _ in 0..8 {
        if f1 == f0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = optical_damping(&sys.with_delta_t(x1));
        if (x1 - x0).abs() <= 1e-15 * ws {
            break;
        }
    }
    x1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackActionResult {
    /// Force noise spectral density (N^2/Hz).
    pub s_ff: f64,
    /// Leading-order value `2 hbar^2 |G_a|^2 gamma_eps / omega_s^2`.
    pub s_ff_leading: f64,
    /// Coefficient of `x` in the field leaving the front mirror.
    pub signal_coeff: Complex64,
}

/// Back-action force spectrum at `omega` with vacuum on both ports.
pub fn backaction_spectrum(sys: &TrapSystem, omega: f64) -> BackActionResult {
    let k = Kernel::<DoubleDouble>::new(sys);
    let s = k.s_ff(DoubleDouble::new(omega)).to_f64();
    let [a, _] = k.fields(DoubleDouble::new(omega));
    let out = a.x * DoubleDouble::new(2.0 * sys.gamma_f).sqrt();
    BackActionResult {
        s_ff: s,
        s_ff_leading: 2.0 * (HBAR * sys.g_a()).powi(2) * sys.gamma_eps / sys.omega_s.powi(2),
        signal_coeff: Complex64::new(out.re.to_f64(), out.im.to_f64()),
    }
}

/// Displacement signal in the outgoing field at `w = 0`, split into the
/// part reflected off the oscillator and the part transmitted from the
/// right sub-cavity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalCancellation {
    /// `-2i G_a (1 + transmitted / reflected)`: the bare reflection `-2i G_a`
    /// scaled by the interference of the two paths.
    pub coefficient: Complex64,
    pub reflected: Complex64,
    pub transmitted: Complex64,
    /// Full output coefficient `sqrt(2 gamma_f) * (reflected + transmitted) / D`.
    pub output: Complex64,
    pub g_a: Complex64,
}

pub fn signal_cancellation(sys: &TrapSystem, delta_t: f64) -> SignalCancellation {
    let s = sys.with_delta_t(delta_t);
    let k = Kernel::<DoubleDouble>::new(&s);
    let i = Complex::new(DoubleDouble::ZERO, DoubleDouble::ONE);
    let dt = DoubleDouble::new(delta_t);
    let ge = DoubleDouble::new(s.gamma_eps);
    let reflected = (i * dt - ge) * (-i * k.ga);
    let transmitted = -k.gb * DoubleDouble::new(s.omega_s);
    let two = DoubleDouble::new(2.0);
    let coefficient = -i * k.ga * two * (Complex::new(DoubleDouble::ONE, DoubleDouble::ZERO) + transmitted / reflected);
    let [a, _] = k.fields(DoubleDouble::ZERO);
    let output = a.x * DoubleDouble::new(2.0 * s.gamma_f).sqrt();
    let f = |z: Complex<DoubleDouble>| Complex64::new(z.re.to_f64(), z.im.to_f64());
    SignalCancellation {
        coefficient: f(coefficient),
        reflected: f(reflected),
        transmitted: f(transmitted),
        output: f(output),
        g_a: f(k.ga),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveOscillator {
    pub omega_m_eff: f64,
    pub q_m_eff: f64,
    /// `gamma_m + Gamma`.
    pub total_damping: f64,
    pub unstable: bool,
    pub inertia_warning: bool,
    /// The net spring constant is negative.
    pub anti_restoring: bool,
}

/// Trapped oscillator: frequencies add in quadrature, the intrinsic damping is unchanged.
pub fn effective_oscillator(
    omega_m0: f64,
    gamma_m: f64,
    mass: f64,
    expansion: &RigidityExpansion,
) -> EffectiveOscillator {
    let w2 = omega_m0 * omega_m0 + expansion.omega_opt_sq;
    let w = w2.max(0.0).sqrt();
    let total = gamma_m + expansion.gamma;
    EffectiveOscillator {
        omega_m_eff: w,
        q_m_eff: w / gamma_m,
        total_damping: total,
        unstable: total < 0.0 || w2 <= 0.0,
        inertia_warning: expansion.m_opt.abs() > 0.1 * mass,
        anti_restoring: w2 <= 0.0,
    }
}

/// `K_opt` and `S_FF` sampled on a grid of mechanical frequencies.
pub fn rigidity_samples(sys: &TrapSystem, omegas: &[f64], exec: Execution) -> Vec<(Complex64, f64)> {
    let k = Kernel::<DoubleDouble>::new(sys);
    exec.map(omegas, |&w| {
        let wd = DoubleDouble::new(w);
        let kv = k.k_opt(wd);
        (Complex64::new(kv.re.to_f64(), kv.im.to_f64()), k.s_ff(wd).to_f64())
    })
}

#[derive(Debug, Clone, Copy)]
struct Coeffs<T> {
    x: Complex<T>,
    a_in: Complex<T>,
    b_in: Complex<T>,
}

impl<T: Real> Coeffs<T> {
    fn to_f64(self) -> ModeCoefficients {
        let f = |z: Complex<T>| Complex64::new(z.re.to_f64(), z.im.to_f64());
        ModeCoefficients {
            x: f(self.x),
            a_in: f(self.a_in),
            b_in: f(self.b_in),
        }
    }
}

/// The trap model in a chosen scalar type.
struct Kernel<T> {
    hbar: T,
    gf: T,
    ge: T,
    ws: T,
    dt: T,
    sqrt_2gf: T,
    sqrt_2ge: T,
    a_bar: Complex<T>,
    b_bar: Complex<T>,
    ga: Complex<T>,
    gb: Complex<T>,
}

impl<T: Real> Kernel<T> {
    fn new(sys: &TrapSystem) -> Self {
        let r = T::from_f64;
        let (gf, ge, ws, dt) = (r(sys.gamma_f), r(sys.gamma_eps), r(sys.omega_s), r(sys.delta_t));
        let two = r(2.0);
        let sqrt_2gf = (two * gf).sqrt();
        let sqrt_2ge = (two * ge).sqrt();
        let i = Complex::new(T::zero(), T::one());
        let d0 = Complex::new(dt * dt - ws * ws - gf * ge, dt * (gf + ge));
        let ain = r(sys.a_in);
        let a_bar = (i * dt - ge) * (sqrt_2gf * ain) / d0;
        let b_bar = i * (sqrt_2gf * ws * ain) / d0;
        let g0 = r(sys.g0);
        Self {
            hbar: r(HBAR),
            gf,
            ge,
            ws,
            dt,
            sqrt_2gf,
            sqrt_2ge,
            a_bar,
            b_bar,
            ga: a_bar * g0,
            gb: b_bar * g0,
        }
    }

    fn fields(&self, w: T) -> [Coeffs<T>; 2] {
        let i = Complex::new(T::zero(), T::one());
        let u = w + self.dt;
        let d = Complex::new(u * u - self.ws * self.ws - self.ge * self.gf, u * (self.gf + self.ge));
        let pa = i * u - self.ge;
        let pb = i * u - self.gf;
        let a = Coeffs {
            x: (-self.gb * self.ws + pa * (-i * self.ga)) / d,
            a_in: pa * self.sqrt_2gf / d,
            b_in: i * (self.ws * self.sqrt_2ge) / d,
        };
        let b = Coeffs {
            x: (self.ga * self.ws + pb * (i * self.gb)) / d,
            a_in: i * (self.sqrt_2gf * self.ws) / d,
            b_in: pb * self.sqrt_2ge / d,
        };
        [a, b]
    }

    /// Force coefficients `(on port(w), on port^dag(-w))` for x, a_in, b_in.
    fn force(&self, w: T) -> [(Complex<T>, Complex<T>); 3] {
        let [a, b] = self.fields(w);
        let [am, bm] = self.fields(-w);
        let h = self.hbar;
        let pair = |pa: Complex<T>, pb: Complex<T>, qa: Complex<T>, qb: Complex<T>| {
            let direct = -(self.ga.conj() * pa - self.gb.conj() * pb) * h;
            let conj = -(self.ga * qa.conj() - self.gb * qb.conj()) * h;
            (direct, conj)
        };
        [
            pair(a.x, b.x, am.x, bm.x),
            pair(a.a_in, b.a_in, am.a_in, bm.a_in),
            pair(a.b_in, b.b_in, am.b_in, bm.b_in),
        ]
    }

    fn k_opt(&self, w: T) -> Complex<T> {
        let [(d, c), _, _] = self.force(w);
        -(d + c)
    }

    /// Symmetrized force spectrum for vacuum inputs on both ports.
    fn s_ff(&self, w: T) -> T {
        let [_, a, b] = self.force(w);
        let half = T::from_f64(0.5);
        (a.0.norm_sqr() + a.1.norm_sqr() + b.0.norm_sqr() + b.1.norm_sqr()) * half
    }

    /// Central-difference Taylor coefficients `[K(0), K'(0), K''(0)/2]`,
    /// projected on the parts that carry spring, damping and inertia.
    fn taylor(&self, h: f64) -> [f64; 3] {
        let hd = T::from_f64(h);
        let kp = self.k_opt(hd);
        let k0 = self.k_opt(T::zero());
        let km = self.k_opt(-hd);
        let two = T::from_f64(2.0);
        let c1 = (kp - km) / (two * hd);
        let c2 = (kp - k0 * two + km) / (two * hd * hd);
        // c1 = -i m Gamma, so i c1 = m Gamma
        [k0.re.to_f64(), (-c1.im).to_f64(), c2.re.to_f64()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TABLE_I;

    fn table_i() -> TrapSystem {
        TrapSystem::from_config(&SystemConfig::from_toml_str(TABLE_I).unwrap()).unwrap()
    }

    fn lossless() -> TrapSystem {
        table_i().with_gamma_eps(0.0)
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn steady_fields_satisfy_stationary_equations() {
        for sys in [table_i(), table_i().with_delta_t(1.3 * table_i().omega_s)] {
            let f = steady_fields(&sys);
            let i = Complex64::i();
            // 0 = (i dt - gf) a - i ws b + sqrt(2 gf) a_in
            let r1 = (i * sys.delta_t - sys.gamma_f) * f.a_bar - i * sys.omega_s * f.b_bar
                + (2.0 * sys.gamma_f).sqrt() * sys.a_in;
            // 0 = (i dt - ge) b - i ws a
            let r2 = (i * sys.delta_t - sys.gamma_eps) * f.b_bar - i * sys.omega_s * f.a_bar;
            let scale = sys.omega_s * f.a_bar.norm();
            assert!(r1.norm() / scale < 1e-12);
            assert!(r2.norm() / scale < 1e-12);
        }
    }

    #[test]
    fn resonant_lossless_fields_are_balanced() {
        let sys = lossless();
        let f = steady_fields(&sys);
        let expected = (2.0 / sys.gamma_f).sqrt() * sys.a_in;
        assert!(rel(f.a_bar.norm(), expected) < 1e-12);
        assert!(rel(f.b_bar.norm(), expected) < 1e-12);
        // 2 P_trap / T_f = 12.8 W
        assert!(rel(circulating_power(&sys), 2.0 * 1.6e-3 / 2.5e-4) < 1e-12);
    }

    #[test]
    fn decoupled_right_cavity_stays_dark() {
        let sys = TrapSystem {
            omega_s: 0.0,
            delta_t: 0.0,
            ..table_i()
        };
        assert_eq!(steady_fields(&sys).b_bar.norm(), 0.0);
    }

    #[test]
    fn closed_form_matches_linear_solve() {
        let base = table_i();
        for &ge in &[0.0, 1e-3 * base.gamma_f, 0.1 * base.gamma_f] {
            for &dt in &[base.omega_s, 0.9 * base.omega_s, 2.0 * base.omega_s] {
                for &w in &[0.0, 1e3, -4e4, 2e5] {
                    let sys = base.with_gamma_eps(ge).with_delta_t(dt);
                    let f = fluctuation_fields(&sys, w).unwrap();
                    assert!(f.solve_mismatch < 1e-12, "{ge} {dt} {w}: {}", f.solve_mismatch);
                }
            }
        }
    }

    #[test]
    fn closed_loss_port_carries_nothing() {
        let f = fluctuation_fields(&lossless(), 500.0).unwrap();
        assert_eq!(f.a.b_in, Complex64::new(0.0, 0.0));
        assert_eq!(f.b.b_in, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn no_trap_light_means_no_force() {
        let sys = TrapSystem { a_in: 0.0, ..table_i() };
        let f = radiation_force(&sys, 100.0);
        assert_eq!(f.k_opt.norm(), 0.0);
        assert_eq!(f.ba_a.0.norm() + f.ba_a.1.norm() + f.ba_b.0.norm(), 0.0);
    }

    /// Static spring from the steady-state force with the mirror displaced.
    /// Moving the mirror by `x` shifts the left and right resonances by
    /// `+/- G_0 x`, i.e. the detunings become `delta_t - G_0 x` and
    /// `delta_t + G_0 x`; the force is `-hbar G_0 (|a|^2 - |b|^2)`.
    fn static_force(sys: &TrapSystem, x: f64) -> f64 {
        use crate::ddouble::DoubleDouble as D;
        let d = |v: f64| D::new(v);
        let i = Complex::new(D::ZERO, D::ONE);
        let da = d(sys.delta_t) - d(sys.g0) * d(x);
        let db = d(sys.delta_t) + d(sys.g0) * d(x);
        // (i da - gf) a - i ws b = -sqrt(2 gf) a_in ; (i db - ge) b - i ws a = 0
        let p = i * da - d(sys.gamma_f);
        let q = i * db - d(sys.gamma_eps);
        let s = i * d(sys.omega_s);
        let drive = -(d(2.0 * sys.gamma_f).sqrt() * d(sys.a_in));
        let det = p * q - s * s;
        let a = q * drive / det;
        let b = s * drive / det;
        (-(d(HBAR) * d(sys.g0)) * (a.norm_sqr() - b.norm_sqr())).to_f64()
    }

    #[test]
    fn static_rigidity_matches_force_gradient() {
        for sys in [lossless(), table_i(), table_i().with_delta_t(1.01 * table_i().omega_s)] {
            let h = 1e-16;
            let grad = (static_force(&sys, h) - static_force(&sys, -h)) / (2.0 * h);
            let k0 = k_opt(&sys, 0.0);
            assert!(rel(k0.re, -grad) < 1e-6, "{} vs {}", k0.re, -grad);
            assert!(k0.im.abs() < 1e-9 * k0.re.abs());
        }
    }

    #[test]
    fn spring_constant_is_twice_the_leading_order_form() {
        // K(0) = 2 hbar |G_a|^2 / omega_s for the resonant lossless trap
        let sys = lossless();
        let e = rigidity_expansion(&sys).unwrap();
        assert!(rel(e.omega_opt_sq, 2.0 * e.analytic.omega_opt_sq) < 1e-6);
    }

    #[test]
    fn lossless_resonant_trap_has_no_damping() {
        let sys = lossless();
        let e = rigidity_expansion(&sys).unwrap();
        // Gamma is a remainder of order eta^2; compare to the damping scale
        let scale = 16.0 * HBAR * sys.g_a().powi(2) / (sys.mass * sys.gamma_f * sys.omega_s);
        assert!(e.gamma.abs() < 1e-12 * scale, "{}", e.gamma);
        assert_eq!(e.analytic.gamma, 0.0);
        assert!(e.richardson_change < 1e-3);
    }

    #[test]
    fn identity_links_trap_frequency_forms() {
        // hbar G_a^2 / (m omega_s) = 2 P omega_0' / (m c^2 sqrt(T_s) T_f)
        let cfg = SystemConfig::from_toml_str(TABLE_I).unwrap();
        let sys = lossless();
        let lhs = analytic_rigidity(&sys).omega_opt_sq;
        let rhs =
            2.0 * cfg.trap.p_trap * sys.omega_0p / (cfg.oscillator.m * C * C * cfg.trap.t_s.sqrt() * cfg.cavity.t_f);
        assert!(rel(lhs, rhs) < 1e-10);
    }

    #[test]
    fn expansion_window_is_enforced() {
        let sys = table_i();
        assert!(matches!(
            rigidity_expansion_with_step(&sys, 0.2 * sys.gamma_f),
            Err(Error::ExpansionWindow { .. })
        ));
    }

    #[test]
    fn force_noise_vanishes_without_end_loss() {
        let base = table_i();
        let lossy = backaction_spectrum(&base.with_gamma_eps(1e-3 * base.gamma_f), 0.0).s_ff;
        let clean = backaction_spectrum(&base.with_gamma_eps(0.0), 0.0).s_ff;
        assert!(clean <= 1e-10 * lossy);
    }

    #[test]
    fn signal_cancels_on_resonance() {
        let sys = lossless();
        let s = signal_cancellation(&sys, sys.omega_s);
        assert!(s.coefficient.norm() <= 1e-10 * 2.0 * s.g_a.norm());
        assert!(
            s.output.norm() <= 1e-10 * s.reflected.norm() * (2.0 * sys.gamma_f).sqrt() / (sys.omega_s * sys.gamma_f)
        );
    }

    #[test]
    fn signal_at_twice_the_doublet_frequency() {
        let sys = lossless();
        let s = signal_cancellation(&sys, 2.0 * sys.omega_s);
        let expected = -Complex64::i() * s.g_a * 2.0 * (1.0 - 0.25);
        assert!((s.coefficient - expected).norm() < 1e-12 * s.g_a.norm());
        let far = signal_cancellation(&sys, 1e4 * sys.omega_s);
        let bare = -Complex64::i() * far.g_a * 2.0;
        assert!((far.coefficient - bare).norm() < 1e-7 * bare.norm());
    }

    #[test]
    fn compensation_zeroes_damping() {
        let sys = table_i();
        let dt = compensated_detuning(&sys);
        let tuned = sys.with_delta_t(dt);
        let gamma_before = optical_damping(&sys);
        let gamma_after = optical_damping(&tuned);
        assert!(gamma_before < 0.0);
        assert!(gamma_after.abs() < 1e-6 * gamma_before.abs());
        assert!(dt > sys.omega_s);
    }

    #[test]
    fn bare_oscillator_without_spring() {
        let e = RigidityExpansion {
            omega_opt_sq: 0.0,
            omega_opt: 0.0,
            gamma: 0.0,
            m_opt: 0.0,
            step: 1.0,
            richardson_change: 0.0,
            analytic: AnalyticRigidity {
                omega_opt_sq: 0.0,
                gamma: 0.0,
                m_opt: 0.0,
            },
        };
        let o = effective_oscillator(1000.0, 1e-5, 1e-9, &e);
        assert_eq!(o.omega_m_eff, 1000.0);
        assert!((o.q_m_eff / 1e8 - 1.0).abs() < 1e-15);
        assert!(!o.unstable && !o.inertia_warning);
    }

    #[test]
    fn table_i_trap_is_anti_damped() {
        // the end-mirror loss (eta = eps / T_f = 0.04) leaves net anti-damping
        // larger than the intrinsic damping
        let sys = table_i();
        let e = rigidity_expansion(&sys).unwrap();
        let gamma_m = TWO_PI * 200.0 / 1e8;
        let o = effective_oscillator(TWO_PI * 200.0, gamma_m, sys.mass, &e);
        assert!(e.gamma < -gamma_m);
        assert!(o.unstable && !o.inertia_warning);
        assert!(
            (o.omega_m_eff / TWO_PI - 29.37e3).abs() < 0.05e3,
            "{}",
            o.omega_m_eff / TWO_PI
        );
    }
}
