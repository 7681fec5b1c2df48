use std::f64::consts::PI;

use omfilter::budget::BudgetPoint;
use omfilter::config::TABLE_I;
use omfilter::derived::{derive, DerivedParams};
use omfilter::emit::round12;
use omfilter::filter::{phase_lag, solve_exact, transfer_approx};
use omfilter::squeezing::output_spectrum;
use omfilter::SystemConfig;
use proptest::prelude::*;

fn params() -> DerivedParams {
    derive(&SystemConfig::from_toml_str(TABLE_I).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lossless_response_is_all_pass(x in -1e6f64..1e6, g in 1.0f64..1e4) {
        let mut d = params();
        d.gamma_m = 0.0;
        d.gamma_opt = g;
        let h = transfer_approx(d.delta + x, &d);
        prop_assert!((h.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn budget_peaks_at_detuning(x in -1e5f64..1e5) {
        let d = params();
        let p = BudgetPoint::at(d.delta + x, &d);
        let peak = BudgetPoint::at(d.delta, &d);
        for v in [p.s_th, p.s_eps, p.s_lower, p.s_trap] {
            prop_assert!(v >= 0.0);
        }
        prop_assert!(p.s_total <= peak.s_total * (1.0 + 1e-15));
        let sum = p.s_th + p.s_eps + p.s_lower + p.s_trap;
        prop_assert!((p.s_total - sum).abs() <= 1e-15 * sum);
    }

    #[test]
    fn phase_stays_on_one_branch(a in -1e4f64..1e4, b in -1e4f64..1e4) {
        let d = params();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (p_lo, p_hi) = (phase_lag(d.delta + lo, &d), phase_lag(d.delta + hi, &d));
        prop_assert!((0.0..=2.0 * PI).contains(&p_lo));
        prop_assert!(p_hi <= p_lo);
    }

    #[test]
    fn decoupled_lossless_cavity_conserves_energy(x in -1e5f64..1e5) {
        let mut d = params();
        d.gbar0 = 0.0;
        d.gamma_eps = 0.0;
        let s = solve_exact(d.delta + x, &d).unwrap();
        prop_assert!((s.t_upper.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn added_noise_never_improves_squeezing(x in -1e4f64..1e4, r in 0.0f64..20.0) {
        let d = params();
        let clean = 10f64.powf(-r / 10.0) * transfer_approx(d.delta + x, &d).norm_sqr();
        prop_assert!(output_spectrum(d.delta + x, r, &d) >= clean);
    }

    #[test]
    fn rounding_is_idempotent(x in proptest::num::f64::NORMAL) {
        let once = round12(x);
        prop_assert_eq!(round12(once), once);
        prop_assert!(((once - x) / x).abs() <= 5e-12);
    }

    #[test]
    fn distinct_overrides_commute(t in 0.1f64..10.0, eps in 0.0f64..50.0) {
        let a = format!("T={t}");
        let b = format!("epsilon_ppm={eps}");
        let one = SystemConfig::with_overrides(TABLE_I, &[a.as_str(), b.as_str()]).unwrap();
        let two = SystemConfig::with_overrides(TABLE_I, &[b.as_str(), a.as_str()]).unwrap();
        prop_assert_eq!(one, two);
    }
}
