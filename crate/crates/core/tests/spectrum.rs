use cpt_core::averaging::{evaluate, rho33_average, sweep, symmetric_grid, AveragingOptions, VelocityRule};
use cpt_core::distributions::{g_t, g_tau, g_tau_d, g_tau_prime, GeometryDerived};
use cpt_core::{Error, Params, Params32};
use num_complex::Complex64;

fn opts() -> AveragingOptions {
    AveragingOptions::default()
}

#[test]
fn single_and_double_precision_agree() {
    for &alpha in &[0.0, 0.5, 1.0] {
        for &omega in &[0.0, 2.0e3, -4.0e4] {
            let d = rho33_average(&Params::default().with_alpha(alpha).with_detuning(omega), &opts()).unwrap();
            let p32 = Params32::default().with_alpha(alpha as f32).with_detuning(omega as f32);
            let s = rho33_average(&p32, &opts()).unwrap() as f64;
            assert!(((s - d) / d).abs() < 1e-4, "alpha {alpha} omega {omega}: {s} vs {d}");
        }
    }
}

#[test]
fn dip_at_two_photon_resonance() {
    for &alpha in &[0.0, 0.5, 1.0] {
        let p = Params::default().with_alpha(alpha);
        let s = sweep(&p, &symmetric_grid(2.0 * std::f64::consts::PI * 5e4, 101), &opts()).unwrap();
        let centre = s.points[50].1;
        assert!(s.values().all(|v| v >= centre), "alpha {alpha}");
        assert!(s.points[0].1 > 1.2 * centre);
        assert_eq!(s.meta.quadrature_order, 128);
        assert_eq!(s.meta.fallbacks, 0);
        assert!(s.meta.max_radius < 1.0);
    }
}

#[test]
fn elastic_limit_is_continuous() {
    let at = |a: f64| rho33_average(&Params::default().with_alpha(a), &opts()).unwrap();
    let s1 = at(1.0);
    let near = at(1.0 - 1e-9);
    assert!(((near - s1) / s1).abs() < 1e-7, "{near} vs {s1}");
}

#[test]
fn off_resonant_lasers_barely_excite() {
    let two_pi = 2.0 * std::f64::consts::PI;
    let on = rho33_average(&Params::default(), &opts()).unwrap();
    let p = Params { detuning_optical: two_pi * 3e9, ..Params::default() };
    let off = rho33_average(&p, &opts()).unwrap();
    assert!(off < 1e-3 * on, "{off} vs {on}");
}

#[test]
fn gauss_hermite_rule_converges_slowly() {
    let p = Params::default().with_alpha(0.5);
    let lorentz = rho33_average(&p, &opts()).unwrap();
    // plain Gauss-Hermite under-resolves the Doppler Lorentzian and only
    // creeps towards the mapped rule as the order grows
    let err = |order| {
        let gh = AveragingOptions { rule: VelocityRule::GaussHermite, order };
        (rho33_average(&p, &gh).unwrap() / lorentz - 1.0).abs()
    };
    let (e64, e128, e256) = (err(64), err(128), err(256));
    assert!(e64 > e128 && e128 > e256 && e256 > 0.1, "{e64} {e128} {e256}");
    assert!(evaluate(&p, &AveragingOptions { order: 0, ..opts() }).is_err());
}

#[test]
fn transforms_are_probability_averages() {
    let p = Params::default().with_alpha(0.5);
    let g = GeometryDerived::new(&p).unwrap();
    let zero = Complex64::new(0.0, 0.0);
    for v in [g_t(zero, &g, &p), g_tau(zero, &g, &p), g_tau_prime(zero, &g), g_tau_d(zero, &g)] {
        assert!((v - 1.0).norm() < 1e-12, "{v}");
    }
    // −dg/dλ at 0 is the mean, for the laws with a finite one
    let h = 1e-3;
    let mean = |f: &dyn Fn(Complex64) -> Complex64, scale: f64| {
        let l = Complex64::new(h / scale, 0.0);
        ((f(l) - f(-l)) / (2.0 * l)).re
    };
    let tau = mean(&|l| g_tau(l, &g, &p), g.tau_bar);
    assert!((tau / g.tau_bar - 1.0).abs() < 1e-5, "{tau} vs {}", g.tau_bar);
    let chord = mean(&|l| g_tau_prime(l, &g), g.tau_bar_prime);
    assert!((chord / g.tau_bar_prime - 1.0).abs() < 1e-4, "{chord} vs {}", g.tau_bar_prime);
    let dark = mean(&|l| g_tau_d(l, &g), g.tau_bar_dark);
    assert!((dark / g.tau_bar_dark - 1.0).abs() < 1e-5);
    // decaying oscillations stay inside the unit disc
    for k in 0..40 {
        let l = Complex64::new(-300.0, 1e2 * 1.4f64.powi(k));
        for v in [g_t(l, &g, &p), g_tau(l, &g, &p), g_tau_prime(l, &g), g_tau_d(l, &g)] {
            assert!(v.norm() <= 1.0 + 1e-9, "{l}: {v}");
        }
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    let bad = Params { beam_radius: 6e-3, ..Params::default() };
    assert!(matches!(rho33_average(&bad, &opts()), Err(Error::InvalidParameter { .. })));
    let neg = Params::default().with_alpha(-0.1);
    assert!(rho33_average(&neg, &opts()).is_err());
    let hot = Params { temperature: 0.0, ..Params::default() };
    assert!(rho33_average(&hot, &opts()).is_err());
}
