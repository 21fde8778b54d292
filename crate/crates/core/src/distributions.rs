//! Time statistics of the atomic motion across the beam and the dark part of
//! the cell, and their Laplace-type averages `g(λ) = ⟨e^{λτ}⟩`.
//!
//! Exact laws are provided alongside the fitted closed forms; the averaging
//! engine uses the fitted ones because their transforms are elementary.

use num_complex::Complex;

use crate::bloch::PhysicalParams;
use crate::error::{Error, Result};
use crate::numerics::dawson;
use crate::scalar::{complex_ln_1p, Real};

/// Coefficients of the fitted observation-time density `f̃_t`.
pub mod fit_t {
    pub const A: f64 = 0.708_39;
    pub const SMALL_A: f64 = 0.49;
    pub const B: f64 = 2.286;
    pub const C: f64 = 1.272;
}

/// Coefficients of the fitted dark-chord CDF `F̃′`.
pub mod fit_chord {
    pub const A: f64 = 0.89;
    pub const B: f64 = 2.56;
    pub const X0: f64 = 0.3864;
}

/// Cell-geometry time scales derived from [`PhysicalParams`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometryDerived<T> {
    pub v_t: T,
    /// Mean single beam crossing time.
    pub tau_bar: T,
    /// Mean transverse path between beam crossings.
    pub ell_perp: T,
    pub tau_bar_prime: T,
    pub tau0: T,
    /// Mean dark-regime duration; infinite when `α = 1`.
    pub tau_bar_dark: T,
    /// Rate of the shifted exponential dark-regime law; zero when `α = 1`.
    pub h: T,
    /// Mean number of elastic collisions per passage; infinite when `α = 1`.
    pub n_bar: T,
}

impl<T: Real> GeometryDerived<T> {
    pub fn new(p: &PhysicalParams<T>) -> Result<Self> {
        p.validate()?;
        let v_t = p.thermal_speed();
        let (big_r, r) = (p.cell_radius, p.beam_radius);
        let tau_bar = T::PI() * T::PI().sqrt() / T::two() * r / v_t;
        let ell = ell_perp(p);
        let tau_bar_prime = ell * T::PI().sqrt() / v_t;
        let tau0 = (big_r - r) / v_t;
        let alpha = p.elastic_prob;
        let (n_bar, tau_bar_dark, h) = if alpha == T::one() {
            (T::infinity(), T::infinity(), T::zero())
        } else if r == big_r {
            // beam fills the cell: there is no dark regime
            let n_bar = alpha / (T::one() - alpha);
            (n_bar, T::zero(), T::infinity())
        } else {
            let n_bar = alpha / (T::one() - alpha);
            let ratio = big_r * big_r / (r * r) - T::one();
            let mean = ratio * tau_bar * (n_bar + T::one()) - tau_bar_prime * n_bar;
            if !(mean > tau0) {
                return Err(Error::InvalidGeometry {
                    tau_bar_dark: mean.as_f64(),
                    tau0: tau0.as_f64(),
                });
            }
            (n_bar, mean, T::one() / (mean - tau0))
        };
        Ok(GeometryDerived {
            v_t,
            tau_bar,
            ell_perp: ell,
            tau_bar_prime,
            tau0,
            tau_bar_dark,
            h,
            n_bar,
        })
    }

    /// `r / v_T`, the unit of the fitted observation-time law.
    pub fn beam_scale(&self, p: &PhysicalParams<T>) -> T {
        p.beam_radius / self.v_t
    }

    /// `ℓ⊥ / v_T`, the unit of the fitted dark-chord law.
    pub fn chord_scale(&self) -> T {
        self.ell_perp / self.v_t
    }
}

/// Maximum beam-passing entry angle `arcsin(r/R)`.
pub fn max_entry_angle<T: Real>(p: &PhysicalParams<T>) -> T {
    (p.beam_radius / p.cell_radius).min(T::one()).asin()
}

/// Beam crossing time of a straight chord with entry angle `phi`.
pub fn chord_time<T: Real>(v_perp: T, phi: T, p: &PhysicalParams<T>) -> Result<T> {
    let max = max_entry_angle(p);
    let in_range = if p.beam_radius == p.cell_radius {
        phi >= T::zero() && phi < max
    } else {
        phi >= T::zero() && phi <= max
    };
    if !in_range {
        return Err(Error::AngleOutOfRange {
            phi: phi.as_f64(),
            max: max.as_f64(),
        });
    }
    if !(v_perp > T::zero()) {
        return Err(Error::InvalidParameter {
            name: "v_perp",
            reason: format!("transverse speed {v_perp} must be positive"),
        });
    }
    let (r, big_r) = (p.beam_radius, p.cell_radius);
    let s = big_r * phi.sin();
    let half = ((r - s) * (r + s)).max(T::zero()).sqrt();
    Ok(T::two() * half / v_perp)
}

/// CDF of the beam crossing time, `F_τ(τ) = D(X)/X` with `X = 2r/(τ v_T)`.
pub fn tau_cdf<T: Real>(tau: T, g: &GeometryDerived<T>, p: &PhysicalParams<T>) -> T {
    if !(tau > T::zero()) {
        return T::zero();
    }
    if tau == T::infinity() {
        return T::one();
    }
    let x = T::two() * p.beam_radius / (tau * g.v_t);
    (dawson(x) / x).min(T::one())
}

/// Density of the beam crossing time.
pub fn tau_density<T: Real>(tau: T, g: &GeometryDerived<T>, p: &PhysicalParams<T>) -> T {
    if !(tau > T::zero()) {
        return T::zero();
    }
    let x = T::two() * p.beam_radius / (tau * g.v_t);
    let d = dawson(x);
    ((T::one() + T::two() * x * x) * d / x - T::one()).max(T::zero()) / tau
}

/// Exact density of the time already spent in the beam by an observed atom.
pub fn f_t_exact<T: Real>(t: T, g: &GeometryDerived<T>, p: &PhysicalParams<T>) -> T {
    if t < T::zero() {
        return T::zero();
    }
    (T::one() - tau_cdf(t, g, p)) / g.tau_bar
}

fn inv_pi_32<T: Real>() -> T {
    T::one() / (T::PI() * T::PI().sqrt())
}

/// Fitted observation-time density `f̃_t(x)`, dimensionless, with the
/// published coefficients (not renormalised, see [`f_t_approx_norm`]).
pub fn f_t_approx<T: Real>(x: T) -> T {
    if x < T::zero() {
        return T::zero();
    }
    let (cap_a, a, b, c) = (
        T::lit(fit_t::A),
        T::lit(fit_t::SMALL_A),
        T::lit(fit_t::B),
        T::lit(fit_t::C),
    );
    let k = inv_pi_32::<T>();
    let middle = if x == T::zero() {
        T::zero()
    } else {
        let u = -(-a * x).exp_m1();
        T::lit(16.0 / 3.0) * k * u * u * u / (x * x)
    };
    T::two() * k * (-b * x).exp() + middle + cap_a * x * (-c * x).exp()
}

/// Derivative of [`f_t_approx`].
pub fn f_t_approx_derivative<T: Real>(x: T) -> T {
    let (cap_a, a, b, c) = (
        T::lit(fit_t::A),
        T::lit(fit_t::SMALL_A),
        T::lit(fit_t::B),
        T::lit(fit_t::C),
    );
    let k = inv_pi_32::<T>();
    let middle = if x == T::zero() {
        a * a * a
    } else {
        let e = (-a * x).exp();
        let u = -(-a * x).exp_m1();
        u * u * (T::lit(3.0) * a * e * x - T::two() * u) / (x * x * x)
    };
    -T::two() * k * b * (-b * x).exp()
        + T::lit(16.0 / 3.0) * k * middle
        + cap_a * (-c * x).exp() * (T::one() - c * x)
}

/// `ln(1 + z) − z`, accurate for small `|z|`.
fn ln_1p_minus_z<T: Real>(z: Complex<T>) -> Complex<T> {
    if z.norm() > T::lit(0.1) {
        return complex_ln_1p(z) - z;
    }
    let mut term = z;
    let mut sum = Complex::new(T::zero(), T::zero());
    for n in 2..60 {
        term = -term * z;
        let add = term / T::lit(n as f64);
        sum = sum + add;
        if add.norm() <= T::epsilon() * sum.norm() {
            break;
        }
    }
    sum
}

/// `Σ cₖ p(β₀ + k·step)` with `p(β) = β ln β`, for coefficient rows whose
/// moments of order 0, 1 and 2 vanish. For `|β₀| ≥ 1` the `ln β₀` part and the
/// first two Taylor terms of `ln(1 + k·step/β₀)` cancel exactly and are
/// removed before summing.
fn p_difference<T: Real>(beta0: Complex<T>, step: T, coeffs: &[f64]) -> Complex<T> {
    let zero = Complex::new(T::zero(), T::zero());
    if beta0.norm() >= T::one() {
        coeffs
            .iter()
            .enumerate()
            .skip(1)
            .fold(zero, |acc, (k, &c)| {
                let shift = Complex::new(step * T::lit(k as f64), T::zero());
                let beta = beta0 + shift;
                acc + beta * ln_1p_minus_z(shift / beta0) * T::lit(c)
            })
    } else {
        coeffs.iter().enumerate().fold(zero, |acc, (k, &c)| {
            let beta = beta0 + Complex::new(step * T::lit(k as f64), T::zero());
            let p = if beta == zero { zero } else { beta * beta.ln() };
            acc + p * T::lit(c)
        })
    }
}

/// Closed-form Laplace transform `g̃_t(Λ) = ∫ e^{Λx} f̃_t(x) dx` of the
/// published fit.
pub fn g_t_tilde<T: Real>(lambda: Complex<T>) -> Complex<T> {
    let (cap_a, a, b, c) = (
        T::lit(fit_t::A),
        T::lit(fit_t::SMALL_A),
        T::lit(fit_t::B),
        T::lit(fit_t::C),
    );
    let k = inv_pi_32::<T>();
    let one = Complex::new(T::one(), T::zero());
    let bl = Complex::new(b, T::zero()) - lambda;
    let cl = Complex::new(c, T::zero()) - lambda;
    let diff = p_difference(-lambda, a, &[1.0, -3.0, 3.0, -1.0]);
    one * (T::two() * k) / bl + one * cap_a / (cl * cl) + diff * (T::lit(16.0 / 3.0) * k)
}

/// `∫₀^∞ f̃_t(x) dx` for the published coefficients (slightly below one).
pub fn f_t_approx_norm<T: Real>() -> T {
    g_t_tilde(Complex::new(T::zero(), T::zero())).re
}

/// `g_t(λ) = ⟨e^{λt}⟩` over the fitted observation-time law, renormalised so
/// that `g_t(0) = 1`.
pub fn g_t<T: Real>(lambda: Complex<T>, g: &GeometryDerived<T>, p: &PhysicalParams<T>) -> Complex<T> {
    g_t_tilde(lambda * g.beam_scale(p)) / f_t_approx_norm::<T>()
}

/// `g_τ(λ) = 1 + λ τ̄ g_t(λ)`.
pub fn g_tau<T: Real>(lambda: Complex<T>, g: &GeometryDerived<T>, p: &PhysicalParams<T>) -> Complex<T> {
    Complex::new(T::one(), T::zero()) + lambda * g.tau_bar * g_t(lambda, g, p)
}

/// Mean transverse path length between consecutive beam crossings.
pub fn ell_perp<T: Real>(p: &PhysicalParams<T>) -> T {
    let (big_r, r) = (p.cell_radius, p.beam_radius);
    let q = (r / big_r).min(T::one());
    let v = big_r * ((T::one() - q) * (T::one() + q)).sqrt() - T::FRAC_PI_2() * r
        + big_r * big_r / r * q.asin();
    v.max(T::zero())
}

/// Exact dark-chord CDF `F′(τ′) = exp(−ℓ⊥²/(τ′² v_T²))`.
pub fn f_prime<T: Real>(tau: T, g: &GeometryDerived<T>) -> T {
    if g.ell_perp == T::zero() {
        return if tau >= T::zero() { T::one() } else { T::zero() };
    }
    if !(tau > T::zero()) {
        return T::zero();
    }
    let z = g.ell_perp / (tau * g.v_t);
    (-z * z).exp()
}

pub fn f_prime_density<T: Real>(tau: T, g: &GeometryDerived<T>) -> T {
    if !(tau > T::zero()) || g.ell_perp == T::zero() {
        return T::zero();
    }
    let z = g.ell_perp / (tau * g.v_t);
    T::two() * z * z / tau * (-z * z).exp()
}

/// Fitted dark-chord CDF `F̃′(x)`, dimensionless.
pub fn f_prime_approx<T: Real>(x: T) -> T {
    let (a, b, x0) = (T::lit(fit_chord::A), T::lit(fit_chord::B), T::lit(fit_chord::X0));
    let y = x - x0;
    if !(y > T::zero()) {
        return T::zero();
    }
    let u = -(-a * y).exp_m1();
    let u2 = u * u;
    T::one() - u2 * u2 / (y * y) - (-b * y).exp() * (T::one() + b * y)
}

/// Density of [`f_prime_approx`].
pub fn f_prime_approx_density<T: Real>(x: T) -> T {
    let (a, b, x0) = (T::lit(fit_chord::A), T::lit(fit_chord::B), T::lit(fit_chord::X0));
    let y = x - x0;
    if !(y > T::zero()) {
        return T::zero();
    }
    let e = (-a * y).exp();
    let u = -(-a * y).exp_m1();
    let u3 = u * u * u;
    -(T::lit(4.0) * a * e * u3 * y - T::two() * u3 * u) / (y * y * y) + b * b * y * (-b * y).exp()
}

/// Closed-form `g̃′(Λ) = ∫ e^{Λx} dF̃′(x)`.
pub fn g_prime_tilde<T: Real>(lambda: Complex<T>) -> Complex<T> {
    let (a, b, x0) = (T::lit(fit_chord::A), T::lit(fit_chord::B), T::lit(fit_chord::X0));
    let one = Complex::new(T::one(), T::zero());
    let bl = Complex::new(b, T::zero()) - lambda;
    let first = (Complex::new(T::two() * b, T::zero()) - lambda) / (bl * bl);
    let diff = p_difference(-lambda, a, &[1.0, -4.0, 6.0, -4.0, 1.0]);
    // Λ·(1/Λ) is folded into the constant so that Λ = 0 needs no limit
    (lambda * x0).exp() * (lambda * (first + diff) + one)
}

/// `g_τ′(λ)` over the fitted dark-chord law. Identically one when `ℓ⊥ = 0`.
pub fn g_tau_prime<T: Real>(lambda: Complex<T>, g: &GeometryDerived<T>) -> Complex<T> {
    g_prime_tilde(lambda * g.chord_scale())
}

/// Mean dark-regime duration. Undefined for `α = 1`.
pub fn mean_tau_dark<T: Real>(p: &PhysicalParams<T>) -> Result<T> {
    if p.elastic_prob == T::one() {
        return Err(Error::InvalidParameter {
            name: "elastic_prob",
            reason: "the dark regime is never entered when every collision is elastic".into(),
        });
    }
    Ok(GeometryDerived::new(p)?.tau_bar_dark)
}

/// `g_{τ_d}(λ) = e^{λτ₀}/(1 − λ/h)` for the shifted exponential law.
pub fn g_tau_d<T: Real>(lambda: Complex<T>, g: &GeometryDerived<T>) -> Complex<T> {
    let one = Complex::new(T::one(), T::zero());
    if g.h == T::infinity() {
        return (lambda * g.tau0).exp();
    }
    (lambda * g.tau0).exp() / (one - lambda / g.h)
}

/// A waiting-time law known through its Laplace transform, with enough
/// extra structure (density, point mass at the origin, support) to
/// evaluate `∫ e^{Aτ} dμ(τ)` by quadrature when the eigenbasis is unusable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DwellLaw<T> {
    /// Degenerate at zero.
    Instant,
    /// Time already spent in the beam by an observed atom (fitted).
    Observation { scale: T, norm: T },
    /// Single beam crossing (fitted, via the observation law).
    Crossing { scale: T, norm: T, tau_bar: T },
    /// Single dark chord (fitted).
    DarkChord { scale: T },
    /// Dark regime, shifted exponential.
    DarkRegime { tau0: T, h: T },
}

impl<T: Real> DwellLaw<T> {
    pub fn observation(g: &GeometryDerived<T>, p: &PhysicalParams<T>) -> Self {
        DwellLaw::Observation {
            scale: g.beam_scale(p),
            norm: f_t_approx_norm(),
        }
    }

    pub fn crossing(g: &GeometryDerived<T>, p: &PhysicalParams<T>) -> Self {
        DwellLaw::Crossing {
            scale: g.beam_scale(p),
            norm: f_t_approx_norm(),
            tau_bar: g.tau_bar,
        }
    }

    pub fn dark_chord(g: &GeometryDerived<T>) -> Self {
        if g.ell_perp == T::zero() {
            DwellLaw::Instant
        } else {
            DwellLaw::DarkChord {
                scale: g.chord_scale(),
            }
        }
    }

    pub fn dark_regime(g: &GeometryDerived<T>) -> Self {
        if g.h == T::infinity() {
            DwellLaw::Instant
        } else {
            DwellLaw::DarkRegime { tau0: g.tau0, h: g.h }
        }
    }

    /// `⟨e^{λτ}⟩`.
    pub fn laplace(&self, lambda: Complex<T>) -> Complex<T> {
        let one = Complex::new(T::one(), T::zero());
        match *self {
            DwellLaw::Instant => one,
            DwellLaw::Observation { scale, norm } => g_t_tilde(lambda * scale) / norm,
            DwellLaw::Crossing {
                scale,
                norm,
                tau_bar,
            } => one + lambda * tau_bar * g_t_tilde(lambda * scale) / norm,
            DwellLaw::DarkChord { scale } => g_prime_tilde(lambda * scale),
            DwellLaw::DarkRegime { tau0, h } => (lambda * tau0).exp() / (one - lambda / h),
        }
    }

    /// Absolutely continuous part of the law.
    pub fn density(&self, t: T) -> T {
        if t < T::zero() {
            return T::zero();
        }
        match *self {
            DwellLaw::Instant => T::zero(),
            DwellLaw::Observation { scale, norm } => f_t_approx(t / scale) / (scale * norm),
            DwellLaw::Crossing {
                scale,
                norm,
                tau_bar,
            } => -tau_bar * f_t_approx_derivative(t / scale) / (scale * scale * norm),
            DwellLaw::DarkChord { scale } => f_prime_approx_density(t / scale) / scale,
            DwellLaw::DarkRegime { tau0, h } => {
                if t < tau0 {
                    T::zero()
                } else {
                    h * (-h * (t - tau0)).exp()
                }
            }
        }
    }

    /// Probability mass sitting exactly at `τ = 0`. For the crossing law this
    /// is the tiny (possibly negative) residue of renormalising the fit.
    pub fn atom_at_zero(&self) -> T {
        match *self {
            DwellLaw::Instant => T::one(),
            DwellLaw::Crossing { scale, norm, tau_bar } => {
                T::one() - tau_bar * f_t_approx(T::zero()) / (scale * norm)
            }
            _ => T::zero(),
        }
    }

    /// Left end of the support of the density.
    pub fn support_start(&self) -> T {
        match *self {
            DwellLaw::DarkChord { scale } => T::lit(fit_chord::X0) * scale,
            DwellLaw::DarkRegime { tau0, .. } => tau0,
            _ => T::zero(),
        }
    }

    /// Characteristic time used to map the half line for quadrature.
    pub fn time_scale(&self) -> T {
        match *self {
            DwellLaw::Instant => T::one(),
            DwellLaw::Observation { scale, .. } | DwellLaw::Crossing { scale, .. } => scale,
            DwellLaw::DarkChord { scale } => scale,
            DwellLaw::DarkRegime { h, .. } => T::one() / h,
        }
    }

    /// Mean of the law (infinite for the observation law, whose density
    /// decays like `t⁻²`).
    pub fn mean(&self) -> T {
        match *self {
            DwellLaw::Instant => T::zero(),
            DwellLaw::Observation { .. } => T::infinity(),
            DwellLaw::Crossing { tau_bar, .. } => tau_bar,
            DwellLaw::DarkChord { scale } => {
                // x₀ + 2/b + a(20 ln 2 − 12 ln 3)
                let (a, b, x0) = (T::lit(fit_chord::A), T::lit(fit_chord::B), T::lit(fit_chord::X0));
                let i = T::lit(20.0) * T::LN_2() - T::lit(12.0) * T::lit(3.0).ln();
                scale * (x0 + T::two() / b + a * i)
            }
            DwellLaw::DarkRegime { tau0, h } => tau0 + T::one() / h,
        }
    }
}
