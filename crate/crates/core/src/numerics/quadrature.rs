//! Quadrature rules: Gauss–Hermite, a Lorentzian-adapted rule for Doppler
//! averages, and adaptive Gauss–Kronrod integration.

use gauss_quad::hermite::GaussHermite;

use crate::error::{Error, Result};
use num_traits::Float;

use crate::scalar::Real;

/// How the nodes of a [`QuadratureRule`] were produced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QuadratureKind {
    GaussHermite,
    /// Trapezoidal rule in `u` after `x = center + width·sinh(u)`, which
    /// resolves a Lorentzian of half-width `width` riding on the Gaussian
    /// weight.
    LorentzMapped { center: f64, width: f64 },
}

/// Approximates `∫ e^{-x²} h(x) dx ≈ Σ wᵢ h(xᵢ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
    pub kind: QuadratureKind,
}

impl<T: Real> QuadratureRule<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, h: impl Fn(T) -> T) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * h(x))
            .sum()
    }
}

pub const MAX_ORDER: usize = 256;

/// Gauss–Hermite nodes and weights for the weight `e^{-x²}`, nodes ascending.
pub fn gauss_hermite<T: Real>(n: usize) -> Result<QuadratureRule<T>> {
    if n == 0 || n > MAX_ORDER {
        return Err(Error::QuadratureOrder { n });
    }
    let n = std::num::NonZeroUsize::new(n).ok_or(Error::QuadratureOrder { n })?;
    let (x, w): (Vec<f64>, Vec<f64>) = GaussHermite::new(n).into_node_weight_pairs().iter().copied().unzip();
    Ok(QuadratureRule {
        nodes: x.into_iter().map(T::lit).collect(),
        weights: w.into_iter().map(T::lit).collect(),
        kind: QuadratureKind::GaussHermite,
    })
}

/// `|x|` beyond which `e^{-x²}` (< 1e-20) is dropped by the mapped rule.
const GAUSS_CUTOFF: f64 = 6.8;

/// `n`-point rule for `∫ e^{-x²} h(x) dx` where `h` carries a Lorentzian
/// feature of half-width `width` centred at `center`.
///
/// Under `x = center + width·sinh(u)` the Lorentzian becomes `sech²u` and the
/// Gaussian cut-off becomes double-exponential, so the trapezoidal rule in `u`
/// converges geometrically on both scales.
pub fn lorentz_mapped<T: Real>(n: usize, center: f64, width: f64) -> Result<QuadratureRule<T>> {
    if !(2..=MAX_ORDER).contains(&n) {
        return Err(Error::QuadratureOrder { n });
    }
    if !(width > 0.0) || !center.is_finite() {
        return Err(Error::InvalidParameter {
            name: "quadrature width",
            reason: format!("width {width} and center {center} must be positive and finite"),
        });
    }
    let u_lo = ((-GAUSS_CUTOFF - center) / width).asinh();
    let u_hi = ((GAUSS_CUTOFF - center) / width).asinh();
    let h = (u_hi - u_lo) / (n - 1) as f64;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let u = u_lo + h * i as f64;
        let x = center + width * u.sinh();
        let end = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        nodes.push(T::lit(x));
        weights.push(T::lit(end * h * width * u.cosh() * (-x * x).exp()));
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        kind: QuadratureKind::LorentzMapped { center, width },
    })
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel: (estimate, error estimate).
fn kronrod_panel<T: Real, const N: usize>(f: &impl Fn(T) -> [T; N], a: T, b: T) -> ([T; N], T) {
    let c = (a + b) / T::two();
    let h = (b - a) / T::two();
    let mut k = [T::zero(); N];
    let mut g = [T::zero(); N];
    let fc = f(c);
    for i in 0..N {
        k[i] = fc[i] * T::lit(WGK[7]);
        g[i] = fc[i] * T::lit(WG[3]);
    }
    for j in 0..7 {
        let dx = h * T::lit(XGK[j]);
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        for i in 0..N {
            let s = f1[i] + f2[i];
            k[i] += s * T::lit(WGK[j]);
            if j % 2 == 1 {
                g[i] += s * T::lit(WG[j / 2]);
            }
        }
    }
    let mut err = T::zero();
    for i in 0..N {
        k[i] *= h;
        g[i] *= h;
        err = err.max((k[i] - g[i]).abs());
    }
    (k, err)
}

/// Globally adaptive Gauss–Kronrod integration of a vector-valued `f` over
/// `[a, b]`, refining the worst panel until the summed error estimate drops
/// below `max(abs_tol, rel_tol·‖I‖∞)`.
pub fn integrate_adaptive<T: Real, const N: usize>(
    f: impl Fn(T) -> [T; N],
    a: T,
    b: T,
    rel_tol: T,
    abs_tol: T,
) -> [T; N] {
    const MAX_PANELS: usize = 4000;
    let mut panels: Vec<(T, T, [T; N], T)> = Vec::new();
    let pieces = 8;
    for k in 0..pieces {
        let lo = a + (b - a) * T::lit(k as f64 / pieces as f64);
        let hi = a + (b - a) * T::lit((k + 1) as f64 / pieces as f64);
        let (v, e) = kronrod_panel(&f, lo, hi);
        panels.push((lo, hi, v, e));
    }
    loop {
        let mut total = [T::zero(); N];
        let mut err = T::zero();
        let mut worst = 0;
        for (idx, p) in panels.iter().enumerate() {
            for i in 0..N {
                total[i] += p.2[i];
            }
            err += p.3;
            if p.3 > panels[worst].3 {
                worst = idx;
            }
        }
        let scale = total.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if err <= abs_tol.max(rel_tol * scale) || panels.len() >= MAX_PANELS {
            return total;
        }
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = (lo + hi) / T::two();
        if !(mid > lo && mid < hi) {
            // interval exhausted at machine resolution
            return total;
        }
        let (v1, e1) = kronrod_panel(&f, lo, mid);
        let (v2, e2) = kronrod_panel(&f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
}

/// `∫_{start}^∞ f(t) dt` via `t = start + scale·u/(1-u)`.
pub fn integrate_semi_infinite<T: Real, const N: usize>(
    f: impl Fn(T) -> [T; N],
    start: T,
    scale: T,
    rel_tol: T,
    abs_tol: T,
) -> [T; N] {
    let mapped = |u: T| {
        let one_minus = T::one() - u;
        if one_minus <= T::zero() {
            return [T::zero(); N];
        }
        let t = start + scale * u / one_minus;
        let jac = scale / (one_minus * one_minus);
        let mut v = f(t);
        for x in v.iter_mut() {
            *x *= jac;
            if !Float::is_finite(*x) {
                *x = T::zero();
            }
        }
        v
    };
    integrate_adaptive(mapped, T::zero(), T::one(), rel_tol, abs_tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_bounds() {
        assert!(matches!(gauss_hermite::<f64>(0), Err(Error::QuadratureOrder { n: 0 })));
        assert!(gauss_hermite::<f64>(257).is_err());
        assert!(gauss_hermite::<f64>(256).is_ok());
    }

    #[test]
    fn one_and_two_point_rules() {
        let r = gauss_hermite::<f64>(1).unwrap();
        assert_eq!(r.nodes, vec![0.0]);
        assert!((r.weights[0] - std::f64::consts::PI.sqrt()).abs() < 1e-15);
        let r = gauss_hermite::<f64>(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r.nodes[0] + s).abs() < 1e-15 && (r.nodes[1] - s).abs() < 1e-15);
    }

    #[test]
    fn polynomial_exactness() {
        let sqrt_pi = std::f64::consts::PI.sqrt();
        for &n in &[2usize, 5, 16, 64, 128, 256] {
            let r = gauss_hermite::<f64>(n).unwrap();
            assert!((r.weights.iter().sum::<f64>() - sqrt_pi).abs() < 1e-13, "n={n}");
            let m2 = r.integrate(|x| x * x);
            assert!((m2 - sqrt_pi / 2.0).abs() < 1e-14, "n={n}");
            // highest exactly integrable degree 2n-1, checked up to degree 12
            let deg = (2 * n - 2).min(12);
            let moment: f64 = (1..deg / 2 + 1).map(|k| (2 * k - 1) as f64 / 2.0).product::<f64>() * sqrt_pi;
            let got = r.integrate(|x| x.powi(deg as i32));
            assert!(((got - moment) / moment).abs() < 1e-13, "n={n} deg={deg}");
            assert!(r.integrate(|x| x.powi((2 * n as i32 - 1).min(13))).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn lorentz_rule_resolves_narrow_feature() {
        // ∫ e^{-x²} s²/(s²+x²) dx = π s e^{s²} erfc(s)
        let s = 0.01;
        let exact = 0.031_064_553_881_791_94;
        let r = lorentz_mapped::<f64>(64, 0.0, s).unwrap();
        let got = r.integrate(|x| s * s / (s * s + x * x));
        assert!(((got - exact) / exact).abs() < 1e-12, "{got}");
        let gh = gauss_hermite::<f64>(64).unwrap().integrate(|x| s * s / (s * s + x * x));
        assert!(((gh - exact) / exact).abs() > 1e-2);
        // the smooth Gaussian background converges more slowly than the peak
        let total: f64 = r.weights.iter().sum();
        assert!((total - std::f64::consts::PI.sqrt()).abs() < 1e-8);
        let total: f64 = lorentz_mapped::<f64>(128, 0.0, s).unwrap().weights.iter().sum();
        assert!((total - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn adaptive_semi_infinite() {
        // ∫₀^∞ e^{-t} cos t dt = 1/2, ∫₀^∞ 1/(1+t)² dt = 1
        let v = integrate_semi_infinite(|t: f64| [(-t).exp() * t.cos(), 1.0 / ((1.0 + t) * (1.0 + t))], 0.0, 1.0, 1e-13, 1e-15);
        assert!((v[0] - 0.5).abs() < 1e-13);
        assert!((v[1] - 1.0).abs() < 1e-12);
    }
}
