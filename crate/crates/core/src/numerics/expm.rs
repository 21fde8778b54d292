use crate::linalg::{Mat3, Vec3};
use num_traits::Zero;

use crate::scalar::{Entry, Real};

const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// Largest 1-norm for which the degree-13 Padé approximant is accurate to
/// double-precision round-off.
const THETA13: f64 = 5.371_920_351_148_152;

/// `exp(A·t)` by scaling and squaring with a [13/13] Padé approximant.
pub fn expm<E: Entry>(a: &Mat3<E>, t: E::Real) -> Mat3<E> {
    let at = a.scale(E::from_real(t));
    let norm = at.norm_1();
    if norm == E::Real::zero() {
        return Mat3::identity();
    }
    let ratio = (norm / E::Real::lit(THETA13)).as_f64();
    let squarings = if ratio > 1.0 { ratio.log2().ceil() as i32 } else { 0 };
    let scaled = at.scale(E::from_real(E::Real::lit(0.5f64.powi(squarings))));

    let b = |k: usize| E::from_real(E::Real::lit(PADE13[k]));
    let id = Mat3::identity();
    let a2 = scaled * scaled;
    let a4 = a2 * a2;
    let a6 = a4 * a2;
    let u_inner = a6 * (a6.scale(b(13)) + a4.scale(b(11)) + a2.scale(b(9)))
        + a6.scale(b(7))
        + a4.scale(b(5))
        + a2.scale(b(3))
        + id.scale(b(1));
    let u = scaled * u_inner;
    let v = a6 * (a6.scale(b(12)) + a4.scale(b(10)) + a2.scale(b(8)))
        + a6.scale(b(6))
        + a4.scale(b(4))
        + a2.scale(b(2))
        + id.scale(b(0));
    let lu = (v - u)
        .lu()
        .expect("Padé denominator is nonsingular within the scaling bound");
    let p = v + u;
    let cols = [0, 1, 2].map(|j| lu.solve(&p.column(j)));
    let mut r = Mat3::from_columns(cols);
    for _ in 0..squarings {
        r = r * r;
    }
    r
}

/// `exp(A·t)·v` without forming the product explicitly at the call site.
pub fn expm_apply<E: Entry>(a: &Mat3<E>, t: E::Real, v: &Vec3<E>) -> Vec3<E> {
    expm(a, t).mul_vec(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::eigen::eigen_decompose;
    use num_complex::Complex;
    use num_traits::Zero;

    #[test]
    fn zero_time_is_identity() {
        let a = Mat3([[-3.0, 1.0, 0.0], [2.0, -5.0, 1.0], [0.0, 4.0, -1.0]]);
        assert_eq!(expm(&a, 0.0), Mat3::identity());
    }

    #[test]
    fn nilpotent_block_is_polynomial() {
        let n = Mat3([[0.0, 2.0, 3.0], [0.0, 0.0, -1.5], [0.0, 0.0, 0.0]]);
        let t = 0.7;
        let exact = Mat3::identity() + n.scale(t) + (n * n).scale(t * t / 2.0);
        assert!((expm(&n, t) - exact).max_abs() < 1e-15);
        // large argument exercises scaling and squaring
        let t = 40.0;
        let exact = Mat3::identity() + n.scale(t) + (n * n).scale(t * t / 2.0);
        assert!((expm(&n, t) - exact).max_abs() / exact.max_abs() < 1e-14);
    }

    #[test]
    fn rotation_decay_closed_form() {
        let (g, w, t) = (300.0_f64, 1.0e4, 3.7e-3);
        let a = Mat3([[-g, 0.0, 0.0], [0.0, -g, -w], [0.0, w, -g]]);
        let e = expm(&a, t);
        let d = (-g * t).exp();
        let (c, s) = ((w * t).cos(), (w * t).sin());
        let exact = Mat3([[d, 0.0, 0.0], [0.0, d * c, -d * s], [0.0, d * s, d * c]]);
        assert!((e - exact).max_abs() < 1e-13 * d.max(1e-300) + 1e-16);
    }

    #[test]
    fn semigroup_and_eigen_agreement() {
        let a = Mat3([[-7.0e4, 0.0, -1.3e3], [0.0, -7.0e4, -2.0e5], [3.2e2, 2.0e5, -7.0e4]]);
        let (t1, t2) = (1.3e-5, 2.9e-5);
        let lhs = expm(&a, t1 + t2);
        let rhs = expm(&a, t2) * expm(&a, t1);
        assert!((lhs - rhs).max_abs() / lhs.max_abs() < 1e-11);

        let es = eigen_decompose(&a).unwrap();
        let t = 2.0e-5;
        let (via_eigen, im) = es.apply_real(|l| (l * t).exp());
        assert!(im < 1e-12);
        assert!((via_eigen - expm(&a, t)).max_abs() < 1e-10);
    }

    #[test]
    fn complex_entries() {
        let a = Mat3::from_diagonal([Complex::new(-1.0, 2.0), Complex::new(0.5, 0.0), Complex::zero()]);
        let e = expm(&a, 0.3);
        assert!((e[(0, 0)] - Complex::new(-0.3, 0.6).exp()).norm() < 1e-15);
        assert!((e[(1, 1)] - Complex::new(0.15_f64.exp(), 0.0)).norm() < 1e-15);
    }
}
