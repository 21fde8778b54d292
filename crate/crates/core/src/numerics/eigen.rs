//! Eigendecomposition of real 3×3 matrices with complex spectra.

use num_complex::Complex;
use num_traits::One;

use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};

use crate::scalar::{Entry, Real};

/// Eigenvector matrices with a 1-norm condition number at or above this are
/// treated as defective.
pub const MAX_CONDITION: f64 = 1e8;

/// Relative gap (in units of the shifted matrix scale) below which two
/// eigenvalues are handled as one repeated eigenvalue.
const CLUSTER_GAP: f64 = 1e-6;

/// `A = X · diag(λ) · X⁻¹`.
#[derive(Clone, Copy, Debug)]
pub struct EigenSystem<T: Real> {
    /// Real eigenvalues first; a complex pair is stored as `(a+ib, a-ib)`
    /// with `b > 0`.
    pub values: [Complex<T>; 3],
    /// Unit-norm eigenvectors as columns.
    pub vectors: Mat3<Complex<T>>,
    pub inverse: Mat3<Complex<T>>,
    /// `‖X‖₁ ‖X⁻¹‖₁`.
    pub cond: T,
}

impl<T: Real> EigenSystem<T> {
    /// `X · diag(f(λᵢ)) · X⁻¹`.
    pub fn apply(&self, f: impl Fn(Complex<T>) -> Complex<T>) -> Mat3<Complex<T>> {
        let d = self.values.map(f);
        let mut xd = self.vectors;
        for row in xd.0.iter_mut() {
            for (j, x) in row.iter_mut().enumerate() {
                *x *= d[j];
            }
        }
        xd * self.inverse
    }

    /// Real matrix function; also returns the largest discarded imaginary part.
    pub fn apply_real(&self, f: impl Fn(Complex<T>) -> Complex<T>) -> (Mat3<T>, T) {
        self.apply(f).split_real()
    }

    pub fn reconstruct(&self) -> Mat3<Complex<T>> {
        self.apply(|l| l)
    }
}

/// Eigenvalues of a real 3×3 matrix, ordered as in [`EigenSystem::values`].
pub fn eigenvalues<T: Real>(a: &Mat3<T>) -> [Complex<T>; 3] {
    let mu = a.trace() / T::lit(3.0);
    let shifted = *a - Mat3::identity().scale(mu);
    let s = shifted.max_abs();
    if s == T::zero() {
        return [Complex::from_real(mu); 3];
    }
    let m = shifted.scale(T::one() / s);
    let roots = cubic_roots(-m.trace(), m.principal_minor_sum(), -m.determinant());
    roots.map(|t| Complex::from_real(mu) + t * s)
}

/// Largest eigenvalue modulus.
pub fn spectral_radius<T: Real>(a: &Mat3<T>) -> T {
    eigenvalues(a)
        .iter()
        .fold(T::zero(), |acc, z| acc.max(z.norm()))
}

/// Roots of `t³ + c2 t² + c1 t + c0`, polished by Newton steps.
fn cubic_roots<T: Real>(c2: T, c1: T, c0: T) -> [Complex<T>; 3] {
    let three = T::lit(3.0);
    let q = (c2 * c2 - three * c1) / T::lit(9.0);
    let r = (T::two() * c2 * c2 * c2 - T::lit(9.0) * c2 * c1 + T::lit(27.0) * c0) / T::lit(54.0);
    let q3 = q * q * q;
    let shift = c2 / three;
    let mut roots = if r * r < q3 {
        let theta = (r / q3.sqrt()).max(-T::one()).min(T::one()).acos();
        let m = -T::two() * q.sqrt();
        let tau = T::two() * T::PI();
        let mut v = [
            m * (theta / three).cos() - shift,
            m * ((theta + tau) / three).cos() - shift,
            m * ((theta - tau) / three).cos() - shift,
        ];
        v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        v.map(Complex::from_real)
    } else {
        let big = -r.signum() * (r.abs() + (r * r - q3).sqrt()).cbrt();
        let small = if big == T::zero() { T::zero() } else { q / big };
        let real = big + small - shift;
        let re = -(big + small) / T::two() - shift;
        let im = (three.sqrt() / T::two() * (big - small)).abs();
        [
            Complex::from_real(real),
            Complex::new(re, im),
            Complex::new(re, -im),
        ]
    };
    let poly = |z: Complex<T>| ((z + c2) * z + c1) * z + c0;
    let dpoly = |z: Complex<T>| (z * three + c2 * T::two()) * z + c1;
    for root in roots.iter_mut() {
        for _ in 0..4 {
            let p = poly(*root);
            let dp = dpoly(*root);
            if dp.norm() == T::zero() {
                break;
            }
            let next = *root - p / dp;
            if poly(next).norm() < p.norm() {
                *root = next;
            } else {
                break;
            }
        }
    }
    // restore exact conjugate symmetry after polishing
    if roots[1].im != T::zero() {
        roots[0].im = T::zero();
        roots[2] = roots[1].conj();
    }
    roots
}

/// Eigendecomposition with a condition check.
///
/// Fails with [`Error::DefectiveMatrix`] when the eigenvector matrix is too
/// ill-conditioned for `X diag X⁻¹` to be trusted; callers then switch to a
/// quadrature or `expm` route.
pub fn eigen_decompose<T: Real>(a: &Mat3<T>) -> Result<EigenSystem<T>> {
    if !a.is_finite() {
        return Err(Error::DefectiveMatrix { cond: f64::INFINITY });
    }
    let off_diagonal_zero = (0..3).all(|i| (0..3).all(|j| i == j || a[(i, j)] == T::zero()));
    if off_diagonal_zero {
        let identity = Mat3::identity();
        return Ok(EigenSystem {
            values: [0, 1, 2].map(|i| Complex::from_real(a[(i, i)])),
            vectors: identity,
            inverse: identity,
            cond: T::one(),
        });
    }

    let mut values = eigenvalues(a);
    let mu = a.trace() / T::lit(3.0);
    let scale = (*a - Mat3::identity().scale(mu)).max_abs();
    let gap = T::lit(CLUSTER_GAP) * scale;
    if values[1].im != T::zero() && values[1].im.abs() <= gap {
        // a split double root: treat as a repeated real eigenvalue
        values[1].im = T::zero();
        values[2] = values[1];
    }
    let ac = a.to_complex();

    let vectors = if values[1].im != T::zero() {
        // one real eigenvalue and a conjugate pair
        let v0 = null_vector(&ac, values[0]);
        let v1 = null_vector(&ac, values[1]);
        let v2 = Vec3(v1.0.map(|z| z.conj()));
        [v0, v1, v2]
    } else {
        let d01 = (values[0] - values[1]).norm();
        let d12 = (values[1] - values[2]).norm();
        let d02 = (values[0] - values[2]).norm();
        if d01 <= gap && d12 <= gap && d02 <= gap {
            // a non-diagonal matrix with a triple eigenvalue is defective
            return Err(Error::DefectiveMatrix { cond: f64::INFINITY });
        } else if d01 <= gap || d12 <= gap {
            let (pair, single) = if d01 <= gap { ((0, 1), 2) } else { ((1, 2), 0) };
            let lambda = (values[pair.0] + values[pair.1]) / T::two();
            let plane = null_plane(&ac, lambda).ok_or(Error::DefectiveMatrix { cond: f64::INFINITY })?;
            let mut v = [Vec3::zeros(); 3];
            v[pair.0] = plane[0];
            v[pair.1] = plane[1];
            v[single] = null_vector(&ac, values[single]);
            v
        } else {
            values.map(|l| null_vector(&ac, l))
        }
    };
    let x = Mat3::from_columns(vectors);
    let inverse = x.inverse().ok_or(Error::DefectiveMatrix { cond: f64::INFINITY })?;
    let cond = x.norm_1() * inverse.norm_1();
    if !(cond < T::lit(MAX_CONDITION)) {
        return Err(Error::DefectiveMatrix { cond: cond.as_f64() });
    }
    Ok(EigenSystem {
        values,
        vectors: x,
        inverse,
        cond,
    })
}

/// Unit null vector of `A - λI` from the best-conditioned row cross product.
fn null_vector<T: Real>(a: &Mat3<Complex<T>>, lambda: Complex<T>) -> Vec3<Complex<T>> {
    let b = *a - Mat3::identity().scale(lambda);
    let candidates = [
        b.row(0).cross(&b.row(1)),
        b.row(0).cross(&b.row(2)),
        b.row(1).cross(&b.row(2)),
    ];
    let best = candidates
        .iter()
        .copied()
        .max_by(|x, y| x.norm().partial_cmp(&y.norm()).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or_else(Vec3::zeros);
    normalize_phase(best)
}

/// Two independent null vectors of a rank-one `A - λI`.
fn null_plane<T: Real>(a: &Mat3<Complex<T>>, lambda: Complex<T>) -> Option<[Vec3<Complex<T>>; 2]> {
    let b = *a - Mat3::identity().scale(lambda);
    let scale = a.max_abs();
    let row = (0..3)
        .map(|i| b.row(i))
        .max_by(|x, y| x.norm().partial_cmp(&y.norm()).unwrap_or(std::cmp::Ordering::Equal))?;
    let p = (0..3)
        .max_by(|&i, &j| row[i].norm().partial_cmp(&row[j].norm()).unwrap_or(std::cmp::Ordering::Equal))?;
    if !(row[p].norm() > T::zero()) {
        return None;
    }
    let mut basis = [Vec3::zeros(); 2];
    for (slot, q) in (0..3).filter(|&q| q != p).enumerate() {
        let mut v = Vec3::zeros();
        v[q] = Complex::one();
        v[p] = -row[q] / row[p];
        basis[slot] = normalize_phase(v);
    }
    // every row must annihilate the plane, otherwise the eigenvalue is defective
    let tol = T::lit(CLUSTER_GAP).sqrt() * scale;
    for v in &basis {
        if b.mul_vec(v).norm() > tol {
            return None;
        }
    }
    Some(basis)
}

/// Scales to unit norm with the largest component real and positive.
fn normalize_phase<T: Real>(v: Vec3<Complex<T>>) -> Vec3<Complex<T>> {
    let n = v.norm();
    if n == T::zero() {
        return v;
    }
    let k = (0..3)
        .max_by(|&i, &j| v[i].norm().partial_cmp(&v[j].norm()).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or(0);
    let phase = v[k].conj() / (v[k].norm() * n);
    v.scale(phase)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn residual(a: &Mat3<f64>, e: &EigenSystem<f64>) -> f64 {
        (e.reconstruct() - a.to_complex()).max_abs() / a.max_abs()
    }

    #[test]
    fn dark_generator_spectrum() {
        let g = 300.0;
        let w = 1e4;
        let a = Mat3([[-g, 0.0, 0.0], [0.0, -g, -w], [0.0, w, -g]]);
        let e = eigen_decompose(&a).unwrap();
        assert!((e.values[0] - Complex::new(-g, 0.0)).norm() < 1e-10);
        assert!((e.values[1] - Complex::new(-g, w)).norm() < 1e-10);
        assert!((e.values[2] - Complex::new(-g, -w)).norm() < 1e-10);
        assert!(residual(&a, &e) < 1e-14);
        assert!(e.cond < 10.0);
    }

    #[test]
    fn diagonal_gives_identity_vectors() {
        let a = Mat3::from_diagonal([-1.0, -2.0, -3.0]);
        let e = eigen_decompose(&a).unwrap();
        assert_eq!(e.vectors, Mat3::identity());
        assert_eq!(e.values[2], Complex::new(-3.0, 0.0));
    }

    #[test]
    fn repeated_diagonalizable_eigenvalue() {
        // similarity transform of diag(-2, -2, -5)
        let p = Mat3([[1.0, 2.0, 0.0], [0.0, 1.0, 1.0], [1.0, 0.0, 3.0]]);
        let a = p * Mat3::from_diagonal([-2.0, -2.0, -5.0]) * p.inverse().unwrap();
        let e = eigen_decompose(&a).unwrap();
        assert!(residual(&a, &e) < 1e-12, "{}", residual(&a, &e));
    }

    #[test]
    fn jordan_block_is_defective() {
        let a = Mat3([[-1.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -3.0]]);
        assert!(matches!(eigen_decompose(&a), Err(Error::DefectiveMatrix { .. })));
    }

    #[test]
    fn three_real_eigenvalues() {
        let a = Mat3([[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]]);
        let e = eigen_decompose(&a).unwrap();
        assert!(e.values.iter().all(|v| v.im == 0.0));
        assert!(e.values[0].re > e.values[1].re && e.values[1].re > e.values[2].re);
        assert!(residual(&a, &e) < 1e-14);
    }

    #[test]
    fn spectral_radius_of_rotation() {
        let c = 0.3_f64.cos() * 0.9;
        let s = 0.3_f64.sin() * 0.9;
        let a = Mat3([[0.5, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]);
        assert!((spectral_radius(&a) - 0.9).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn random_stable_matrices_reconstruct(
            entries in proptest::array::uniform9(-1.0f64..1.0),
            shift in 0.1f64..3.0,
            scale in 1.0f64..1e5,
        ) {
            let mut a = Mat3([
                [entries[0], entries[1], entries[2]],
                [entries[3], entries[4], entries[5]],
                [entries[6], entries[7], entries[8]],
            ]);
            a = (a - Mat3::identity().scale(shift + 3.0)).scale(scale);
            if let Ok(e) = eigen_decompose(&a) {
                prop_assert!(residual(&a, &e) < 1e-10);
                prop_assert!(e.values.iter().all(|v| v.re < 0.0));
            } else {
                // only near-defective draws may fail
                let v = eigenvalues(&a);
                let gap = (0..3)
                    .flat_map(|i| (i + 1..3).map(move |j| (i, j)))
                    .map(|(i, j)| (v[i] - v[j]).norm())
                    .fold(f64::INFINITY, f64::min);
                prop_assert!(gap < 1e-3 * a.max_abs());
            }
        }
    }
}
