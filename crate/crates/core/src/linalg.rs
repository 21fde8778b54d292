//! Fixed-size 3-vectors and 3×3 matrices over real or complex entries.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex;
use num_traits::{One, Zero};

use num_traits::Float;

use crate::scalar::{Entry, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vec3<E>(pub [E; 3]);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3<E>(pub [[E; 3]; 3]);

impl<E: Entry> Vec3<E> {
    pub fn new(a: E, b: E, c: E) -> Self {
        Vec3([a, b, c])
    }

    pub fn zeros() -> Self {
        Vec3([E::zero(); 3])
    }

    pub fn dot(&self, other: &Self) -> E {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    /// Euclidean norm.
    pub fn norm(&self) -> E::Real {
        self.0
            .iter()
            .map(|x| {
                let m = x.modulus();
                m * m
            })
            .sum::<E::Real>()
            .sqrt()
    }

    pub fn max_abs(&self) -> E::Real {
        self.0
            .iter()
            .fold(E::Real::zero(), |acc, x| acc.max(x.modulus()))
    }

    pub fn scale(&self, s: E) -> Self {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }

    /// Cross product `a × b`, without conjugation.
    pub fn cross(&self, b: &Self) -> Self {
        let a = &self.0;
        let b = &b.0;
        Vec3([
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl<E> Index<usize> for Vec3<E> {
    type Output = E;
    fn index(&self, i: usize) -> &E {
        &self.0[i]
    }
}

impl<E> IndexMut<usize> for Vec3<E> {
    fn index_mut(&mut self, i: usize) -> &mut E {
        &mut self.0[i]
    }
}

impl<E: Entry> Add for Vec3<E> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl<E: Entry> Sub for Vec3<E> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl<E: Entry> Neg for Vec3<E> {
    type Output = Self;
    fn neg(self) -> Self {
        Vec3([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl<E: Entry> AddAssign for Vec3<E> {
    fn add_assign(&mut self, o: Self) {
        for i in 0..3 {
            self.0[i] += o.0[i];
        }
    }
}

impl<E: Entry> Mat3<E> {
    pub fn zeros() -> Self {
        Mat3([[E::zero(); 3]; 3])
    }

    pub fn identity() -> Self {
        Self::from_diagonal([E::one(); 3])
    }

    pub fn from_diagonal(d: [E; 3]) -> Self {
        let mut m = Self::zeros();
        for i in 0..3 {
            m.0[i][i] = d[i];
        }
        m
    }

    pub fn from_columns(c: [Vec3<E>; 3]) -> Self {
        let mut m = Self::zeros();
        for j in 0..3 {
            for i in 0..3 {
                m.0[i][j] = c[j].0[i];
            }
        }
        m
    }

    pub fn row(&self, i: usize) -> Vec3<E> {
        Vec3(self.0[i])
    }

    pub fn column(&self, j: usize) -> Vec3<E> {
        Vec3([self.0[0][j], self.0[1][j], self.0[2][j]])
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                t.0[j][i] = self.0[i][j];
            }
        }
        t
    }

    pub fn trace(&self) -> E {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn determinant(&self) -> E {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Sum of the three principal 2×2 minors.
    pub fn principal_minor_sum(&self) -> E {
        let m = &self.0;
        (m[0][0] * m[1][1] - m[0][1] * m[1][0])
            + (m[0][0] * m[2][2] - m[0][2] * m[2][0])
            + (m[1][1] * m[2][2] - m[1][2] * m[2][1])
    }

    pub fn scale(&self, s: E) -> Self {
        let mut r = *self;
        for row in r.0.iter_mut() {
            for x in row.iter_mut() {
                *x *= s;
            }
        }
        r
    }

    pub fn mul_vec(&self, v: &Vec3<E>) -> Vec3<E> {
        Vec3([
            self.row(0).dot(v),
            self.row(1).dot(v),
            self.row(2).dot(v),
        ])
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> E::Real {
        (0..3)
            .map(|j| (0..3).map(|i| self.0[i][j].modulus()).sum::<E::Real>())
            .fold(E::Real::zero(), |a, b| a.max(b))
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> E::Real {
        self.transpose().norm_1()
    }

    pub fn norm_frobenius(&self) -> E::Real {
        self.0
            .iter()
            .flat_map(|r| r.iter())
            .map(|x| {
                let m = x.modulus();
                m * m
            })
            .sum::<E::Real>()
            .sqrt()
    }

    pub fn max_abs(&self) -> E::Real {
        self.0
            .iter()
            .flat_map(|r| r.iter())
            .fold(E::Real::zero(), |a, x| a.max(x.modulus()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flat_map(|r| r.iter()).all(|x| x.is_finite())
    }

    pub fn map<F: Entry>(&self, f: impl Fn(E) -> F) -> Mat3<F> {
        let mut r = Mat3::<F>::zeros();
        for i in 0..3 {
            for j in 0..3 {
                r.0[i][j] = f(self.0[i][j]);
            }
        }
        r
    }

    /// LU factorisation with partial pivoting. `None` if a pivot vanishes
    /// relative to the matrix scale.
    pub fn lu(&self) -> Option<Lu3<E>> {
        let scale = self.max_abs();
        if !(scale > E::Real::zero()) || !self.is_finite() {
            return None;
        }
        let tiny = scale * E::Real::epsilon() * E::Real::lit(8.0);
        let mut a = self.0;
        let mut perm = [0usize, 1, 2];
        for k in 0..3 {
            let p = (k..3)
                .max_by(|&x, &y| {
                    a[x][k]
                        .modulus()
                        .partial_cmp(&a[y][k].modulus())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap_or(k);
            if !(a[p][k].modulus() > tiny) {
                return None;
            }
            a.swap(k, p);
            perm.swap(k, p);
            for i in k + 1..3 {
                let f = a[i][k] / a[k][k];
                a[i][k] = f;
                for j in k + 1..3 {
                    let t = f * a[k][j];
                    a[i][j] -= t;
                }
            }
        }
        Some(Lu3 { lu: a, perm })
    }

    pub fn solve(&self, b: &Vec3<E>) -> Option<Vec3<E>> {
        self.lu().map(|lu| lu.solve(b))
    }

    pub fn inverse(&self) -> Option<Self> {
        let lu = self.lu()?;
        let mut cols = [Vec3::zeros(); 3];
        for (j, c) in cols.iter_mut().enumerate() {
            let mut e = Vec3::zeros();
            e.0[j] = E::one();
            *c = lu.solve(&e);
        }
        Some(Self::from_columns(cols))
    }

    /// `‖A‖₁·‖A⁻¹‖₁`, infinite when singular.
    pub fn condition_1(&self) -> E::Real {
        match self.inverse() {
            Some(inv) => self.norm_1() * inv.norm_1(),
            None => E::Real::infinity(),
        }
    }
}

/// Packed LU factors from [`Mat3::lu`].
#[derive(Clone, Copy, Debug)]
pub struct Lu3<E> {
    lu: [[E; 3]; 3],
    perm: [usize; 3],
}

impl<E: Entry> Lu3<E> {
    pub fn solve(&self, b: &Vec3<E>) -> Vec3<E> {
        let a = &self.lu;
        let mut y = [b.0[self.perm[0]], b.0[self.perm[1]], b.0[self.perm[2]]];
        for i in 1..3 {
            for k in 0..i {
                let t = a[i][k] * y[k];
                y[i] -= t;
            }
        }
        for i in (0..3).rev() {
            for k in i + 1..3 {
                let t = a[i][k] * y[k];
                y[i] -= t;
            }
            y[i] = y[i] / a[i][i];
        }
        Vec3(y)
    }
}

impl<T: Real> Mat3<T> {
    pub fn to_complex(&self) -> Mat3<Complex<T>> {
        self.map(Complex::from_real)
    }
}

impl<T: Real> Vec3<T> {
    pub fn to_complex(&self) -> Vec3<Complex<T>> {
        Vec3(self.0.map(Complex::from_real))
    }
}

impl<T: Real> Mat3<Complex<T>> {
    /// Real part, together with the largest imaginary magnitude discarded.
    pub fn split_real(&self) -> (Mat3<T>, T) {
        let re = self.map(|z| z.re);
        let im = self
            .0
            .iter()
            .flat_map(|r| r.iter())
            .fold(T::zero(), |a, z| a.max(z.im.abs()));
        (re, im)
    }
}

impl<T: Real> Vec3<Complex<T>> {
    pub fn split_real(&self) -> (Vec3<T>, T) {
        let re = Vec3(self.0.map(|z| z.re));
        let im = self.0.iter().fold(T::zero(), |a, z| a.max(z.im.abs()));
        (re, im)
    }
}

impl<E> Index<(usize, usize)> for Mat3<E> {
    type Output = E;
    fn index(&self, (i, j): (usize, usize)) -> &E {
        &self.0[i][j]
    }
}

impl<E> IndexMut<(usize, usize)> for Mat3<E> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut E {
        &mut self.0[i][j]
    }
}

impl<E: Entry> Add for Mat3<E> {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        self += o;
        self
    }
}

impl<E: Entry> AddAssign for Mat3<E> {
    fn add_assign(&mut self, o: Self) {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] += o.0[i][j];
            }
        }
    }
}

impl<E: Entry> Sub for Mat3<E> {
    type Output = Self;
    fn sub(mut self, o: Self) -> Self {
        self -= o;
        self
    }
}

impl<E: Entry> SubAssign for Mat3<E> {
    fn sub_assign(&mut self, o: Self) {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] -= o.0[i][j];
            }
        }
    }
}

impl<E: Entry> Neg for Mat3<E> {
    type Output = Self;
    fn neg(self) -> Self {
        self.map(|x| -x)
    }
}

impl<E: Entry> Mul for Mat3<E> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut r = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                r.0[i][j] = self.0[i][0] * o.0[0][j] + self.0[i][1] * o.0[1][j] + self.0[i][2] * o.0[2][j];
            }
        }
        r
    }
}

impl<E: Entry> Mul<Vec3<E>> for Mat3<E> {
    type Output = Vec3<E>;
    fn mul(self, v: Vec3<E>) -> Vec3<E> {
        self.mul_vec(&v)
    }
}

impl<E: Entry> Zero for Mat3<E> {
    fn zero() -> Self {
        Self::zeros()
    }
    fn is_zero(&self) -> bool {
        self.0.iter().flat_map(|r| r.iter()).all(|x| x.is_zero())
    }
}

impl<E: Entry> One for Mat3<E> {
    fn one() -> Self {
        Self::identity()
    }
}
