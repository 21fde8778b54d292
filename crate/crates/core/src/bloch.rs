//! Reduced Λ-system dynamics: the ground-state Bloch vector `(f, R, J)`
//! evolving inside the beam (affine generator) and in the dark (linear
//! generator), plus the excited-state population readout.

use num_complex::Complex;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};
use crate::numerics::{eigen_decompose, expm};
use crate::scalar::Real;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Mass of a ⁸⁷Rb atom, kg.
pub const RB87_MASS: f64 = 1.443_160_60e-25;
/// Rb D1 line wavelength, m.
pub const RB87_D1_WAVELENGTH: f64 = 794.978_851_156e-9;

/// Cell, atom and field constants. All quantities are SI; angular
/// frequencies in rad/s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalParams<T> {
    /// Γ, ground-state relaxation.
    pub gamma_ground: T,
    /// γ, excited-state decay.
    pub gamma_excited: T,
    /// Γ_L, laser linewidth.
    pub laser_linewidth: T,
    pub rabi_1: T,
    pub rabi_2: T,
    /// Ω_L, one-photon detuning.
    pub detuning_optical: T,
    /// Ω, two-photon detuning.
    pub detuning_raman: T,
    pub wavenumber: T,
    pub temperature: T,
    pub atom_mass: T,
    pub cell_radius: T,
    pub beam_radius: T,
    /// α, probability that a wall collision is elastic.
    pub elastic_prob: T,
}

impl<T: Real> Default for PhysicalParams<T> {
    fn default() -> Self {
        PhysicalParams {
            gamma_ground: T::lit(300.0),
            gamma_excited: T::lit(3.6e7),
            laser_linewidth: T::zero(),
            rabi_1: T::lit(7.7e5),
            rabi_2: T::lit(7.7e5),
            detuning_optical: T::zero(),
            detuning_raman: T::zero(),
            wavenumber: T::lit(2.0 * std::f64::consts::PI / RB87_D1_WAVELENGTH),
            temperature: T::lit(293.15),
            atom_mass: T::lit(RB87_MASS),
            cell_radius: T::lit(5e-3),
            beam_radius: T::lit(1.5e-3),
            elastic_prob: T::zero(),
        }
    }
}

impl<T: Real> PhysicalParams<T> {
    /// γ′ = (γ + Γ_L)/2, decay of the optical coherences.
    pub fn gamma_prime(&self) -> T {
        (self.gamma_excited + self.laser_linewidth) / T::two()
    }

    /// Most probable speed `√(2 k_B T / m)`.
    pub fn thermal_speed(&self) -> T {
        (T::two() * T::lit(BOLTZMANN) * self.temperature / self.atom_mass).sqrt()
    }

    pub fn with_rabi(mut self, v: T) -> Self {
        self.rabi_1 = v;
        self.rabi_2 = v;
        self
    }

    pub fn with_detuning(mut self, omega: T) -> Self {
        self.detuning_raman = omega;
        self
    }

    pub fn with_alpha(mut self, alpha: T) -> Self {
        self.elastic_prob = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        let finite = [
            ("gamma_ground", self.gamma_ground),
            ("gamma_excited", self.gamma_excited),
            ("laser_linewidth", self.laser_linewidth),
            ("rabi_1", self.rabi_1),
            ("rabi_2", self.rabi_2),
            ("detuning_optical", self.detuning_optical),
            ("detuning_raman", self.detuning_raman),
            ("wavenumber", self.wavenumber),
            ("temperature", self.temperature),
            ("atom_mass", self.atom_mass),
            ("cell_radius", self.cell_radius),
            ("beam_radius", self.beam_radius),
            ("elastic_prob", self.elastic_prob),
        ];
        for (name, x) in finite {
            if !Float::is_finite(x) {
                return bad(name, "must be finite");
            }
        }
        for (name, x) in [
            ("gamma_ground", self.gamma_ground),
            ("gamma_excited", self.gamma_excited),
            ("laser_linewidth", self.laser_linewidth),
            ("rabi_1", self.rabi_1),
            ("rabi_2", self.rabi_2),
        ] {
            if x < T::zero() {
                return bad(name, "rate must be nonnegative");
            }
        }
        if !(self.gamma_prime() > T::zero()) {
            return bad("gamma_excited", "(gamma_excited + laser_linewidth)/2 must be positive");
        }
        if !(self.wavenumber > T::zero()) {
            return bad("wavenumber", "must be positive");
        }
        if !(self.temperature > T::zero()) {
            return bad("temperature", "must be positive");
        }
        if !(self.atom_mass > T::zero()) {
            return bad("atom_mass", "must be positive");
        }
        if !(self.beam_radius > T::zero()) {
            return bad("beam_radius", "must be positive");
        }
        if self.beam_radius > self.cell_radius {
            return bad("beam_radius", "must not exceed cell_radius");
        }
        if !(self.elastic_prob >= T::zero() && self.elastic_prob <= T::one()) {
            return bad("elastic_prob", "must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Ground-state Bloch vector: population difference `f`, and the real and
/// imaginary parts `R`, `J` of the ground-state coherence.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BlochVector<T> {
    pub f: T,
    pub r: T,
    pub j: T,
}

impl<T: Real> BlochVector<T> {
    pub fn new(f: T, r: T, j: T) -> Self {
        BlochVector { f, r, j }
    }

    /// The dark superposition for equal Rabi frequencies.
    pub fn dark_state() -> Self {
        BlochVector::new(T::zero(), -T::lit(0.5), T::zero())
    }

    pub fn to_vec(self) -> Vec3<T> {
        Vec3([self.f, self.r, self.j])
    }

    pub fn from_vec(v: Vec3<T>) -> Self {
        BlochVector::new(v.0[0], v.0[1], v.0[2])
    }

    /// `|f| ≤ 1` and `R² + J² ≤ (1 − f²)/4`, each with slack `tol`.
    pub fn is_physical(&self, tol: T) -> bool {
        self.f.abs() <= T::one() + tol
            && self.r * self.r + self.j * self.j
                <= (T::one() - self.f * self.f) / T::lit(4.0) + tol
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Zone {
    Beam,
    Dark,
}

/// `ρ̇ = Aρ + B`. In the dark zone `B` is zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineGenerator<T> {
    pub matrix: Mat3<T>,
    pub drive: Vec3<T>,
    pub zone: Zone,
}

/// `ρ₃₃ = U·ρ + V`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Readout<T> {
    pub u: Vec3<T>,
    pub v: T,
}

impl<T: Real> Readout<T> {
    pub fn eval(&self, rho: &BlochVector<T>) -> T {
        self.u.dot(&rho.to_vec()) + self.v
    }
}

/// Optical response of an atom with longitudinal velocity `v_z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OpticalFactors<T> {
    pub g: T,
    pub f: T,
    /// Optical pumping rate.
    pub w: T,
    /// Light shift.
    pub delta: T,
}

pub fn optical_factors<T: Real>(p: &PhysicalParams<T>, v_z: T) -> OpticalFactors<T> {
    let gp = p.gamma_prime();
    let detuning = p.detuning_optical - p.wavenumber * v_z;
    // G + iF = γ′/(γ′ − iδ) = γ′(γ′ + iδ)/(γ′² + δ²)
    let z = Complex::new(gp, T::zero()) / Complex::new(gp, -detuning);
    let (g, f) = (z.re, z.im);
    let (v1s, v2s) = (p.rabi_1 * p.rabi_1, p.rabi_2 * p.rabi_2);
    OpticalFactors {
        g,
        f,
        w: g * (v1s + v2s) / gp,
        delta: f * (v1s - v2s) / gp,
    }
}

pub fn beam_generator<T: Real>(p: &PhysicalParams<T>, v_z: T) -> AffineGenerator<T> {
    let gp = p.gamma_prime();
    let of = optical_factors(p, v_z);
    let (v1, v2) = (p.rabi_1, p.rabi_2);
    let v12 = v1 * v2 / gp;
    let d = -(of.w + p.gamma_ground);
    let rot = p.detuning_raman - of.delta;
    let four = T::lit(4.0);
    let z = T::zero();
    AffineGenerator {
        matrix: Mat3([
            [d, z, -four * of.f * v12],
            [z, d, -rot],
            [of.f * v12, rot, d],
        ]),
        drive: Vec3([of.g * (v2 * v2 - v1 * v1) / gp, -of.g * v12, z]),
        zone: Zone::Beam,
    }
}

pub fn dark_generator<T: Real>(p: &PhysicalParams<T>) -> AffineGenerator<T> {
    let g = -p.gamma_ground;
    let w = p.detuning_raman;
    let z = T::zero();
    AffineGenerator {
        matrix: Mat3([[g, z, z], [z, g, -w], [z, w, g]]),
        drive: Vec3::zeros(),
        zone: Zone::Dark,
    }
}

pub fn readout<T: Real>(p: &PhysicalParams<T>, v_z: T) -> Readout<T> {
    let gp = p.gamma_prime();
    let of = optical_factors(p, v_z);
    let (v1, v2) = (p.rabi_1, p.rabi_2);
    let scale = of.g / (p.gamma_excited * gp);
    Readout {
        u: Vec3([
            scale * (v1 * v1 - v2 * v2),
            T::lit(4.0) * scale * v1 * v2,
            T::zero(),
        ]),
        v: of.w / p.gamma_excited,
    }
}

/// `ρ_S = −A⁻¹B`.
pub fn stationary_state<T: Real>(g: &AffineGenerator<T>) -> Result<BlochVector<T>> {
    if g.drive.max_abs() == T::zero() {
        // still reject a singular generator: the stationary state is not unique
        g.matrix.lu().ok_or(Error::SingularMatrix {
            context: "stationary state",
        })?;
        return Ok(BlochVector::default());
    }
    let x = g
        .matrix
        .solve(&(-g.drive))
        .ok_or(Error::SingularMatrix {
            context: "stationary state",
        })?;
    Ok(BlochVector::from_vec(x))
}

/// `e^{At}`: eigen-decomposition when well conditioned, Padé otherwise.
pub fn exp_generator<T: Real>(a: &Mat3<T>, t: T) -> Mat3<T> {
    if t == T::zero() {
        return Mat3::identity();
    }
    if let Ok(es) = eigen_decompose(a) {
        let (m, im) = es.apply_real(|l| (l * t).exp());
        let tol = T::lit(1e-10) * m.max_abs().max(T::one());
        if m.is_finite() && im <= tol {
            return m;
        }
    }
    expm(a, t)
}

/// State after `dt` seconds under `g`, starting from `rho0`.
pub fn propagate<T: Real>(
    g: &AffineGenerator<T>,
    rho0: &BlochVector<T>,
    dt: T,
) -> Result<BlochVector<T>> {
    if !(dt >= T::zero()) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("propagation time {dt} must be nonnegative"),
        });
    }
    if dt == T::zero() {
        return Ok(*rho0);
    }
    let e = exp_generator(&g.matrix, dt);
    match g.zone {
        Zone::Dark if g.drive.max_abs() == T::zero() => Ok(BlochVector::from_vec(e.mul_vec(&rho0.to_vec()))),
        _ => {
            let s = stationary_state(g)?.to_vec();
            Ok(BlochVector::from_vec(s + e.mul_vec(&(rho0.to_vec() - s))))
        }
    }
}

/// State after `dt` together with `∫₀^dt ρ₃₃ dt′` under a beam generator.
pub fn beam_segment<T: Real>(
    g: &AffineGenerator<T>,
    ro: &Readout<T>,
    rho0: &BlochVector<T>,
    dt: T,
) -> Result<(BlochVector<T>, T)> {
    let s = stationary_state(g)?.to_vec();
    let e = exp_generator(&g.matrix, dt);
    let dev = rho0.to_vec() - s;
    let end = s + e.mul_vec(&dev);
    // ∫ e^{At} dt = A⁻¹(e^{At} − I)
    let moved = (e - Mat3::identity()).mul_vec(&dev);
    let integral_dev = g.matrix.solve(&moved).ok_or(Error::SingularMatrix {
        context: "beam segment integral",
    })?;
    let integral = dt * (ro.u.dot(&s) + ro.v) + ro.u.dot(&integral_dev);
    Ok((BlochVector::from_vec(end), integral))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::eigenvalues;

    fn params() -> PhysicalParams<f64> {
        PhysicalParams::default()
    }

    #[test]
    fn defaults_validate() {
        let p = params();
        p.validate().unwrap();
        assert_eq!(p.gamma_prime(), 1.8e7);
        assert!((p.thermal_speed() - 236.83).abs() < 0.01);
        let bad = PhysicalParams { beam_radius: 6e-3, ..p };
        assert!(bad.validate().is_err());
        assert!(p.with_alpha(1.5).validate().is_err());
        assert!(PhysicalParams { gamma_excited: 0.0, ..p }.validate().is_err());
    }

    #[test]
    fn optical_factor_examples() {
        let p = params();
        let of = optical_factors(&p, 0.0);
        assert_eq!((of.g, of.f, of.delta), (1.0, 0.0, 0.0));
        assert!((of.w - 2.0 * 7.7e5 * 7.7e5 / 1.8e7).abs() < 1e-9);
        let v = p.gamma_prime() / p.wavenumber;
        let of = optical_factors(&p, v);
        assert!((of.g - 0.5).abs() < 1e-15 && (of.f + 0.5).abs() < 1e-15);
    }

    #[test]
    fn lorentzian_identity() {
        let mut p = params();
        p.detuning_optical = 3.3e7;
        p.rabi_1 = 1.1e6;
        for i in -50..=50 {
            let of = optical_factors(&p, i as f64 * 13.7);
            assert!((of.g * of.g + of.f * of.f - of.g).abs() < 1e-14);
            assert!(of.g > 0.0 && of.g <= 1.0 && of.f.abs() < 1.0);
        }
    }

    #[test]
    fn field_off_beam_is_dark() {
        let p = params().with_rabi(0.0).with_detuning(4.0e3);
        let b = beam_generator(&p, 17.0);
        let d = dark_generator(&p);
        assert_eq!(b.matrix, d.matrix);
        assert_eq!(b.drive, Vec3::zeros());
    }

    #[test]
    fn symmetric_rabi_beam() {
        let p = params();
        let v = 7.7e5;
        let b = beam_generator(&p, 0.0);
        let gp = 1.8e7;
        assert!((b.drive[1] + v * v / gp).abs() < 1e-12);
        assert_eq!(b.drive[0], 0.0);
        for i in 0..3 {
            assert!((b.matrix[(i, i)] + 2.0 * v * v / gp + 300.0).abs() < 1e-9);
        }
    }

    #[test]
    fn dark_spectrum_and_rotation() {
        let p = params().with_detuning(1.0e4);
        let d = dark_generator(&p);
        let mut ev = eigenvalues(&d.matrix);
        ev.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!((ev[0] - Complex::new(-300.0, -1.0e4)).norm() < 1e-9);
        assert!((ev[1] - Complex::new(-300.0, 0.0)).norm() < 1e-9);
        assert!((ev[2] - Complex::new(-300.0, 1.0e4)).norm() < 1e-9);
        let rho0 = BlochVector::new(0.3, -0.2, 0.1);
        let t = 2.3e-3;
        let rho = propagate(&d, &rho0, t).unwrap();
        let decay = (-300.0 * t).exp();
        assert!((rho.f - 0.3 * decay).abs() < 1e-14);
        let (c, s) = ((1.0e4 * t).cos(), (1.0e4 * t).sin());
        assert!((rho.r - decay * (-0.2 * c - 0.1 * s)).abs() < 1e-13);
        assert!((rho.j - decay * (-0.2 * s + 0.1 * c)).abs() < 1e-13);
        let a = (rho.r * rho.r + rho.j * rho.j) * (2.0 * 300.0 * t).exp();
        assert!((a - 0.05).abs() < 1e-14);
    }

    #[test]
    fn readout_examples() {
        let p = params();
        let ro = readout(&p.with_rabi(0.0), 3.0);
        assert_eq!(ro.u, Vec3::zeros());
        assert_eq!(ro.v, 0.0);
        let ro = readout(&p, 0.0);
        assert!(ro.eval(&BlochVector::dark_state()).abs() < 1e-18);
        // ρ₃₃ = 2GV²/(γγ′)(1 + 2R)
        let rho = BlochVector::new(0.1, 0.2, -0.3);
        let expect = 2.0 * 7.7e5 * 7.7e5 / (3.6e7 * 1.8e7) * (1.0 + 2.0 * 0.2);
        assert!((ro.eval(&rho) - expect).abs() < 1e-15);
    }

    #[test]
    fn stationary_state_examples() {
        let p = params();
        let g = beam_generator(&p, 0.0);
        let s = stationary_state(&g).unwrap();
        let of = optical_factors(&p, 0.0);
        let v = 7.7e5;
        let expect = -of.g * v * v / (1.8e7 * (of.w + 300.0));
        assert!(s.f.abs() < 1e-15 && s.j.abs() < 1e-15);
        assert!((s.r - expect).abs() < 1e-14);

        let d = dark_generator(&p.with_detuning(500.0));
        assert_eq!(stationary_state(&d).unwrap(), BlochVector::default());
        let degenerate = PhysicalParams { gamma_ground: 0.0, ..p }.with_rabi(0.0);
        assert!(matches!(
            stationary_state(&beam_generator(&degenerate, 0.0)),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn propagation_limits() {
        let mut p = params().with_detuning(2.0e3);
        p.rabi_1 = 9.0e5;
        p.detuning_optical = 1.0e7;
        let g = beam_generator(&p, 31.0);
        let rho0 = BlochVector::new(0.2, 0.1, -0.3);
        assert_eq!(propagate(&g, &rho0, 0.0).unwrap(), rho0);
        let (t1, t2) = (3.1e-5, 7.7e-5);
        let a = propagate(&g, &rho0, t1 + t2).unwrap();
        let b = propagate(&g, &propagate(&g, &rho0, t1).unwrap(), t2).unwrap();
        assert!((a.to_vec() - b.to_vec()).max_abs() < 1e-12);
        let s = stationary_state(&g).unwrap();
        let late = propagate(&g, &rho0, 1e3 / 300.0).unwrap();
        assert!((late.to_vec() - s.to_vec()).max_abs() < 1e-10);
        assert!(propagate(&g, &rho0, -1.0).is_err());
    }

    #[test]
    fn segment_integral_matches_quadrature() {
        let mut p = params().with_detuning(5.0e3);
        p.rabi_2 = 5.0e5;
        let g = beam_generator(&p, -12.0);
        let ro = readout(&p, -12.0);
        let rho0 = BlochVector::new(0.1, 0.05, 0.2);
        let tau = 4.0e-5;
        let (end, integral) = beam_segment(&g, &ro, &rho0, tau).unwrap();
        assert_eq!(end, propagate(&g, &rho0, tau).unwrap());
        // composite Simpson on ρ₃₃(t)
        let n = 2000;
        let h = tau / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * ro.eval(&propagate(&g, &rho0, h * i as f64).unwrap());
        }
        acc *= h / 3.0;
        assert!(((integral - acc) / acc).abs() < 1e-10);
    }

    #[test]
    fn f32_instantiation() {
        let p = PhysicalParams::<f32>::default();
        let g = beam_generator(&p, 10.0);
        let s = stationary_state(&g).unwrap();
        let res = g.matrix.mul_vec(&s.to_vec()) + g.drive;
        assert!(res.max_abs() < 1e-3 * g.drive.max_abs());
    }
}
