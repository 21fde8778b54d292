//! Ensemble-averaged excited-state population `⟨ρ₃₃⟩(Ω)`.
//!
//! Per longitudinal velocity node the beam and dark propagators are averaged
//! over their dwell-time laws, collision counts are summed as geometric
//! series, and the three contributions (atoms returning from the dark
//! regime, the constant readout offset, and the pumped stationary part) are
//! integrated over the 1-D Maxwell distribution.

use num_complex::Complex;
use rayon::prelude::*;

use crate::bloch::{beam_generator, readout, stationary_state, PhysicalParams};
use crate::distributions::{DwellLaw, GeometryDerived};
use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};
use crate::numerics::{
    eigen_decompose, expm, gauss_hermite, integrate_semi_infinite, lorentz_mapped, spectral_radius,
    QuadratureKind, QuadratureRule,
};
use crate::scalar::Real;

/// Velocity quadrature family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VelocityRule {
    /// sinh-mapped trapezoid centred on the Doppler resonance.
    Lorentz,
    GaussHermite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AveragingOptions {
    pub rule: VelocityRule,
    pub order: usize,
}

pub const DEFAULT_ORDER: usize = 128;

impl Default for AveragingOptions {
    fn default() -> Self {
        AveragingOptions {
            rule: VelocityRule::Lorentz,
            order: DEFAULT_ORDER,
        }
    }
}

/// Nodes `x` and weights for `∫ e^{-x²} h(x) dx`, with `v_z = v_T·x`.
pub fn velocity_rule<T: Real>(p: &PhysicalParams<T>, opts: &AveragingOptions) -> Result<QuadratureRule<T>> {
    match opts.rule {
        VelocityRule::GaussHermite => gauss_hermite(opts.order),
        VelocityRule::Lorentz => {
            let kv = (p.wavenumber * p.thermal_speed()).as_f64();
            let center = p.detuning_optical.as_f64() / kv;
            let width = p.gamma_prime().as_f64() / kv;
            lorentz_mapped(opts.order, center, width)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PropagatorPath {
    Eigen,
    Quadrature,
    Closed,
}

/// `∫ e^{Aτ} dμ(τ)` by brute-force adaptive quadrature of the matrix
/// exponential against the law.
pub fn averaged_propagator_quadrature<T: Real>(a: &Mat3<T>, law: &DwellLaw<T>) -> Mat3<T> {
    let atom = law.atom_at_zero();
    if *law == DwellLaw::Instant {
        return Mat3::identity();
    }
    let flat = integrate_semi_infinite(
        |t| {
            let m = expm(a, t).scale(law.density(t));
            let mut out = [T::zero(); 9];
            for i in 0..3 {
                for j in 0..3 {
                    out[3 * i + j] = m.0[i][j];
                }
            }
            out
        },
        law.support_start(),
        law.time_scale(),
        T::lit(1e-12),
        T::lit(1e-15),
    );
    let mut m = Mat3::identity().scale(atom);
    for i in 0..3 {
        for j in 0..3 {
            m.0[i][j] += flat[3 * i + j];
        }
    }
    m
}

/// `⟨e^{Aτ}⟩ = X·diag(g(λᵢ))·X⁻¹`, falling back to quadrature when the
/// eigenbasis is ill-conditioned.
pub fn averaged_propagator<T: Real>(a: &Mat3<T>, law: &DwellLaw<T>) -> (Mat3<T>, PropagatorPath) {
    if *law == DwellLaw::Instant {
        return (Mat3::identity(), PropagatorPath::Closed);
    }
    if let Ok(es) = eigen_decompose(a) {
        let (m, im) = es.apply_real(|l| law.laplace(l));
        // imaginary residue of the reconstruction, relative to the precision
        let tol = T::lit(1e-2) * T::epsilon().sqrt();
        if m.is_finite() && im <= tol * m.max_abs().max(T::one()) {
            return (m, PropagatorPath::Eigen);
        }
    }
    (averaged_propagator_quadrature(a, law), PropagatorPath::Quadrature)
}

/// Average of the dark-zone propagator from its rotation-decay structure:
/// `e^{A′τ}` is `e^{-Γτ}` on `f` and a damped rotation by `Ωτ` on `(R, J)`.
pub fn dark_averaged_propagator<T: Real>(p: &PhysicalParams<T>, law: &DwellLaw<T>) -> Mat3<T> {
    let decay = law.laplace(Complex::new(-p.gamma_ground, T::zero())).re;
    let rot = law.laplace(Complex::new(-p.gamma_ground, p.detuning_raman));
    let z = T::zero();
    Mat3([[decay, z, z], [z, rot.re, -rot.im], [z, rot.im, rot.re]])
}

/// `Σₙ (1−α)αⁿ Mⁿ = (1−α)(I − αM)⁻¹`.
pub fn geometric_average<T: Real>(m: &Mat3<T>, alpha: T) -> Result<Mat3<T>> {
    if alpha == T::zero() {
        return Ok(Mat3::identity());
    }
    if alpha == T::one() {
        return Ok(Mat3::zeros());
    }
    let scaled = m.scale(alpha);
    let radius = spectral_radius(&scaled);
    if !(radius < T::one()) {
        return Err(Error::Divergent {
            radius: radius.as_f64(),
        });
    }
    let inv = (Mat3::identity() - scaled).inverse().ok_or(Error::SingularMatrix {
        context: "geometric average",
    })?;
    Ok(inv.scale(T::one() - alpha))
}

/// Beam and dark propagators averaged over their dwell laws.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AveragedPropagators<T> {
    /// Beam, time since entering the beam for an observed atom.
    pub g_t: Mat3<T>,
    /// Beam, full crossing.
    pub g_tau: Mat3<T>,
    /// Dark, single chord between crossings.
    pub g_chord: Mat3<T>,
    /// Dark, regime between sticking and return to the beam. Identity when
    /// `α = 1` (never used).
    pub g_dark: Mat3<T>,
}

/// Per-velocity-node quantities feeding the assembled average.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeTerms<T> {
    /// Contribution to `C`.
    pub c: Vec3<T>,
    /// Contribution to `D`.
    pub d: Mat3<T>,
    /// Row multiplying `⟨ρ_b⟩` in the first term.
    pub first: Vec3<T>,
    /// Offset plus stationary-part contribution.
    pub rest: T,
    pub radius: T,
    pub fallbacks: usize,
}

/// Velocity-independent part of the evaluation at one detuning.
#[derive(Clone, Copy, Debug)]
pub struct Context<T> {
    pub params: PhysicalParams<T>,
    pub geometry: GeometryDerived<T>,
    pub observation: DwellLaw<T>,
    pub crossing: DwellLaw<T>,
    pub g_chord: Mat3<T>,
    pub g_dark: Mat3<T>,
}

impl<T: Real> Context<T> {
    pub fn new(p: &PhysicalParams<T>) -> Result<Self> {
        let geometry = GeometryDerived::new(p)?;
        let g_chord = dark_averaged_propagator(p, &DwellLaw::dark_chord(&geometry));
        let g_dark = if p.elastic_prob == T::one() {
            Mat3::identity()
        } else {
            dark_averaged_propagator(p, &DwellLaw::dark_regime(&geometry))
        };
        Ok(Context {
            params: *p,
            geometry,
            observation: DwellLaw::observation(&geometry, p),
            crossing: DwellLaw::crossing(&geometry, p),
            g_chord,
            g_dark,
        })
    }

    pub fn propagators(&self, v_z: T) -> (AveragedPropagators<T>, usize) {
        let a = beam_generator(&self.params, v_z).matrix;
        let (g_t, p1) = averaged_propagator(&a, &self.observation);
        let (g_tau, p2) = averaged_propagator(&a, &self.crossing);
        let fallbacks = [p1, p2]
            .iter()
            .filter(|&&p| p == PropagatorPath::Quadrature)
            .count();
        (
            AveragedPropagators {
                g_t,
                g_tau,
                g_chord: self.g_chord,
                g_dark: self.g_dark,
            },
            fallbacks,
        )
    }
}

/// `C` and `D` integrands at one velocity:
/// `C = (I − αR)⁻¹(I − G_τ)ρ_S` with `R = G_τG′_τ′`, and
/// `D = G_τ(1−α)(I − αG′_τ′G_τ)⁻¹`.
pub fn chain_matrices<T: Real>(
    props: &AveragedPropagators<T>,
    rho_s: &Vec3<T>,
    alpha: T,
) -> Result<(Vec3<T>, Mat3<T>)> {
    let id = Mat3::identity();
    let r = props.g_tau * props.g_chord;
    let pumped = (id - props.g_tau).mul_vec(rho_s);
    let c = (id - r.scale(alpha)).solve(&pumped).ok_or(Error::SingularMatrix {
        context: "C integrand",
    })?;
    let d = props.g_tau * geometric_average(&(props.g_chord * props.g_tau), alpha)?;
    Ok((c, d))
}

/// `⟨ρ_b⟩ = (I − G′_τd D)⁻¹ G′_τd C`.
pub fn rho_b_average<T: Real>(c: &Vec3<T>, d: &Mat3<T>, g_dark: &Mat3<T>) -> Result<Vec3<T>> {
    (Mat3::identity() - *g_dark * *d)
        .solve(&g_dark.mul_vec(c))
        .ok_or(Error::SingularMatrix {
            context: "returning-atom state",
        })
}

pub fn node_terms<T: Real>(ctx: &Context<T>, v_z: T) -> Result<NodeTerms<T>> {
    let p = &ctx.params;
    let alpha = p.elastic_prob;
    let gen = beam_generator(p, v_z);
    let ro = readout(p, v_z);
    let rho_s = stationary_state(&gen)?.to_vec();
    let (props, fallbacks) = ctx.propagators(v_z);
    let id = Mat3::identity();
    let r = props.g_tau * props.g_chord;
    let radius = spectral_radius(&r);
    if !(radius < T::one()) {
        return Err(Error::Divergent {
            radius: radius.as_f64(),
        });
    }
    let pumped = (id - props.g_tau).mul_vec(&rho_s);
    // α(I − αR)⁻¹(I − G_τ)ρ_S, exact at α = 1 as well
    let chain = (id - r.scale(alpha)).solve(&pumped).ok_or(Error::SingularMatrix {
        context: "stationary chain",
    })?;
    let inside = (id - props.g_t).mul_vec(&rho_s) + (props.g_t * props.g_chord).mul_vec(&chain.scale(alpha));
    let rest = ro.v + ro.u.dot(&inside);
    let (c, d, first) = if alpha == T::one() {
        (Vec3::zeros(), Mat3::zeros(), Vec3::zeros())
    } else {
        let kernel = geometric_average(&(props.g_chord * props.g_tau), alpha)?;
        let d = props.g_tau * kernel;
        let first = (props.g_t * kernel).transpose().mul_vec(&ro.u);
        (chain, d, first)
    };
    Ok(NodeTerms {
        c,
        d,
        first,
        rest,
        radius,
        fallbacks,
    })
}

/// Diagnostics of one `⟨ρ₃₃⟩` evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation<T> {
    pub rho33: T,
    /// Largest spectral radius of `G_τG′_τ′` over the velocity nodes.
    pub max_radius: T,
    /// Number of averaged propagators that needed the quadrature path.
    pub fallbacks: usize,
}

const CLAMP: f64 = 1e-12;

pub fn evaluate<T: Real>(p: &PhysicalParams<T>, opts: &AveragingOptions) -> Result<Evaluation<T>> {
    let ctx = Context::new(p)?;
    let rule = velocity_rule(p, opts)?;
    evaluate_with(&ctx, &rule)
}

pub fn evaluate_with<T: Real>(ctx: &Context<T>, rule: &QuadratureRule<T>) -> Result<Evaluation<T>> {
    let p = &ctx.params;
    let v_t = ctx.geometry.v_t;
    let norm = T::one() / T::PI().sqrt();
    let mut c = Vec3::zeros();
    let mut d = Mat3::zeros();
    let mut first = Vec3::zeros();
    let mut rest = T::zero();
    let mut max_radius = T::zero();
    let mut fallbacks = 0;
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let n = node_terms(ctx, v_t * x)?;
        let w = w * norm;
        c += n.c.scale(w);
        d += n.d.scale(w);
        first += n.first.scale(w);
        rest += n.rest * w;
        max_radius = max_radius.max(n.radius);
        fallbacks += n.fallbacks;
    }
    let mut value = rest;
    if p.elastic_prob < T::one() {
        let rho_b = rho_b_average(&c, &d, &ctx.g_dark)?;
        value += first.dot(&rho_b);
    }
    let clamp = T::lit(CLAMP);
    if value < T::zero() && value > -clamp {
        value = T::zero();
    }
    if !(value >= T::zero() && value <= T::one()) {
        return Err(Error::PopulationOutOfRange {
            value: value.as_f64(),
        });
    }
    Ok(Evaluation {
        rho33: value,
        max_radius,
        fallbacks,
    })
}

/// `⟨ρ₃₃⟩` at the two-photon detuning stored in `p`.
pub fn rho33_average<T: Real>(p: &PhysicalParams<T>, opts: &AveragingOptions) -> Result<T> {
    evaluate(p, opts).map(|e| e.rho33)
}

/// `∫ M₁ W/γ dv_z`: the population with the ground coherence forced to zero
/// and equal Rabi frequencies, approached far from two-photon resonance.
pub fn incoherent_level<T: Real>(p: &PhysicalParams<T>, opts: &AveragingOptions) -> Result<T> {
    let rule = velocity_rule(p, opts)?;
    let v_t = p.thermal_speed();
    let mut acc = T::zero();
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let ro = readout(p, v_t * x);
        let rho = stationary_state(&beam_generator(p, v_t * x))?;
        acc += w * (ro.v + ro.u.0[0] * rho.f);
    }
    Ok(acc / T::PI().sqrt())
}

/// Snapshot recorded alongside a spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumMeta<T> {
    pub params: PhysicalParams<T>,
    pub quadrature_order: usize,
    pub quadrature_kind: QuadratureKind,
    pub mode: String,
    pub fallbacks: usize,
    pub max_radius: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum<T> {
    /// `(Ω, ⟨ρ₃₃⟩)` in increasing `Ω`.
    pub points: Vec<(T, T)>,
    pub meta: SpectrumMeta<T>,
}

impl<T: Real> Spectrum<T> {
    pub fn omegas(&self) -> impl Iterator<Item = T> + '_ {
        self.points.iter().map(|p| p.0)
    }

    pub fn values(&self) -> impl Iterator<Item = T> + '_ {
        self.points.iter().map(|p| p.1)
    }
}

/// Symmetric grid of `n` points on `[-span, span]`.
pub fn symmetric_grid<T: Real>(span: T, n: usize) -> Vec<T> {
    if n == 1 {
        return vec![T::zero()];
    }
    let half = T::lit((n - 1) as f64 / 2.0);
    (0..n)
        .map(|i| {
            // mirror-exact: the i-th and (n-1-i)-th points are negatives
            let k = T::lit(i as f64) - half;
            span * k / half
        })
        .collect()
}

/// Symmetric grid with `per_side` log-spaced magnitudes on `[lo, hi]` per
/// sign plus `0`, for resolving features that span several decades.
pub fn log_symmetric_grid<T: Real>(lo: T, hi: T, per_side: usize) -> Vec<T> {
    let ratio = (hi / lo).ln();
    let side: Vec<T> = (0..per_side)
        .map(|i| {
            let f = if per_side == 1 { T::zero() } else { T::lit(i as f64 / (per_side - 1) as f64) };
            lo * (ratio * f).exp()
        })
        .collect();
    side.iter().rev().map(|&x| -x).chain(std::iter::once(T::zero())).chain(side.iter().copied()).collect()
}

/// Evaluates `⟨ρ₃₃⟩` on every detuning of `grid` in parallel. The result is
/// identical for any worker count.
pub fn sweep<T: Real>(p: &PhysicalParams<T>, grid: &[T], opts: &AveragingOptions) -> Result<Spectrum<T>> {
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::GridNotIncreasing);
    }
    p.validate()?;
    let rule = velocity_rule(p, opts)?;
    let results: Vec<Result<Evaluation<T>>> = grid
        .par_iter()
        .map(|&omega| {
            let q = p.with_detuning(omega);
            Context::new(&q)
                .and_then(|ctx| evaluate_with(&ctx, &rule))
                .map_err(|e| Error::AtDetuning {
                    omega: omega.as_f64(),
                    source: Box::new(e),
                })
        })
        .collect();
    let mut points = Vec::with_capacity(grid.len());
    let mut fallbacks = 0;
    let mut max_radius = T::zero();
    for (&omega, r) in grid.iter().zip(results) {
        let e = r?;
        points.push((omega, e.rho33));
        fallbacks += e.fallbacks;
        max_radius = max_radius.max(e.max_radius);
    }
    Ok(Spectrum {
        points,
        meta: SpectrumMeta {
            params: *p,
            quadrature_order: opts.order,
            quadrature_kind: rule.kind,
            mode: "analytic".to_string(),
            fallbacks,
            max_radius,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::{dark_generator, BlochVector};

    fn params() -> PhysicalParams<f64> {
        PhysicalParams::default()
    }

    #[test]
    fn instant_law_gives_identity() {
        let a = beam_generator(&params(), 3.0).matrix;
        assert_eq!(averaged_propagator(&a, &DwellLaw::Instant).0, Mat3::identity());
        assert_eq!(averaged_propagator_quadrature(&a, &DwellLaw::Instant), Mat3::identity());
    }

    #[test]
    fn dark_closed_form_matches_eigen_and_quadrature() {
        let p = params().with_detuning(2.0e4).with_alpha(0.4);
        let g = GeometryDerived::new(&p).unwrap();
        let a = dark_generator(&p).matrix;
        for law in [DwellLaw::dark_chord(&g), DwellLaw::dark_regime(&g)] {
            let closed = dark_averaged_propagator(&p, &law);
            let (eig, path) = averaged_propagator(&a, &law);
            assert_eq!(path, PropagatorPath::Eigen);
            assert!((closed - eig).max_abs() < 1e-12);
            let quad = averaged_propagator_quadrature(&a, &law);
            assert!((closed - quad).max_abs() < 1e-8, "{:?}", closed - quad);
        }
    }

    #[test]
    fn beam_dual_path() {
        let mut p = params().with_detuning(7.0e3);
        p.rabi_1 = 1.1e6;
        let g = GeometryDerived::new(&p).unwrap();
        let a = beam_generator(&p, 4.0).matrix;
        for law in [DwellLaw::observation(&g, &p), DwellLaw::crossing(&g, &p)] {
            let (eig, path) = averaged_propagator(&a, &law);
            assert_eq!(path, PropagatorPath::Eigen);
            let quad = averaged_propagator_quadrature(&a, &law);
            assert!((eig - quad).max_abs() < 1e-8, "{law:?} {:?}", eig - quad);
        }
    }

    #[test]
    fn geometric_average_examples() {
        let m = Mat3::identity().scale(0.5);
        assert_eq!(geometric_average(&m, 0.0).unwrap(), Mat3::identity());
        assert_eq!(geometric_average(&m, 1.0).unwrap(), Mat3::zeros());
        let g = geometric_average(&m, 0.5).unwrap();
        assert!((g - Mat3::identity().scale(2.0 / 3.0)).max_abs() < 1e-15);
        assert!(matches!(
            geometric_average(&Mat3::identity().scale(2.5), 0.5),
            Err(Error::Divergent { .. })
        ));
    }

    #[test]
    fn chain_collapses_at_zero_alpha() {
        let p = params().with_detuning(3.0e3);
        let ctx = Context::new(&p).unwrap();
        let (props, _) = ctx.propagators(12.0);
        let rho_s = stationary_state(&beam_generator(&p, 12.0)).unwrap().to_vec();
        let (c, d) = chain_matrices(&props, &rho_s, 0.0).unwrap();
        let expect = (Mat3::identity() - props.g_tau).mul_vec(&rho_s);
        assert!((c - expect).max_abs() < 1e-15);
        assert_eq!(d, props.g_tau);
        let (_, d1) = chain_matrices(&props, &rho_s, 1.0).unwrap();
        assert_eq!(d1, Mat3::zeros());
    }

    #[test]
    fn rho_b_fixed_point() {
        let p = params().with_detuning(1.0e3).with_alpha(0.5);
        let ctx = Context::new(&p).unwrap();
        let (props, _) = ctx.propagators(-20.0);
        let rho_s = stationary_state(&beam_generator(&p, -20.0)).unwrap().to_vec();
        let (c, d) = chain_matrices(&props, &rho_s, 0.5).unwrap();
        let b = rho_b_average(&c, &d, &ctx.g_dark).unwrap();
        let back = ctx.g_dark.mul_vec(&(c + d.mul_vec(&b)));
        assert!((back - b).max_abs() < 1e-12);
        assert_eq!(rho_b_average(&Vec3::zeros(), &d, &ctx.g_dark).unwrap(), Vec3::zeros());
        let direct = rho_b_average(&c, &Mat3::zeros(), &ctx.g_dark).unwrap();
        assert!((direct - ctx.g_dark.mul_vec(&c)).max_abs() < 1e-18);
    }

    #[test]
    fn field_off_gives_zero() {
        let p = params().with_rabi(0.0).with_detuning(500.0);
        assert_eq!(rho33_average(&p, &AveragingOptions::default()).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_in_detuning() {
        let opts = AveragingOptions::default();
        for alpha in [0.0, 0.5, 1.0] {
            let p = params().with_alpha(alpha);
            let a = rho33_average(&p.with_detuning(2.0e4), &opts).unwrap();
            let b = rho33_average(&p.with_detuning(-2.0e4), &opts).unwrap();
            assert!(((a - b) / a).abs() < 1e-10, "{alpha}: {a} {b}");
        }
    }

    #[test]
    fn grid_validation_and_order() {
        let p = params();
        let opts = AveragingOptions { order: 16, ..Default::default() };
        assert!(matches!(sweep(&p, &[1.0, 0.0], &opts), Err(Error::GridNotIncreasing)));
        let grid = symmetric_grid(1.0e4, 5);
        assert_eq!(grid, vec![-1.0e4, -5.0e3, 0.0, 5.0e3, 1.0e4]);
        let s = sweep(&p, &grid, &opts).unwrap();
        assert_eq!(s.omegas().collect::<Vec<_>>(), grid);
        assert!(s.values().all(|v| (0.0..=1.0).contains(&v)));
        let lg: Vec<f64> = log_symmetric_grid(1.0, 100.0, 3);
        assert_eq!(lg.len(), 7);
        assert_eq!(lg[3], 0.0);
        assert!((lg[5] - 10.0).abs() < 1e-13 && lg[1] == -lg[5]);
    }

    #[test]
    fn dark_state_readout_is_zero() {
        let ro = readout(&params(), 0.0);
        assert!(ro.eval(&BlochVector::dark_state()).abs() < 1e-18);
    }
}
