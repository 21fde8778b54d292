//! Direct simulation of atom histories, used as an independent check on the
//! averaged spectrum.
//!
//! Two walkers produce the alternating beam/dark segments of one atom:
//! `ModelFaithful` draws every duration from the dwell laws of the analytic
//! model, `ExactGeometry` follows straight chords in the disc with specular
//! or sticking wall collisions. The Bloch vector is carried through the
//! segments exactly and `∫ρ₃₃ dt` is accumulated over beam time after the
//! burn-in.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric, Normal};
use rayon::prelude::*;

use crate::bloch::{beam_generator, beam_segment, readout, stationary_state, BlochVector, PhysicalParams, Zone};
use crate::distributions::{f_prime, f_prime_approx, f_t_approx, tau_cdf, DwellLaw, GeometryDerived};
use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};
use crate::numerics::eigen_decompose;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrajectoryMode {
    ModelFaithful,
    ExactGeometry,
}

/// Which duration laws the model-faithful walker samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DurationLaws {
    /// The fitted laws the analytic spectrum is built from.
    Fitted,
    /// Exact crossing-time and constant-path dark-chord laws.
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryConfig {
    pub n_atoms: usize,
    /// Simulated time per atom, s.
    pub t_total: f64,
    pub mode: TrajectoryMode,
    pub seed: u64,
    /// Initial stretch of each trajectory excluded from the averages, s.
    pub burn_in: f64,
    pub laws: DurationLaws,
}

impl TrajectoryConfig {
    /// Burn-in of `5/Γ` followed by the same length of sampled time.
    pub fn new(p: &PhysicalParams<f64>, mode: TrajectoryMode) -> Self {
        let burn_in = 5.0 / p.gamma_ground;
        TrajectoryConfig {
            n_atoms: 10_000,
            t_total: 2.0 * burn_in,
            mode,
            seed: 0,
            burn_in,
            laws: DurationLaws::Fitted,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(invalid("n_atoms", "at least one atom is required".into()));
        }
        if !(self.burn_in >= 0.0) || !self.burn_in.is_finite() {
            return Err(invalid("burn_in", format!("{} must be a finite nonnegative time", self.burn_in)));
        }
        if !(self.t_total > self.burn_in) || !self.t_total.is_finite() {
            return Err(invalid(
                "t_total",
                format!("{} must be finite and exceed burn_in {}", self.t_total, self.burn_in),
            ));
        }
        Ok(())
    }
}

fn invalid(name: &'static str, reason: String) -> Error {
    Error::InvalidParameter { name, reason }
}

/// Independent stream for atom `index`.
pub fn atom_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Starting point of a beam-passing chord.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntrySample {
    pub phi: f64,
    pub v_perp: f64,
    pub v_z: f64,
}

/// Transverse speed from the 2-D Maxwell law `(2v/v_T²) e^{−v²/v_T²}`.
pub fn sample_v_perp<R: Rng + ?Sized>(v_t: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    // 1 − u lies in (0, 1]
    v_t * (-(1.0 - u).ln()).sqrt()
}

/// Longitudinal speed from `e^{−v²/v_T²}/(√π v_T)`.
pub fn sample_v_z<R: Rng + ?Sized>(v_t: f64, rng: &mut R) -> f64 {
    Normal::new(0.0, v_t / std::f64::consts::SQRT_2).unwrap().sample(rng)
}

/// Entry angle with density `R cos φ / r` on `[0, arcsin(r/R)]` and thermal
/// velocities.
pub fn sample_entry<R: Rng + ?Sized>(p: &PhysicalParams<f64>, rng: &mut R) -> EntrySample {
    let v_t = p.thermal_speed();
    let u: f64 = rng.random();
    let phi = (u * p.beam_radius / p.cell_radius).asin();
    let v_perp = sample_v_perp(v_t, rng);
    let v_z = sample_v_z(v_t, rng);
    EntrySample { phi, v_perp, v_z }
}

/// Dark time of a beam-passing chord between leaving and re-entering the beam.
pub fn dark_chord_time(v_perp: f64, phi: f64, p: &PhysicalParams<f64>) -> f64 {
    let (big_r, r) = (p.cell_radius, p.beam_radius);
    let s = big_r * phi.sin();
    let beam = ((r - s) * (r + s)).max(0.0).sqrt();
    2.0 * (big_r * phi.cos() - beam).max(0.0) / v_perp
}

/// Sorted sample with its step CDF.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCdf {
    samples: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn from_samples(mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        EmpiricalCdf { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.partition_point(|&s| s <= x) as f64 / self.samples.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.samples.first().copied().unwrap_or(f64::NAN)
    }

    /// `sup |F_n − F|` against a continuous CDF.
    pub fn ks_statistic(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let n = self.samples.len() as f64;
        self.samples.iter().enumerate().fold(0.0, |d, (i, &x)| {
            let f = cdf(x);
            d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
        })
    }
}

const HIST_DECADES: (i32, i32) = (-9, 1);
const HIST_PER_DECADE: usize = 40;
const MAX_COLLISIONS: usize = 2000;

/// Log-binned duration counts; merging is exact so the result does not depend
/// on how atoms were split across workers.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    /// Upper bin edges, s.
    pub edges: Vec<f64>,
    /// `counts[0]` holds zero durations and underflow, the last entry overflow.
    pub counts: Vec<u64>,
    pub sum: f64,
    pub min: f64,
    pub max: f64,
}

impl Default for Histogram {
    fn default() -> Self {
        let bins = (HIST_DECADES.1 - HIST_DECADES.0) as usize * HIST_PER_DECADE;
        let edges = (0..=bins)
            .map(|i| 10f64.powf(HIST_DECADES.0 as f64 + i as f64 / HIST_PER_DECADE as f64))
            .collect();
        Histogram {
            edges,
            counts: vec![0; bins + 2],
            sum: 0.0,
            min: f64::INFINITY,
            max: 0.0,
        }
    }
}

impl Histogram {
    pub fn record(&mut self, t: f64) {
        let k = self.edges.partition_point(|&e| e < t);
        self.counts[k] += 1;
        self.sum += t;
        self.min = self.min.min(t);
        self.max = self.max.max(t);
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.total() as f64
    }

    /// Fraction of samples not exceeding `edges[k]`.
    pub fn cdf(&self) -> Vec<(f64, f64)> {
        let n = self.total().max(1) as f64;
        let mut acc = 0u64;
        self.edges
            .iter()
            .zip(&self.counts)
            .map(|(&e, &c)| {
                acc += c;
                (e, acc as f64 / n)
            })
            .collect()
    }

    fn merge(&mut self, other: &Histogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.sum += other.sum;
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Histograms {
    pub tau: Histogram,
    pub tau_prime: Histogram,
    pub tau_dark: Histogram,
    /// Elastic collisions per beam-passing regime; the last slot collects
    /// larger counts.
    pub collisions: Vec<u64>,
}

impl Histograms {
    fn record_collisions(&mut self, n: u64) {
        if self.collisions.is_empty() {
            self.collisions = vec![0; MAX_COLLISIONS + 1];
        }
        self.collisions[(n as usize).min(MAX_COLLISIONS)] += 1;
    }

    fn merge(&mut self, other: &Histograms) {
        self.tau.merge(&other.tau);
        self.tau_prime.merge(&other.tau_prime);
        self.tau_dark.merge(&other.tau_dark);
        if self.collisions.is_empty() {
            self.collisions = other.collisions.clone();
        } else {
            for (a, b) in self.collisions.iter_mut().zip(&other.collisions) {
                *a += b;
            }
        }
    }
}

/// What one atom contributed after the burn-in.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AtomTally {
    /// `∫ρ₃₃ dt` over beam time.
    pub beam_integral: f64,
    pub beam_time: f64,
    pub total_time: f64,
    /// Segment boundaries where the Bloch vector left the physical set.
    pub unphysical: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct McEstimate {
    /// Beam-time weighted `⟨ρ₃₃⟩`.
    pub mean: f64,
    pub std_error: f64,
    /// Atoms that spent time in the beam.
    pub n_effective: usize,
    pub beam_fraction: f64,
    pub beam_fraction_stderr: f64,
    pub unphysical: usize,
    pub histograms: Histograms,
}

/// Inverse-CDF sampler on a mapped time grid.
#[derive(Clone, Debug)]
struct Tabulated {
    t: Vec<f64>,
    cdf: Vec<f64>,
}

impl Tabulated {
    const NODES: usize = 8192;

    fn new(cdf: impl Fn(f64) -> f64, start: f64, scale: f64) -> Self {
        let n = Self::NODES;
        let mut t: Vec<f64> = (0..n)
            .map(|i| {
                let u = i as f64 / n as f64;
                start + scale * u / (1.0 - u)
            })
            .collect();
        t.push(start + scale * 1e8);
        let raw: Vec<f64> = t.iter().map(|&x| cdf(x)).collect();
        let (lo, hi) = (raw[0], raw[n]);
        // a possibly negative point mass at the start is dropped here
        let mut c: Vec<f64> = raw.iter().map(|&v| (v - lo) / (hi - lo)).collect();
        for i in 1..c.len() {
            c[i] = c[i].max(c[i - 1]);
        }
        Tabulated { t, cdf: c }
    }

    fn sample(&self, u: f64) -> f64 {
        let k = self.cdf.partition_point(|&c| c <= u).clamp(1, self.t.len() - 1);
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let w = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        self.t[k - 1] + w * (self.t[k] - self.t[k - 1])
    }
}

#[derive(Clone, Debug)]
enum Sampler {
    Zero,
    Table(Tabulated),
    ShiftedExp { tau0: f64, exp: Exp<f64> },
}

impl Sampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Zero => 0.0,
            Sampler::Table(t) => t.sample(rng.random()),
            Sampler::ShiftedExp { tau0, exp } => tau0 + exp.sample(rng),
        }
    }
}

fn law_sampler(law: &DwellLaw<f64>) -> Result<Sampler> {
    Ok(match *law {
        DwellLaw::Instant => Sampler::Zero,
        DwellLaw::Crossing { scale, norm, tau_bar } => Sampler::Table(Tabulated::new(
            |t| 1.0 - tau_bar * f_t_approx(t / scale) / (scale * norm),
            0.0,
            scale,
        )),
        DwellLaw::DarkChord { scale } => Sampler::Table(Tabulated::new(
            |t| f_prime_approx(t / scale),
            law.support_start(),
            scale,
        )),
        DwellLaw::DarkRegime { tau0, h } => Sampler::ShiftedExp {
            tau0,
            exp: Exp::new(h).map_err(|e| invalid("h", e.to_string()))?,
        },
        DwellLaw::Observation { .. } => {
            return Err(invalid("law", "the observation law is not a segment duration".into()))
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Crossing,
    DarkChord,
    DarkRegime,
    /// Dark time before the first beam entry, not a sample of any law.
    Leading,
}

#[derive(Clone, Copy, Debug)]
struct Segment {
    zone: Zone,
    dt: f64,
    v_z: f64,
    kind: Kind,
}

struct FaithfulLaws {
    v_t: f64,
    alpha: f64,
    crossing: Sampler,
    chord: Sampler,
    regime: Sampler,
}

impl FaithfulLaws {
    fn new(p: &PhysicalParams<f64>, laws: DurationLaws) -> Result<Self> {
        let g = GeometryDerived::new(p)?;
        let (crossing, chord) = match laws {
            DurationLaws::Fitted => (
                law_sampler(&DwellLaw::crossing(&g, p))?,
                law_sampler(&DwellLaw::dark_chord(&g))?,
            ),
            DurationLaws::Exact => {
                let q = *p;
                let crossing = Sampler::Table(Tabulated::new(|t| tau_cdf(t, &g, &q), 0.0, g.beam_scale(p)));
                let chord = if g.ell_perp == 0.0 {
                    Sampler::Zero
                } else {
                    Sampler::Table(Tabulated::new(|t| f_prime(t, &g), 0.0, g.chord_scale()))
                };
                (crossing, chord)
            }
        };
        Ok(FaithfulLaws {
            v_t: g.v_t,
            alpha: p.elastic_prob,
            crossing,
            chord,
            regime: law_sampler(&DwellLaw::dark_regime(&g))?,
        })
    }
}

/// Beam passages with geometric numbers of elastic repeats, dark chords in
/// between and dark regimes after each sticking collision.
struct FaithfulWalker<'a> {
    laws: &'a FaithfulLaws,
    v_z: f64,
    /// Passages still to come in this regime; `None` never ends.
    remaining: Option<u64>,
    next: Kind,
}

impl<'a> FaithfulWalker<'a> {
    fn new<R: Rng + ?Sized>(laws: &'a FaithfulLaws, rng: &mut R, hist: &mut Option<&mut Histograms>) -> Self {
        let mut w = FaithfulWalker {
            laws,
            v_z: 0.0,
            remaining: None,
            next: Kind::Crossing,
        };
        w.start_regime(rng, hist);
        w
    }

    fn start_regime<R: Rng + ?Sized>(&mut self, rng: &mut R, hist: &mut Option<&mut Histograms>) {
        self.v_z = sample_v_z(self.laws.v_t, rng);
        self.remaining = if self.laws.alpha >= 1.0 {
            None
        } else {
            let n = Geometric::new(1.0 - self.laws.alpha).unwrap().sample(rng);
            if let Some(h) = hist.as_deref_mut() {
                h.record_collisions(n);
            }
            Some(n)
        };
    }

    fn next<R: Rng + ?Sized>(&mut self, rng: &mut R, hist: &mut Option<&mut Histograms>) -> Segment {
        let kind = self.next;
        let (zone, dt) = match kind {
            Kind::Crossing => {
                self.next = match self.remaining {
                    Some(0) => Kind::DarkRegime,
                    Some(ref mut n) => {
                        *n -= 1;
                        Kind::DarkChord
                    }
                    None => Kind::DarkChord,
                };
                (Zone::Beam, self.laws.crossing.sample(rng))
            }
            Kind::DarkChord => {
                self.next = Kind::Crossing;
                (Zone::Dark, self.laws.chord.sample(rng))
            }
            _ => {
                self.next = Kind::Crossing;
                let dt = self.laws.regime.sample(rng);
                self.start_regime(rng, hist);
                (Zone::Dark, dt)
            }
        };
        if let Some(h) = hist.as_deref_mut() {
            match kind {
                Kind::Crossing => h.tau.record(dt),
                Kind::DarkChord => h.tau_prime.record(dt),
                _ => h.tau_dark.record(dt),
            }
        }
        Segment { zone, dt, v_z: self.v_z, kind }
    }
}

/// Straight chords in the disc. Dark stretches are merged across walls and
/// classified when the next beam entry happens.
struct ChordWalker {
    big_r: f64,
    r: f64,
    alpha: f64,
    v_t: f64,
    /// Impact parameter `R sin φ`.
    b: f64,
    v_perp: f64,
    v_z: f64,
    dark: f64,
    stuck_since_beam: bool,
    seen_beam: bool,
    passes: u64,
    pending: [Option<Segment>; 2],
}

impl ChordWalker {
    fn new<R: Rng + ?Sized>(p: &PhysicalParams<f64>, rng: &mut R) -> Self {
        let mut w = ChordWalker {
            big_r: p.cell_radius,
            r: p.beam_radius,
            alpha: p.elastic_prob,
            v_t: p.thermal_speed(),
            b: 0.0,
            v_perp: 0.0,
            v_z: 0.0,
            dark: 0.0,
            stuck_since_beam: false,
            seen_beam: false,
            passes: 0,
            pending: [None, None],
        };
        w.reemit(rng);
        w
    }

    /// Fresh thermal velocity and cosine-law direction.
    fn reemit<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let u: f64 = rng.random();
        self.b = self.big_r * (2.0 * u - 1.0);
        self.v_perp = sample_v_perp(self.v_t, rng);
        self.v_z = sample_v_z(self.v_t, rng);
    }

    fn next<R: Rng + ?Sized>(&mut self, rng: &mut R, hist: &mut Option<&mut Histograms>) -> Segment {
        loop {
            for slot in self.pending.iter_mut() {
                if let Some(s) = slot.take() {
                    return s;
                }
            }
            let b2 = self.b * self.b;
            let chord = 2.0 * (self.big_r * self.big_r - b2).max(0.0).sqrt();
            if b2 < self.r * self.r {
                let inside = 2.0 * (self.r * self.r - b2).sqrt();
                let edge = 0.5 * (chord - inside) / self.v_perp;
                let kind = if !self.seen_beam {
                    Kind::Leading
                } else if self.stuck_since_beam {
                    Kind::DarkRegime
                } else {
                    Kind::DarkChord
                };
                let dt = self.dark + edge;
                let tau = inside / self.v_perp;
                if let Some(h) = hist.as_deref_mut() {
                    match kind {
                        Kind::DarkChord => h.tau_prime.record(dt),
                        Kind::DarkRegime => h.tau_dark.record(dt),
                        _ => {}
                    }
                    h.tau.record(tau);
                }
                self.pending = [
                    Some(Segment { zone: Zone::Dark, dt, v_z: self.v_z, kind }),
                    Some(Segment { zone: Zone::Beam, dt: tau, v_z: self.v_z, kind: Kind::Crossing }),
                ];
                self.dark = edge;
                self.seen_beam = true;
                self.stuck_since_beam = false;
                self.passes += 1;
            } else {
                self.dark += chord / self.v_perp;
            }
            let elastic: f64 = rng.random();
            if elastic >= self.alpha {
                if self.passes > 0 {
                    if let Some(h) = hist.as_deref_mut() {
                        h.record_collisions(self.passes - 1);
                    }
                }
                self.passes = 0;
                self.stuck_since_beam = true;
                self.reemit(rng);
            }
        }
    }
}

enum Walker<'a> {
    Faithful(FaithfulWalker<'a>),
    Chord(ChordWalker),
}

impl Walker<'_> {
    fn next<R: Rng + ?Sized>(&mut self, rng: &mut R, hist: &mut Option<&mut Histograms>) -> Segment {
        match self {
            Walker::Faithful(w) => w.next(rng, hist),
            Walker::Chord(w) => w.next(rng, hist),
        }
    }
}

/// Beam propagation for one velocity with the eigenbasis cached:
/// `ρ(t) = ρ_S + X e^{Λt} X⁻¹(ρ₀ − ρ_S)`.
struct BeamPropagator {
    v_z: f64,
    stationary: Vec3<f64>,
    /// `U·ρ_S + V`.
    base: f64,
    eigen: Option<CachedEigen>,
    fallback: (crate::bloch::AffineGenerator<f64>, crate::bloch::Readout<f64>),
}

struct CachedEigen {
    values: [Complex<f64>; 3],
    vectors: Mat3<Complex<f64>>,
    inverse: Mat3<Complex<f64>>,
    /// `Uᵀ X`.
    u_x: [Complex<f64>; 3],
}

impl BeamPropagator {
    fn new(p: &PhysicalParams<f64>, v_z: f64) -> Result<Self> {
        let g = beam_generator(p, v_z);
        let ro = readout(p, v_z);
        let s = stationary_state(&g)?.to_vec();
        let eigen = eigen_decompose(&g.matrix).ok().map(|es| {
            let u = ro.u.to_complex();
            let u_x = [0, 1, 2].map(|j| u.dot(&es.vectors.column(j)));
            CachedEigen {
                values: es.values,
                vectors: es.vectors,
                inverse: es.inverse,
                u_x,
            }
        });
        Ok(BeamPropagator {
            v_z,
            stationary: s,
            base: ro.u.dot(&s) + ro.v,
            eigen,
            fallback: (g, ro),
        })
    }

    /// State after `dt` and `∫ρ₃₃` over the segment.
    fn advance(&self, rho: Vec3<f64>, dt: f64) -> Result<(Vec3<f64>, f64)> {
        if dt == 0.0 {
            return Ok((rho, 0.0));
        }
        match &self.eigen {
            Some(e) => {
                let c = e.inverse.mul_vec(&(rho - self.stationary).to_complex());
                let mut moved = Vec3::zeros();
                let mut integral = Complex::new(0.0, 0.0);
                for k in 0..3 {
                    let l = e.values[k];
                    let z = l * dt;
                    let ez = z.exp();
                    moved[k] = ez * c[k];
                    // (e^{λt} − 1)/λ, with the series near zero
                    let phi = if z.norm() < 1e-5 {
                        Complex::new(dt, 0.0) * (Complex::new(1.0, 0.0) + z * 0.5)
                    } else {
                        (ez - 1.0) / l
                    };
                    integral += e.u_x[k] * phi * c[k];
                }
                let end = self.stationary + e.vectors.mul_vec(&moved).split_real().0;
                Ok((end, dt * self.base + integral.re))
            }
            None => {
                let (g, ro) = &self.fallback;
                let (end, integral) = beam_segment(g, ro, &BlochVector::from_vec(rho), dt)?;
                Ok((end.to_vec(), integral))
            }
        }
    }
}

/// Free evolution: `f` decays, `(R, J)` decay and rotate at `Ω`.
fn dark_step(rho: Vec3<f64>, gamma: f64, omega: f64, dt: f64) -> Vec3<f64> {
    let d = (-gamma * dt).exp();
    let (s, c) = (omega * dt).sin_cos();
    Vec3([d * rho[0], d * (rho[1] * c - rho[2] * s), d * (rho[1] * s + rho[2] * c)])
}

/// Bloch vectors this far outside the physical set count as violations.
const PHYSICAL_TOL: f64 = 1e-9;

fn run_atom<R: Rng + ?Sized>(
    p: &PhysicalParams<f64>,
    cfg: &TrajectoryConfig,
    faithful: Option<&FaithfulLaws>,
    rng: &mut R,
    mut hist: Option<&mut Histograms>,
    bloch: bool,
) -> Result<AtomTally> {
    let mut walker = match (cfg.mode, faithful) {
        (TrajectoryMode::ModelFaithful, Some(l)) => Walker::Faithful(FaithfulWalker::new(l, rng, &mut hist)),
        _ => Walker::Chord(ChordWalker::new(p, rng)),
    };
    let light = p.rabi_1 != 0.0 || p.rabi_2 != 0.0;
    let mut tally = AtomTally {
        total_time: cfg.t_total - cfg.burn_in,
        ..Default::default()
    };
    let mut rho = Vec3::zeros();
    let mut prop: Option<BeamPropagator> = None;
    let mut t = 0.0;
    while t < cfg.t_total {
        let seg = walker.next(rng, &mut hist);
        let dt = seg.dt.min(cfg.t_total - t);
        // portion of the segment inside the averaging window
        let counted = (t + dt - cfg.burn_in.max(t)).max(0.0);
        match seg.zone {
            Zone::Dark => {
                if bloch {
                    rho = dark_step(rho, p.gamma_ground, p.detuning_raman, dt);
                }
            }
            Zone::Beam => {
                tally.beam_time += counted;
                if bloch && light {
                    if prop.as_ref().is_none_or(|b| b.v_z != seg.v_z) {
                        prop = Some(BeamPropagator::new(p, seg.v_z)?);
                    }
                    let b = prop.as_ref().unwrap();
                    if counted < dt {
                        rho = b.advance(rho, dt - counted)?.0;
                    }
                    let (end, integral) = b.advance(rho, counted)?;
                    rho = end;
                    tally.beam_integral += integral;
                } else if bloch {
                    rho = dark_step(rho, p.gamma_ground, p.detuning_raman, dt);
                }
            }
        }
        if bloch && !BlochVector::from_vec(rho).is_physical(PHYSICAL_TOL) {
            tally.unphysical += 1;
        }
        t += dt;
    }
    Ok(tally)
}

/// One atom's beam-time integral of `ρ₃₃` at Raman detuning `omega`.
pub fn simulate_atom<R: Rng + ?Sized>(
    p: &PhysicalParams<f64>,
    omega: f64,
    cfg: &TrajectoryConfig,
    rng: &mut R,
) -> Result<AtomTally> {
    cfg.validate()?;
    let q = p.with_detuning(omega);
    let laws = match cfg.mode {
        TrajectoryMode::ModelFaithful => Some(FaithfulLaws::new(&q, cfg.laws)?),
        TrajectoryMode::ExactGeometry => {
            q.validate()?;
            None
        }
    };
    run_atom(&q, cfg, laws.as_ref(), rng, None, true)
}

/// Atoms per work unit. Fixed so that the summation order, and therefore the
/// result, is independent of the number of worker threads.
const CHUNK: usize = 256;

struct ChunkResult {
    tallies: Vec<AtomTally>,
    hist: Histograms,
}

fn run_atoms(p: &PhysicalParams<f64>, cfg: &TrajectoryConfig, bloch: bool) -> Result<Vec<ChunkResult>> {
    cfg.validate()?;
    p.validate()?;
    let laws = match cfg.mode {
        TrajectoryMode::ModelFaithful => Some(FaithfulLaws::new(p, cfg.laws)?),
        TrajectoryMode::ExactGeometry => None,
    };
    let chunks: Vec<usize> = (0..cfg.n_atoms.div_ceil(CHUNK)).collect();
    chunks
        .par_iter()
        .map(|&c| {
            let mut hist = Histograms::default();
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(cfg.n_atoms);
            let tallies = (lo..hi)
                .map(|i| {
                    let mut rng = atom_rng(cfg.seed, i as u64);
                    run_atom(p, cfg, laws.as_ref(), &mut rng, Some(&mut hist), bloch)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ChunkResult { tallies, hist })
        })
        .collect()
}

/// Ratio estimate `Σx/Σy` with its delta-method standard error.
fn ratio_estimate(pairs: impl Iterator<Item = (f64, f64)> + Clone) -> (f64, f64) {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for (x, y) in pairs.clone() {
        sx += x;
        sy += y;
        n += 1;
    }
    if sy == 0.0 {
        return (0.0, 0.0);
    }
    let m = sx / sy;
    if n < 2 {
        return (m, f64::INFINITY);
    }
    let ss: f64 = pairs.map(|(x, y)| (x - m * y).powi(2)).sum();
    let var = ss / (sy * sy) * n as f64 / (n - 1) as f64;
    (m, var.sqrt())
}

/// Beam-time weighted ensemble average of `ρ₃₃` at Raman detuning `omega`.
/// Identical for a fixed seed whatever the number of worker threads.
pub fn estimate_rho33(p: &PhysicalParams<f64>, omega: f64, cfg: &TrajectoryConfig) -> Result<McEstimate> {
    let q = p.with_detuning(omega);
    let chunks = run_atoms(&q, cfg, true)?;
    let mut hist = Histograms::default();
    let mut unphysical = 0;
    for c in &chunks {
        hist.merge(&c.hist);
        unphysical += c.tallies.iter().map(|t| t.unphysical).sum::<usize>();
    }
    let tallies = chunks.iter().flat_map(|c| c.tallies.iter());
    let (mean, std_error) = ratio_estimate(tallies.clone().map(|t| (t.beam_integral, t.beam_time)));
    let (beam_fraction, beam_fraction_stderr) = ratio_estimate(tallies.clone().map(|t| (t.beam_time, t.total_time)));
    Ok(McEstimate {
        mean,
        std_error,
        n_effective: tallies.filter(|t| t.beam_time > 0.0).count(),
        beam_fraction,
        beam_fraction_stderr,
        unphysical,
        histograms: hist,
    })
}

/// Fraction of time spent in the beam, without Bloch propagation.
pub fn beam_time_fraction(p: &PhysicalParams<f64>, cfg: &TrajectoryConfig) -> Result<(f64, f64)> {
    let chunks = run_atoms(p, cfg, false)?;
    Ok(ratio_estimate(
        chunks.iter().flat_map(|c| c.tallies.iter()).map(|t| (t.beam_time, t.total_time)),
    ))
}

/// Measured dark-regime durations in exact geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct DarkTimeReport {
    pub cdf: EmpiricalCdf,
    pub mean: f64,
    pub std_error: f64,
    pub min: f64,
    /// Time-balance prediction for the mean.
    pub predicted: f64,
}

/// Dark-regime durations (last beam exit to the next entry across a sticking
/// collision), collected from the whole trajectories.
pub fn empirical_tau_dark(p: &PhysicalParams<f64>, cfg: &TrajectoryConfig) -> Result<DarkTimeReport> {
    if cfg.mode != TrajectoryMode::ExactGeometry {
        return Err(invalid("mode", "dark-regime times are measured in exact geometry".into()));
    }
    cfg.validate()?;
    let g = GeometryDerived::new(p)?;
    let chunks: Vec<usize> = (0..cfg.n_atoms.div_ceil(CHUNK)).collect();
    let per_chunk: Vec<Vec<f64>> = chunks
        .par_iter()
        .map(|&c| {
            let mut out = Vec::new();
            let lo = c * CHUNK;
            for i in lo..(lo + CHUNK).min(cfg.n_atoms) {
                let mut rng = atom_rng(cfg.seed, i as u64);
                let mut w = ChordWalker::new(p, &mut rng);
                let mut t = 0.0;
                while t < cfg.t_total {
                    let s = w.next(&mut rng, &mut None);
                    t += s.dt;
                    if s.kind == Kind::DarkRegime && t <= cfg.t_total {
                        out.push(s.dt);
                    }
                }
            }
            out
        })
        .collect();
    let samples: Vec<f64> = per_chunk.into_iter().flatten().collect();
    if samples.is_empty() {
        return Err(invalid("t_total", "no dark regime completed; lengthen the trajectories".into()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let cdf = EmpiricalCdf::from_samples(samples);
    Ok(DarkTimeReport {
        min: cdf.min(),
        cdf,
        mean,
        std_error: (var / n).sqrt(),
        predicted: g.tau_bar_dark,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> PhysicalParams<f64> {
        PhysicalParams::default()
    }

    fn short(p: &PhysicalParams<f64>, mode: TrajectoryMode, n: usize) -> TrajectoryConfig {
        TrajectoryConfig {
            n_atoms: n,
            burn_in: 1e-3,
            t_total: 4e-3,
            ..TrajectoryConfig::new(p, mode)
        }
    }

    #[test]
    fn config_validation() {
        let p = params();
        let cfg = TrajectoryConfig::new(&p, TrajectoryMode::ModelFaithful);
        assert!((cfg.burn_in - 5.0 / 300.0).abs() < 1e-15);
        assert!(cfg.validate().is_ok());
        assert!(TrajectoryConfig { n_atoms: 0, ..cfg }.validate().is_err());
        assert!(TrajectoryConfig { t_total: cfg.burn_in, ..cfg }.validate().is_err());
    }

    #[test]
    fn entry_angles_and_speeds() {
        let p = params();
        let mut rng = atom_rng(1, 0);
        let max = (0.3f64).asin();
        let n = 200_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let e = sample_entry(&p, &mut rng);
            assert!(e.phi >= 0.0 && e.phi <= max);
            sum += e.v_perp;
        }
        let v_t = p.thermal_speed();
        let expect = v_t * std::f64::consts::PI.sqrt() / 2.0;
        // sd of v⊥ is v_T √(1 − π/4)
        let se = v_t * (1.0 - std::f64::consts::FRAC_PI_4).sqrt() / (n as f64).sqrt();
        assert!((sum / n as f64 - expect).abs() < 3.0 * se);
        let full = PhysicalParams { beam_radius: p.cell_radius, ..p };
        for _ in 0..1000 {
            assert!(sample_entry(&full, &mut rng).phi < std::f64::consts::FRAC_PI_2);
        }
    }

    #[test]
    fn tabulated_sampler_inverts() {
        let t = Tabulated::new(|x: f64| 1.0 - (-x).exp(), 0.0, 1.0);
        for &u in &[0.1, 0.5, 0.9, 0.999] {
            let x = t.sample(u);
            assert!((1.0 - (-x).exp() - u).abs() < 1e-6, "{u} {x}");
        }
    }

    #[test]
    fn cached_beam_step_matches_generic() {
        let p = params().with_detuning(3.0e3);
        for v_z in [0.0, 1.5, -40.0] {
            let b = BeamPropagator::new(&p, v_z).unwrap();
            assert!(b.eigen.is_some());
            let rho = Vec3([0.3, -0.1, 0.2]);
            let (g, ro) = b.fallback;
            for dt in [1e-7, 2e-5, 3e-3] {
                let (e1, i1) = b.advance(rho, dt).unwrap();
                let (e2, i2) = beam_segment(&g, &ro, &BlochVector::from_vec(rho), dt).unwrap();
                assert!((e1 - e2.to_vec()).max_abs() < 1e-12);
                assert!((i1 - i2).abs() < 1e-12 * i2.abs().max(1e-12), "{i1} {i2}");
            }
        }
    }

    #[test]
    fn dark_step_matches_generator() {
        let p = params().with_detuning(2.0e3);
        let rho = Vec3([0.1, 0.2, -0.3]);
        let got = dark_step(rho, p.gamma_ground, p.detuning_raman, 1e-3);
        let g = crate::bloch::dark_generator(&p);
        let want = crate::bloch::propagate(&g, &BlochVector::from_vec(rho), 1e-3).unwrap().to_vec();
        assert!((got - want).max_abs() < 1e-15);
    }

    #[test]
    fn no_light_gives_zero() {
        let p = params().with_rabi(0.0);
        for mode in [TrajectoryMode::ModelFaithful, TrajectoryMode::ExactGeometry] {
            let e = estimate_rho33(&p, 100.0, &short(&p, mode, 50)).unwrap();
            assert_eq!(e.mean, 0.0);
        }
    }

    #[test]
    fn zero_alpha_has_no_repeats() {
        let p = params();
        let e = estimate_rho33(&p, 0.0, &short(&p, TrajectoryMode::ModelFaithful, 64)).unwrap();
        let c = &e.histograms.collisions;
        assert!(c[0] > 0 && c[1..].iter().all(|&k| k == 0));
        assert_eq!(e.histograms.tau_prime.total(), 0);
        assert_eq!(e.unphysical, 0);
    }

    #[test]
    fn full_beam_geometry_is_always_lit() {
        let p = PhysicalParams { beam_radius: 5e-3, ..params() };
        let (f, _) = beam_time_fraction(&p, &short(&p, TrajectoryMode::ExactGeometry, 20)).unwrap();
        assert!((f - 1.0).abs() < 1e-12, "{f}");
    }

    #[test]
    fn specular_reflection_keeps_angle() {
        let p = params().with_alpha(1.0);
        let mut rng = atom_rng(3, 0);
        let mut w = ChordWalker::new(&p, &mut rng);
        let (b, v) = (w.b, w.v_perp);
        for _ in 0..200 {
            w.next(&mut rng, &mut None);
            assert_eq!((w.b, w.v_perp), (b, v));
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let p = params().with_alpha(0.5);
        let cfg = short(&p, TrajectoryMode::ModelFaithful, 300);
        let a = estimate_rho33(&p, 500.0, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| estimate_rho33(&p, 500.0, &cfg).unwrap());
        assert_eq!(a, b);
        let c = estimate_rho33(&p, 500.0, &TrajectoryConfig { seed: 9, ..cfg }).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn ks_statistic_of_exact_sample() {
        let cdf = EmpiricalCdf::from_samples(vec![0.5, 0.25, 0.75]);
        assert_eq!(cdf.eval(0.3), 1.0 / 3.0);
        let d = cdf.ks_statistic(|x| x);
        assert!((d - 0.25).abs() < 1e-15);
    }
}
