//! Detection of the narrow peak, the pedestal and any intermediate structure
//! in a CPT dip.
//!
//! For a spectrum symmetric about `Ω = 0` the symmetric difference
//! `D(h) = (S(h) + S(−h))/2 − S(0)` is the second difference of `S` at scale
//! `h`. Each Lorentzian-like component of the dip adds a step to `D` as a
//! function of `ln h`, so the scales present are the maxima of `dD/d ln h`.

use std::fmt;

use cpt_core::Spectrum;

/// Tunable detection thresholds, printed with every report.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    /// Outer fraction of the detuning range used as the far-wing baseline.
    pub baseline_fraction: f64,
    /// A component must be deeper than this many noise floors.
    pub noise_factor: f64,
    /// A component's response maximum must stand out by this fraction of the
    /// largest one.
    pub min_prominence: f64,
    /// The smallest scale is the narrow peak if it lies within this factor of
    /// the cell-averaged dark-state relaxation rate.
    pub narrow_factor: f64,
    /// Lower bound on the noise floor relative to `max |S|`.
    pub noise_floor_rel: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            baseline_fraction: 0.2,
            noise_factor: 3.0,
            min_prominence: 0.01,
            narrow_factor: 3.0,
            noise_floor_rel: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScaleClass {
    Narrow,
    Intermediate,
    Pedestal,
}

/// One resolved component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scale {
    /// Position of the response maximum, rad/s.
    pub omega: f64,
    /// Rise of `D` across the component.
    pub depth: f64,
    /// Prominence of the response maximum, relative to the largest response.
    pub prominence: f64,
    /// The response was still rising at the edge of the grid.
    pub truncated: bool,
    pub class: ScaleClass,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructureReport {
    pub s0: f64,
    pub baseline: f64,
    pub noise_floor: f64,
    /// Upper scale for the narrow peak, rad/s.
    pub narrow_bound: f64,
    pub pedestal: bool,
    pub pedestal_depth: f64,
    pub narrow: bool,
    /// Full width at half depth of the narrow component, rad/s.
    pub narrow_width: Option<f64>,
    pub intermediate: bool,
    pub scales: Vec<Scale>,
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StructureError {
    #[error("detuning grid is not symmetric about zero at index {index}")]
    NotSymmetric { index: usize },
    #[error("need at least three grid points, got {n}")]
    TooFewPoints { n: usize },
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Cell-averaged relaxation of the dark state: `Γ` plus optical pumping of
/// the resonant velocity class diluted by the beam-to-cell area ratio.
pub fn dark_relaxation(p: &cpt_core::Params) -> f64 {
    let gp = p.gamma_prime();
    let s = gp / (p.wavenumber * p.thermal_speed());
    let pump = std::f64::consts::PI.sqrt() * s * (p.rabi_1 * p.rabi_1 + p.rabi_2 * p.rabi_2) / gp;
    let area = (p.beam_radius / p.cell_radius).powi(2);
    p.gamma_ground + area * pump
}

/// `(index, prominence)` of local maxima, prominence as in the usual
/// topographic definition with the array ends as bases.
fn peaks(r: &[f64]) -> Vec<(usize, f64)> {
    let n = r.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i < n {
        if r[i] > r[i - 1] {
            // walk over a plateau
            let mut j = i;
            while j + 1 < n && r[j + 1] == r[i] {
                j += 1;
            }
            if j + 1 == n || r[j + 1] < r[i] {
                let peak = r[i];
                let mut left = peak;
                for k in (0..i).rev() {
                    if r[k] > peak {
                        break;
                    }
                    left = left.min(r[k]);
                }
                let mut right = peak;
                for &x in &r[j + 1..] {
                    if x > peak {
                        break;
                    }
                    right = right.min(x);
                }
                // a maximum at the last point has no right flank
                let base = if j + 1 == n { left } else { left.max(right) };
                out.push((i, peak - base));
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Finds the components of a CPT dip. A flat spectrum gives all flags false.
pub fn report_structure(spectrum: &Spectrum) -> Result<StructureReport, StructureError> {
    report_structure_with(spectrum, &Thresholds::default())
}

pub fn report_structure_with(spectrum: &Spectrum, th: &Thresholds) -> Result<StructureReport, StructureError> {
    let pts = &spectrum.points;
    let n = pts.len();
    if n < 3 {
        return Err(StructureError::TooFewPoints { n });
    }
    let w_max = pts[n - 1].0.abs().max(pts[0].0.abs());
    for i in 0..n / 2 {
        if (pts[i].0 + pts[n - 1 - i].0).abs() > 1e-9 * w_max {
            return Err(StructureError::NotSymmetric { index: i });
        }
    }
    let s_max = pts.iter().fold(0.0f64, |m, p| m.max(p.1.abs()));
    let (s0, first_pos) = if n % 2 == 1 {
        (pts[n / 2].1, n / 2 + 1)
    } else {
        (0.5 * (pts[n / 2 - 1].1 + pts[n / 2].1), n / 2)
    };
    let half: Vec<(f64, f64)> = (first_pos..n)
        .map(|k| (pts[k].0, 0.5 * (pts[k].1 + pts[n - 1 - k].1) - s0))
        .collect();

    let wing: Vec<f64> = pts
        .iter()
        .filter(|p| p.0.abs() >= (1.0 - th.baseline_fraction) * w_max)
        .map(|p| p.1)
        .collect();
    let baseline = wing.iter().sum::<f64>() / wing.len() as f64;
    let d2: Vec<f64> = wing.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).collect();
    let robust = if d2.len() >= 3 {
        let m = median(d2.clone());
        1.4826 * median(d2.iter().map(|x| (x - m).abs()).collect()) / 6f64.sqrt()
    } else {
        0.0
    };
    let noise_floor = robust.max(th.noise_floor_rel * s_max);
    let narrow_bound = th.narrow_factor * dark_relaxation(&spectrum.meta.params);

    let mut report = StructureReport {
        s0,
        baseline,
        noise_floor,
        narrow_bound,
        pedestal: false,
        pedestal_depth: 0.0,
        narrow: false,
        narrow_width: None,
        intermediate: false,
        scales: Vec::new(),
        thresholds: *th,
    };
    let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    if hi - lo <= th.noise_factor * noise_floor || half.len() < 2 {
        return Ok(report);
    }

    // Response dD/d ln h between grid points, preceded by a zero at the
    // first positive point. Below it the grid says nothing about the shape.
    let mut pos = vec![half[0].0];
    let mut resp = vec![0.0];
    for w in half.windows(2) {
        pos.push((w[0].0 * w[1].0).sqrt());
        resp.push((w[1].1 - w[0].1) / (w[1].0 / w[0].0).ln());
    }
    // D at the right end of each response interval
    let d_end = |k: usize| -> f64 { half[k].1 };
    let r_max = resp.iter().fold(0.0f64, |m, &x| m.max(x));
    if r_max <= 0.0 {
        return Ok(report);
    }

    let found = peaks(&resp);
    let kept: Vec<(usize, f64)> = found
        .into_iter()
        .filter(|&(_, prom)| prom >= th.min_prominence * r_max)
        .collect();
    // valleys between consecutive kept maxima bound each component
    let mut bounds = vec![0usize];
    for w in kept.windows(2) {
        let (a, b) = (w[0].0, w[1].0);
        let v = (a..=b).min_by(|&x, &y| resp[x].total_cmp(&resp[y])).unwrap();
        bounds.push(v);
    }
    bounds.push(resp.len() - 1);
    let mut scales = Vec::new();
    let mut valleys = Vec::new();
    for (j, &(k, prom)) in kept.iter().enumerate() {
        let (a, b) = (bounds[j], bounds[j + 1]);
        let depth = d_end(b) - d_end(a);
        if depth > th.noise_factor * noise_floor {
            scales.push(Scale {
                omega: pos[k],
                depth,
                prominence: prom / r_max,
                truncated: k == resp.len() - 1,
                class: ScaleClass::Intermediate,
            });
            valleys.push((a, b));
        }
    }

    let m = scales.len();
    if m == 0 {
        return Ok(report);
    }
    if scales[0].omega <= narrow_bound {
        scales[0].class = ScaleClass::Narrow;
    }
    if scales[m - 1].class != ScaleClass::Narrow {
        scales[m - 1].class = ScaleClass::Pedestal;
    }
    report.narrow = scales[0].class == ScaleClass::Narrow;
    report.pedestal = scales[m - 1].class == ScaleClass::Pedestal;
    report.intermediate = scales.iter().any(|s| s.class == ScaleClass::Intermediate);
    if report.pedestal {
        let below = d_end(valleys[m - 1].0);
        report.pedestal_depth = baseline - (s0 + below);
    }
    if report.narrow {
        let top = d_end(valleys[0].1);
        let target = 0.5 * top;
        let mut prev = (0.0, 0.0);
        for &(h, d) in &half {
            if d >= target {
                let w = if d > prev.1 { (target - prev.1) / (d - prev.1) } else { 1.0 };
                report.narrow_width = Some(2.0 * (prev.0 + w * (h - prev.0)));
                break;
            }
            prev = (h, d);
        }
    }
    report.scales = scales;
    Ok(report)
}

const HZ: f64 = 1.0 / (2.0 * std::f64::consts::PI);

impl fmt::Display for StructureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let th = &self.thresholds;
        writeln!(f, "s0 = {:.6e}", self.s0)?;
        writeln!(f, "baseline = {:.6e}  (mean over |omega| >= {:.2} of the grid edge)", self.baseline, 1.0 - th.baseline_fraction)?;
        writeln!(f, "noise_floor = {:.3e}  (robust sd of baseline second differences, floor {:.0e} * max S)", self.noise_floor, th.noise_floor_rel)?;
        writeln!(
            f,
            "thresholds: depth > {} * noise_floor, prominence >= {} * max response, narrow scale <= {} * dark relaxation = {:.1} Hz",
            th.noise_factor,
            th.min_prominence,
            th.narrow_factor,
            self.narrow_bound * HZ
        )?;
        for s in &self.scales {
            writeln!(
                f,
                "scale {:>12.1} Hz  depth {:.4e}  prominence {:.3}  {:?}{}",
                s.omega * HZ,
                s.depth,
                s.prominence,
                s.class,
                if s.truncated { " (extends past grid)" } else { "" }
            )?;
        }
        writeln!(f, "pedestal = {}  depth {:.4e}", self.pedestal, self.pedestal_depth)?;
        match self.narrow_width {
            Some(w) => writeln!(f, "narrow = {}  half-depth width {:.1} Hz", self.narrow, w * HZ)?,
            None => writeln!(f, "narrow = {}", self.narrow)?,
        }
        writeln!(f, "intermediate = {}", self.intermediate)
    }
}
