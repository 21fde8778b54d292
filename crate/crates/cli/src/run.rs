//! The subcommands: build spectra, write CSVs and sidecars.

use std::path::{Path, PathBuf};

use cpt_core::averaging::{log_symmetric_grid, rho33_average, sweep, symmetric_grid, AveragingOptions};
use cpt_core::distributions::{
    f_prime, f_prime_approx, f_t_approx, f_t_approx_norm, f_t_exact, GeometryDerived,
};
use cpt_core::montecarlo::estimate_rho33;
use cpt_core::{Params, Spectrum};

use crate::config::{serialize, RunConfig, RunMode};
use crate::output::{fmt17, max_z, render_csv, sidecar_path, write_file, Row};
use crate::structure::{report_structure, StructureError, StructureReport};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Core(#[from] cpt_core::Error),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Structure(#[from] StructureError),
}

fn write(path: &Path, text: &str) -> Result<(), RunError> {
    write_file(path, text).map_err(|source| RunError::Io { path: path.to_path_buf(), source })
}

fn options(cfg: &RunConfig) -> AveragingOptions {
    AveragingOptions { order: cfg.quadrature_order, ..Default::default() }
}

/// Beam radius, Rabi frequency and detuning-span factor of the six benchmark
/// panels; (b) repeats (a) on a ten times narrower window.
pub const FIG5_PANELS: [(char, f64, f64, f64); 6] = [
    ('a', 1.5e-3, 7.7e5, 1.0),
    ('b', 1.5e-3, 7.7e5, 0.1),
    ('c', 0.5e-3, 1.46e7, 1.0),
    ('d', 0.5e-3, 7.3e5, 1.0),
    ('e', 5.0e-3, 3.3e5, 1.0),
    ('f', 5.0e-3, 1.46e6, 1.0),
];

pub const FIG5_ALPHAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

pub fn panel_params(base: &Params, beam_radius: f64, rabi: f64, alpha: f64) -> Params {
    Params { beam_radius, ..*base }.with_rabi(rabi).with_alpha(alpha)
}

/// Grid for structure detection: 241 log-spaced magnitudes per sign from
/// 2π×5 Hz to 2π×5 MHz plus zero, wide enough for power-broadened pedestals
/// and fine enough near zero for the narrow peak.
pub fn structure_grid() -> Vec<f64> {
    let tp = 2.0 * std::f64::consts::PI;
    log_symmetric_grid(tp * 5.0, tp * 5.0e6, 241)
}

/// Spectrum rows for `grid`, analytic and/or Monte Carlo.
pub fn compute_rows(cfg: &RunConfig, grid: &[f64]) -> Result<(Vec<Row>, Option<Spectrum>), RunError> {
    let analytic = if cfg.mode.analytic() {
        Some(sweep(&cfg.params, grid, &options(cfg))?)
    } else {
        None
    };
    let mut rows = Vec::with_capacity(grid.len());
    for (i, &omega) in grid.iter().enumerate() {
        let mc = if cfg.mode.mc() {
            let e = estimate_rho33(&cfg.params, omega, &cfg.mc)?;
            Some((e.mean, e.std_error))
        } else {
            None
        };
        rows.push(Row { omega, analytic: analytic.as_ref().map(|s| s.points[i].1), mc });
    }
    Ok((rows, analytic))
}

fn sidecar(cfg: &RunConfig, rows: &[Row], spectrum: Option<&Spectrum>, extra: &str) -> String {
    let mut s = format!("# cpt {VERSION}\nversion = {VERSION}\n");
    s.push_str(&serialize(cfg));
    if let Some(sp) = spectrum {
        s.push_str(&format!("quadrature_kind = {:?}\n", sp.meta.quadrature_kind));
        s.push_str(&format!("eigen_fallbacks = {}\n", sp.meta.fallbacks));
        s.push_str(&format!("max_spectral_radius = {}\n", sp.meta.max_radius));
    }
    s.push_str(&format!("points = {}\n", rows.len()));
    if cfg.mode == RunMode::Both {
        let z = max_z(rows).unwrap_or(f64::NAN);
        s.push_str(&format!("comparison_max_abs_diff_over_stderr = {z}\n"));
    }
    s.push_str(extra);
    s
}

/// Writes `rows` to `path` and the sidecar next to it.
pub fn write_spectrum(cfg: &RunConfig, path: &Path, rows: &[Row], spectrum: Option<&Spectrum>, extra: &str) -> Result<(), RunError> {
    write(path, &render_csv(rows))?;
    write(&sidecar_path(path), &sidecar(cfg, rows, spectrum, extra))
}

/// `sweep`: the configured grid, written to the configured output.
pub fn run_sweep(cfg: &RunConfig) -> Result<Vec<Row>, RunError> {
    let grid = symmetric_grid(cfg.omega_span, cfg.omega_points);
    let (rows, spectrum) = compute_rows(cfg, &grid)?;
    write_spectrum(cfg, &cfg.output_path, &rows, spectrum.as_ref(), "")?;
    Ok(rows)
}

/// `compare`: analytic and Monte Carlo side by side at a few detunings.
pub fn run_compare(cfg: &RunConfig, omegas: &[f64]) -> Result<Vec<Row>, RunError> {
    let cfg = RunConfig { mode: RunMode::Both, ..cfg.clone() };
    let mut grid = omegas.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let (rows, spectrum) = compute_rows(&cfg, &grid)?;
    write_spectrum(&cfg, &cfg.output_path, &rows, spectrum.as_ref(), "")?;
    Ok(rows)
}

/// Structure of one panel at every α, with the `S(0)` ordering.
pub struct PanelStructure {
    pub panel: char,
    pub reports: Vec<(f64, StructureReport)>,
    pub s0_decreasing: bool,
}

pub fn panel_structure(base: &Params, order: usize, panel: char, beam_radius: f64, rabi: f64) -> Result<PanelStructure, RunError> {
    let grid = structure_grid();
    let opts = AveragingOptions { order, ..Default::default() };
    let mut reports = Vec::new();
    for &alpha in &FIG5_ALPHAS {
        let p = panel_params(base, beam_radius, rabi, alpha);
        let s = sweep(&p, &grid, &opts)?;
        reports.push((alpha, report_structure(&s)?));
    }
    let s0_decreasing = reports.windows(2).all(|w| w[1].1.s0 < w[0].1.s0);
    Ok(PanelStructure { panel, reports, s0_decreasing })
}

/// `fig5`: one CSV (plus sidecar) per panel and α under `dir`, and a
/// structure summary in `dir/structure.txt`.
pub fn run_fig5(cfg: &RunConfig, dir: &Path) -> Result<Vec<PanelStructure>, RunError> {
    let mut summary = String::new();
    let mut panels = Vec::new();
    for &(panel, r, v, span) in &FIG5_PANELS {
        for &alpha in &FIG5_ALPHAS {
            let c = RunConfig {
                params: panel_params(&cfg.params, r, v, alpha),
                omega_span: cfg.omega_span * span,
                ..cfg.clone()
            };
            let grid = symmetric_grid(c.omega_span, c.omega_points);
            let (rows, spectrum) = compute_rows(&c, &grid)?;
            let path = dir.join(format!("fig5_{panel}_alpha{alpha:.2}.csv"));
            write_spectrum(&c, &path, &rows, spectrum.as_ref(), &format!("panel = {panel}\n"))?;
        }
        if span != 1.0 {
            continue;
        }
        let ps = panel_structure(&cfg.params, cfg.quadrature_order, panel, r, v)?;
        for (alpha, rep) in &ps.reports {
            summary.push_str(&format!("## panel {panel}, r = {r} m, V = {v} 1/s, alpha = {alpha}\n{rep}\n"));
        }
        summary.push_str(&format!("## panel {panel}: S(0) strictly decreasing in alpha = {}\n\n", ps.s0_decreasing));
        panels.push(ps);
    }
    let head = format!(
        "# structure detection on a log grid of {} points, 2pi x (5 Hz .. 5 MHz)\n\n",
        structure_grid().len()
    );
    write(&dir.join("structure.txt"), &(head + &summary))?;
    Ok(panels)
}

/// `distributions`: exact and fitted dwell-time laws in the dimensionless
/// units of the fits, `x = t v_T / r` for the beam and `x = τ′ v_T / ℓ⊥`
/// for the dark chord.
pub fn run_distributions(cfg: &RunConfig, dir: &Path) -> Result<(), RunError> {
    let p = cfg.params;
    let g = GeometryDerived::new(&p)?;
    let scale = g.beam_scale(&p);
    let norm: f64 = f_t_approx_norm();
    let mut t = String::from("x,f_t_exact,f_t_approx,f_t_approx_normalized\n");
    for i in 0..=600 {
        let x = i as f64 * 0.01;
        let exact = f_t_exact(x * scale, &g, &p) * scale;
        let fit: f64 = f_t_approx(x);
        t.push_str(&format!("{},{},{},{}\n", fmt17(x), fmt17(exact), fmt17(fit), fmt17(fit / norm)));
    }
    write(&dir.join("observation_time.csv"), &t)?;
    let mut c = String::from("x,F_prime_exact,F_prime_approx\n");
    if g.ell_perp > 0.0 {
        let unit = g.chord_scale();
        for i in 0..=600 {
            let x = i as f64 * 0.01;
            c.push_str(&format!("{},{},{}\n", fmt17(x), fmt17(f_prime(x * unit, &g)), fmt17(f_prime_approx(x))));
        }
    }
    write(&dir.join("dark_chord.csv"), &c)?;
    let meta = format!(
        "version = {VERSION}\n{}tau_bar = {}\ntau_bar_prime = {}\nell_perp = {}\ntau_bar_dark = {}\nf_t_approx_integral = {}\n",
        serialize(cfg),
        g.tau_bar,
        g.tau_bar_prime,
        g.ell_perp,
        g.tau_bar_dark,
        norm
    );
    write(&dir.join("distributions.meta"), &meta)
}

/// Single analytic value, for quick checks from the command line.
pub fn analytic_point(cfg: &RunConfig, omega: f64) -> Result<f64, RunError> {
    Ok(rho33_average(&cfg.params.with_detuning(omega), &options(cfg))?)
}
