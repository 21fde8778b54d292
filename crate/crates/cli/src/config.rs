//! Run configuration and its `key = value` file format.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! All quantities are SI; angular frequencies and rates are in rad/s and 1/s.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use cpt_core::averaging::DEFAULT_ORDER;
use cpt_core::montecarlo::{DurationLaws, TrajectoryConfig, TrajectoryMode};
use cpt_core::numerics::MAX_ORDER;
use cpt_core::Params;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    Analytic,
    Mc,
    Both,
}

impl RunMode {
    pub fn analytic(self) -> bool {
        self != RunMode::Mc
    }

    pub fn mc(self) -> bool {
        self != RunMode::Analytic
    }
}

impl FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "analytic" => Ok(RunMode::Analytic),
            "mc" => Ok(RunMode::Mc),
            "both" => Ok(RunMode::Both),
            _ => Err(format!("expected analytic, mc or both, got `{s}`")),
        }
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunMode::Analytic => "analytic",
            RunMode::Mc => "mc",
            RunMode::Both => "both",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// The Raman detuning inside is ignored; the sweep grid sets it.
    pub params: Params,
    /// Half-width of the detuning grid, rad/s.
    pub omega_span: f64,
    pub omega_points: usize,
    pub mode: RunMode,
    pub mc: TrajectoryConfig,
    pub output_path: PathBuf,
    pub quadrature_order: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let params = Params::default();
        RunConfig {
            params,
            omega_span: 2.0 * std::f64::consts::PI * 5.0e4,
            omega_points: 801,
            mode: RunMode::Analytic,
            mc: TrajectoryConfig::new(&params, TrajectoryMode::ModelFaithful),
            output_path: PathBuf::from("spectrum.csv"),
            quadrature_order: DEFAULT_ORDER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` given twice (first on line {first})")]
    Duplicate { line: usize, key: String, first: usize },
    #[error("line {line}: bad value for `{key}`: {message}")]
    Value { line: usize, key: String, message: String },
    #[error("`{key}`: {message}")]
    Invalid { key: String, message: String },
}

/// Keys in the order [`serialize`] writes them.
pub const KEYS: &[&str] = &[
    "gamma_ground",
    "gamma_excited",
    "laser_linewidth",
    "rabi_1",
    "rabi_2",
    "detuning_optical",
    "wavenumber",
    "temperature",
    "atom_mass",
    "cell_radius",
    "beam_radius",
    "alpha",
    "omega_span",
    "omega_points",
    "mode",
    "quadrature_order",
    "output",
    "mc_atoms",
    "mc_seed",
    "mc_t_total",
    "mc_burn_in",
    "mc_mode",
    "mc_laws",
];

fn parse_value<T: FromStr>(v: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| e.to_string())
}

fn parse_mc_mode(v: &str) -> Result<TrajectoryMode, String> {
    match v {
        "model-faithful" => Ok(TrajectoryMode::ModelFaithful),
        "exact-geometry" => Ok(TrajectoryMode::ExactGeometry),
        _ => Err(format!("expected model-faithful or exact-geometry, got `{v}`")),
    }
}

fn mc_mode_name(m: TrajectoryMode) -> &'static str {
    match m {
        TrajectoryMode::ModelFaithful => "model-faithful",
        TrajectoryMode::ExactGeometry => "exact-geometry",
    }
}

fn parse_laws(v: &str) -> Result<DurationLaws, String> {
    match v {
        "fitted" => Ok(DurationLaws::Fitted),
        "exact" => Ok(DurationLaws::Exact),
        _ => Err(format!("expected fitted or exact, got `{v}`")),
    }
}

fn laws_name(l: DurationLaws) -> &'static str {
    match l {
        DurationLaws::Fitted => "fitted",
        DurationLaws::Exact => "exact",
    }
}

fn set(cfg: &mut RunConfig, times: &mut (Option<f64>, Option<f64>), key: &str, v: &str) -> Result<(), String> {
    let p = &mut cfg.params;
    match key {
        "gamma_ground" => p.gamma_ground = parse_value(v)?,
        "gamma_excited" => p.gamma_excited = parse_value(v)?,
        "laser_linewidth" => p.laser_linewidth = parse_value(v)?,
        "rabi_1" => p.rabi_1 = parse_value(v)?,
        "rabi_2" => p.rabi_2 = parse_value(v)?,
        "detuning_optical" => p.detuning_optical = parse_value(v)?,
        "wavenumber" => p.wavenumber = parse_value(v)?,
        "temperature" => p.temperature = parse_value(v)?,
        "atom_mass" => p.atom_mass = parse_value(v)?,
        "cell_radius" => p.cell_radius = parse_value(v)?,
        "beam_radius" => p.beam_radius = parse_value(v)?,
        "alpha" => p.elastic_prob = parse_value(v)?,
        "omega_span" => cfg.omega_span = parse_value(v)?,
        "omega_points" => cfg.omega_points = parse_value(v)?,
        "mode" => cfg.mode = v.parse()?,
        "quadrature_order" => cfg.quadrature_order = parse_value(v)?,
        "output" => cfg.output_path = PathBuf::from(v),
        "mc_atoms" => cfg.mc.n_atoms = parse_value(v)?,
        "mc_seed" => cfg.mc.seed = parse_value(v)?,
        "mc_t_total" => times.0 = Some(parse_value(v)?),
        "mc_burn_in" => times.1 = Some(parse_value(v)?),
        "mc_mode" => cfg.mc.mode = parse_mc_mode(v)?,
        "mc_laws" => cfg.mc.laws = parse_laws(v)?,
        _ => unreachable!("key table and setter disagree on `{key}`"),
    }
    Ok(())
}

/// Parses a configuration file. Keys left out keep the defaults of
/// [`RunConfig::default`]; the Monte Carlo burn-in defaults to `5/Γ` of the
/// configured `Γ` and the total time to twice the burn-in.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut seen: Vec<(&str, usize)> = Vec::new();
    let mut times = (None, None);
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            message: format!("expected `key = value`, got `{body}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let known = KEYS
            .iter()
            .find(|&&k| k == key)
            .ok_or_else(|| ConfigError::UnknownKey { line, key: key.to_string() })?;
        if let Some(&(_, first)) = seen.iter().find(|(k, _)| k == known) {
            return Err(ConfigError::Duplicate { line, key: key.to_string(), first });
        }
        seen.push((known, line));
        if value.is_empty() {
            return Err(ConfigError::Value { line, key: key.to_string(), message: "missing value".into() });
        }
        set(&mut cfg, &mut times, known, value).map_err(|message| ConfigError::Value {
            line,
            key: key.to_string(),
            message,
        })?;
    }
    let burn_in = times.1.unwrap_or(5.0 / cfg.params.gamma_ground);
    cfg.mc.burn_in = burn_in;
    cfg.mc.t_total = times.0.unwrap_or(2.0 * burn_in);
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, message: String| Err(ConfigError::Invalid { key: key.into(), message });
        if let Err(cpt_core::Error::InvalidParameter { name, reason }) = self.params.validate() {
            let key = if name == "elastic_prob" { "alpha" } else { name };
            return bad(key, reason);
        }
        if !(self.omega_span > 0.0) || !self.omega_span.is_finite() {
            return bad("omega_span", format!("{} must be positive and finite", self.omega_span));
        }
        if self.omega_points < 2 {
            return bad("omega_points", format!("{} must be at least 2", self.omega_points));
        }
        if !(1..=MAX_ORDER).contains(&self.quadrature_order) {
            return bad("quadrature_order", format!("{} outside 1..={MAX_ORDER}", self.quadrature_order));
        }
        if self.output_path.as_os_str().is_empty() {
            return bad("output", "empty path".into());
        }
        if let Err(cpt_core::Error::InvalidParameter { name, reason }) = self.mc.validate() {
            let key = match name {
                "n_atoms" => "mc_atoms",
                "burn_in" => "mc_burn_in",
                _ => "mc_t_total",
            };
            return bad(key, reason);
        }
        Ok(())
    }
}

/// Writes every key with its current value, one per line, in [`KEYS`] order.
/// Floats use the shortest representation that parses back exactly.
pub fn serialize(cfg: &RunConfig) -> String {
    let p = &cfg.params;
    let values: Vec<String> = vec![
        p.gamma_ground.to_string(),
        p.gamma_excited.to_string(),
        p.laser_linewidth.to_string(),
        p.rabi_1.to_string(),
        p.rabi_2.to_string(),
        p.detuning_optical.to_string(),
        p.wavenumber.to_string(),
        p.temperature.to_string(),
        p.atom_mass.to_string(),
        p.cell_radius.to_string(),
        p.beam_radius.to_string(),
        p.elastic_prob.to_string(),
        cfg.omega_span.to_string(),
        cfg.omega_points.to_string(),
        cfg.mode.to_string(),
        cfg.quadrature_order.to_string(),
        cfg.output_path.display().to_string(),
        cfg.mc.n_atoms.to_string(),
        cfg.mc.seed.to_string(),
        cfg.mc.t_total.to_string(),
        cfg.mc.burn_in.to_string(),
        mc_mode_name(cfg.mc.mode).to_string(),
        laws_name(cfg.mc.laws).to_string(),
    ];
    KEYS.iter()
        .zip(values)
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}
