//! CSV spectra and their metadata sidecars.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

/// One detuning of an output spectrum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Row {
    pub omega: f64,
    pub analytic: Option<f64>,
    /// Estimate and standard error.
    pub mc: Option<(f64, f64)>,
}

/// 17 significant digits, enough to reproduce any `f64` exactly.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_header(analytic: bool, mc: bool) -> String {
    let mut h = String::from("omega_rad_s");
    if analytic {
        h.push_str(",rho33_analytic");
    }
    if mc {
        h.push_str(",rho33_mc,mc_stderr");
    }
    h
}

pub fn render_csv(rows: &[Row]) -> String {
    let analytic = rows.first().is_some_and(|r| r.analytic.is_some());
    let mc = rows.first().is_some_and(|r| r.mc.is_some());
    let mut out = csv_header(analytic, mc);
    out.push('\n');
    for r in rows {
        out.push_str(&fmt17(r.omega));
        if let Some(a) = r.analytic {
            out.push(',');
            out.push_str(&fmt17(a));
        }
        if let Some((m, s)) = r.mc {
            out.push(',');
            out.push_str(&fmt17(m));
            out.push(',');
            out.push_str(&fmt17(s));
        }
        out.push('\n');
    }
    out
}

/// Header and numeric rows of a CSV written by [`render_csv`].
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or("empty file")?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        let row = l
            .split(',')
            .map(|v| v.parse::<f64>().map_err(|e| format!("row {}: {e}", i + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != header.len() {
            return Err(format!("row {}: {} fields, header has {}", i + 1, row.len(), header.len()));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// `spectrum.csv` → `spectrum.csv.meta`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

pub fn write_file(path: &Path, contents: &str) -> io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    f.flush()
}

/// Largest `|analytic − mc|/stderr` over rows that have both.
pub fn max_z(rows: &[Row]) -> Option<f64> {
    rows.iter()
        .filter_map(|r| match (r.analytic, r.mc) {
            (Some(a), Some((m, s))) if s > 0.0 => Some((a - m).abs() / s),
            _ => None,
        })
        .reduce(f64::max)
}
