use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cpt_cli::config::{parse_config, RunConfig, RunMode};
use cpt_cli::output::max_z;
use cpt_cli::run;

#[derive(Parser)]
#[command(name = "cpt", version, about = "Wall-averaged CPT resonance spectra")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// `key = value` configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (sweep, compare) or directory (fig5, distributions)
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    mode: Option<RunMode>,
    /// Elastic wall-collision probability
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo atoms per detuning
    #[arg(long, global = true)]
    atoms: Option<usize>,
    /// Velocity quadrature order
    #[arg(long, global = true)]
    quad: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Spectrum on the configured detuning grid
    Sweep,
    /// Benchmark panels a-f at α = 0, 0.25, 0.5, 0.75, 1
    Fig5,
    /// Analytic and Monte Carlo side by side at a few detunings
    Compare {
        /// Raman detunings in rad/s, comma separated
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        omegas: Option<Vec<f64>>,
    },
    /// Tables of the exact and fitted dwell-time laws
    Distributions,
}

fn load(common: &Common) -> Result<RunConfig, String> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(o) = &common.output {
        cfg.output_path = o.clone();
    }
    if let Some(m) = common.mode {
        cfg.mode = m;
    }
    if let Some(a) = common.alpha {
        cfg.params = cfg.params.with_alpha(a);
    }
    if let Some(s) = common.seed {
        cfg.mc.seed = s;
    }
    if let Some(n) = common.atoms {
        cfg.mc.n_atoms = n;
    }
    if let Some(q) = common.quad {
        cfg.quadrature_order = q;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), String> {
    let mut cfg = load(&cli.common)?;
    let explicit_output = cli.common.output.is_some() || cli.common.config.is_some();
    match cli.command {
        Command::Sweep => {
            let rows = run::run_sweep(&cfg).map_err(|e| e.to_string())?;
            eprintln!("wrote {} points to {}", rows.len(), cfg.output_path.display());
            if let Some(z) = max_z(&rows) {
                eprintln!("max |analytic - mc| / stderr = {z:.3}");
            }
        }
        Command::Fig5 => {
            let dir = cli.common.output.clone().unwrap_or_else(|| PathBuf::from("fig5"));
            let panels = run::run_fig5(&cfg, &dir).map_err(|e| e.to_string())?;
            for ps in &panels {
                eprintln!("panel {}: S(0) decreasing in alpha = {}", ps.panel, ps.s0_decreasing);
            }
            eprintln!("wrote {}", dir.display());
        }
        Command::Compare { omegas } => {
            if !explicit_output {
                cfg.output_path = PathBuf::from("compare.csv");
            }
            let tp = 2.0 * std::f64::consts::PI;
            let omegas = omegas.unwrap_or_else(|| vec![-tp * 1e4, -tp * 200.0, 0.0, tp * 200.0, tp * 1e4]);
            let rows = run::run_compare(&cfg, &omegas).map_err(|e| e.to_string())?;
            println!("{:>14} {:>14} {:>14} {:>11} {:>7}", "omega_rad_s", "analytic", "mc", "stderr", "z");
            for r in &rows {
                let a = r.analytic.unwrap_or(f64::NAN);
                let (m, s) = r.mc.unwrap_or((f64::NAN, f64::NAN));
                println!("{:>14.6e} {:>14.6e} {:>14.6e} {:>11.3e} {:>7.2}", r.omega, a, m, s, (m - a) / s);
            }
            eprintln!("wrote {}", cfg.output_path.display());
        }
        Command::Distributions => {
            let dir = cli.common.output.clone().unwrap_or_else(|| PathBuf::from("distributions"));
            run::run_distributions(&cfg, &dir).map_err(|e| e.to_string())?;
            eprintln!("wrote {}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
