use std::path::Path;
use std::process::{Command, Output};

use cpt_cli::config::{parse_config, serialize, RunConfig, RunMode};
use cpt_cli::output::parse_csv;
use cpt_core::montecarlo::{DurationLaws, TrajectoryMode};
use proptest::prelude::*;

fn cpt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpt")).current_dir(dir).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = "# small sweep\nomega_points = 21\nomega_span = 6.283e4\nquadrature_order = 48\noutput = out/s.csv\n";

#[test]
fn sweep_writes_csv_and_sidecar() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("run.cfg"), SMALL).unwrap();
    let o = cpt(tmp.path(), &["sweep", "--config", "run.cfg", "--seed", "99", "--alpha", "0.25"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(tmp.path().join("out/s.csv")).unwrap();
    let (header, rows) = parse_csv(&text).unwrap();
    assert_eq!(header.join(","), "omega_rad_s,rho33_analytic");
    assert_eq!(rows.len(), 21);
    assert_eq!(rows[0][0], -6.283e4);
    assert_eq!(rows[10][0], 0.0);
    let first = text.lines().nth(1).unwrap();
    for field in first.split(',') {
        let mantissa = field.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17, "{field}");
    }
    let meta = std::fs::read_to_string(tmp.path().join("out/s.csv.meta")).unwrap();
    for needle in ["version = ", "mc_seed = 99", "quadrature_order = 48", "alpha = 0.25", "points = 21"] {
        assert!(meta.contains(needle), "missing `{needle}` in\n{meta}");
    }
    assert!(!meta.contains("comparison"));
}

#[test]
fn unknown_key_is_rejected_with_its_line() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.cfg"), "alpha = 0.5\n\nbeam_radus = 1e-3\n").unwrap();
    let o = cpt(tmp.path(), &["sweep", "--config", "bad.cfg"]);
    assert!(!o.status.success());
    let e = stderr(&o);
    assert!(e.contains("line 3") && e.contains("beam_radus"), "{e}");
    assert!(!tmp.path().join("spectrum.csv").exists());
}

#[test]
fn unwritable_output_fails() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("file"), "").unwrap();
    let o = cpt(tmp.path(), &["sweep", "--quad", "16", "--output", "file/x.csv"]);
    assert!(!o.status.success());
}

#[test]
fn both_mode_adds_mc_columns_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("run.cfg"), "omega_points = 3\nquadrature_order = 32\n").unwrap();
    let o = cpt(tmp.path(), &["sweep", "--config", "run.cfg", "--mode", "both", "--atoms", "200", "--output", "b.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = parse_csv(&std::fs::read_to_string(tmp.path().join("b.csv")).unwrap()).unwrap();
    assert_eq!(header.join(","), "omega_rad_s,rho33_analytic,rho33_mc,mc_stderr");
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.len() == 4 && r[1] > 0.0 && r[3] > 0.0));
    let meta = std::fs::read_to_string(tmp.path().join("b.csv.meta")).unwrap();
    assert!(meta.contains("comparison_max_abs_diff_over_stderr = "), "{meta}");
    assert!(meta.contains("mc_atoms = 200"));
}

#[test]
fn compare_prints_and_writes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cpt(tmp.path(), &["compare", "--atoms", "100", "--quad", "32", "--omegas", "-1000,0,1000,0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().count(), 4, "{stdout}");
    let (_, rows) = parse_csv(&std::fs::read_to_string(tmp.path().join("compare.csv")).unwrap()).unwrap();
    let omegas: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(omegas, vec![-1000.0, 0.0, 1000.0]);
}

#[test]
fn distributions_are_tabulated() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cpt(tmp.path(), &["distributions", "--output", "d"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["observation_time.csv", "dark_chord.csv", "distributions.meta"] {
        let text = std::fs::read_to_string(tmp.path().join("d").join(f)).unwrap();
        assert!(text.lines().count() > 2, "{f}");
    }
}

fn mode() -> impl Strategy<Value = RunMode> {
    prop_oneof![Just(RunMode::Analytic), Just(RunMode::Mc), Just(RunMode::Both)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trips(
        alpha in 0.0f64..=1.0,
        beam in 1e-4f64..4.9e-3,
        rabi in 1e3f64..1e8,
        temperature in 1.0f64..500.0,
        span in 1.0f64..1e7,
        points in 2usize..5000,
        order in 1usize..=256,
        atoms in 1usize..1_000_000,
        seed in any::<u64>(),
        m in mode(),
        exact_geometry in any::<bool>(),
        exact_laws in any::<bool>(),
        burn_scale in 0.1f64..10.0,
    ) {
        let mut cfg = RunConfig::default();
        cfg.params = cfg.params.with_alpha(alpha);
        cfg.params.beam_radius = beam;
        cfg.params.rabi_1 = rabi;
        cfg.params.rabi_2 = rabi * 0.7;
        cfg.params.temperature = temperature;
        cfg.omega_span = span;
        cfg.omega_points = points;
        cfg.quadrature_order = order;
        cfg.mode = m;
        cfg.mc.n_atoms = atoms;
        cfg.mc.seed = seed;
        cfg.mc.mode = if exact_geometry { TrajectoryMode::ExactGeometry } else { TrajectoryMode::ModelFaithful };
        cfg.mc.laws = if exact_laws { DurationLaws::Exact } else { DurationLaws::Fitted };
        cfg.mc.burn_in *= burn_scale;
        cfg.mc.t_total = cfg.mc.burn_in * 3.0;
        cfg.output_path = "some dir/out.csv".into();
        prop_assert!(cfg.validate().is_ok());
        let back = parse_config(&serialize(&cfg)).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
