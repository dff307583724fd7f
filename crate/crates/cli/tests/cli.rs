use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_segtrade");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn run_config(cmd: &str, config: &Path, out: &Path) -> Output {
    run(&[cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn table(path: &Path) -> (String, Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let comment = lines.next().unwrap().to_string();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (comment, header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let k = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[k].parse().unwrap()).collect()
}

const SMALL_SIM: &str = "n_regions_home = 10\nn_industries = 6\nn_foreign = 4\nyears = [2006, 2008, 2009, 2010, 2011]\n";

#[test]
fn symmetric_solve_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config("solve", &configs().join("solve.toml"), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let (comment, header, rows) = table(&dir.path().join("equilibrium.csv"));
    assert!(comment.starts_with(&format!("# segtrade {} config_sha256=", env!("CARGO_PKG_VERSION"))));
    assert!(comment.ends_with(" seed=0"));
    let wage_f = column(&header, &rows, "wage_f");
    let ratio = column(&header, &rows, "employment_ratio");
    for r in 0..3 {
        assert_eq!(column(&header, &rows, "wage_m")[r], 1.0);
        // Unit disutility and elasticity: the supply ratio equals the wage ratio.
        assert!((ratio[r] - wage_f[r]).abs() <= 1e-12);
        assert!((wage_f[r] - wage_f[0]).abs() <= 1e-12);
    }

    // Own share 1 / (1 + 2 tau^(1 - sigma)) in both sectors.
    let own = 1.0 / (1.0 + 2.0 * 1.3f64.powf(-3.0));
    let (_, sh, srows) = table(&dir.path().join("trade_shares.csv"));
    let share = column(&sh, &srows, "share");
    for (row, s) in srows.iter().zip(share) {
        let expected = if row[1] == row[2] { own } else { (1.0 - own) / 2.0 };
        assert!((s - expected).abs() <= 1e-12, "{row:?}");
    }
    let report = fs::read_to_string(dir.path().join("solve_report.txt")).unwrap();
    assert!(report.contains("converged = true"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = a.path().join("sim.toml");
    fs::write(&cfg, format!("[simulation]\n{SMALL_SIM}")).unwrap();
    for (dir, jobs) in [(a.path(), "1"), (b.path(), "3")] {
        let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.join("panel").to_str().unwrap(), "--seed", "5", "--jobs", jobs]);
        assert!(out.status.success());
    }
    for name in ["employment.csv", "exports.csv", "gdp.csv", "controls.csv"] {
        let x = fs::read(a.path().join("panel").join(name)).unwrap();
        let y = fs::read(b.path().join("panel").join(name)).unwrap();
        assert_eq!(x, y, "{name}");
        assert!(String::from_utf8_lossy(&x).lines().next().unwrap().ends_with(" seed=5"));
    }
}

#[test]
fn unknown_key_is_a_validation_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    let text = fs::read_to_string(configs().join("solve.toml")).unwrap().replace("sigma = 4.0", "sigma = 4.0\nsigmma = 3.0");
    fs::write(&cfg, text).unwrap();
    let out = run_config("solve", &cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigmma"));
}

#[test]
fn invalid_parameters_and_missing_files_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    let text = fs::read_to_string(configs().join("solve.toml")).unwrap().replace("sigma = 4.0", "sigma = 1.0");
    fs::write(&cfg, text).unwrap();
    assert_eq!(run_config("solve", &cfg, &dir.path().join("out")).status.code(), Some(2));
    assert_eq!(run_config("solve", &dir.path().join("missing.toml"), &dir.path().join("out")).status.code(), Some(2));
}

#[test]
fn iteration_cap_is_a_convergence_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("capped.toml");
    let text = fs::read_to_string(configs().join("solve.toml"))
        .unwrap()
        .replace("max_iterations = 10000", "max_iterations = 2\nnewton_polish = false")
        .replace("alpha = [0.5, 0.5, 0.5]", "alpha = [0.2, 0.5, 0.8]");
    fs::write(&cfg, text).unwrap();
    let out = run_config("solve", &cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn constant_destination_gdp_is_an_estimation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("flat.toml");
    fs::write(&cfg, format!("[simulation]\n{SMALL_SIM}\n[simulation.gdp]\nvolatility = 0.0\ndrift = 0.0\n")).unwrap();
    let out = run_config("estimate", &cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulated_panel_estimates_a_negative_ratio_effect() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("panel");
    assert!(run_config("simulate", &configs().join("simulate.toml"), &panel).status.success());
    let cfg = dir.path().join("estimate.toml");
    fs::write(&cfg, "panel_dir = \"panel\"\n\n[estimation]\noutcomes = [\"ratio\", \"female\"]\n").unwrap();
    let out = run_config("estimate", &cfg, &dir.path().join("est"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let (comment, header, rows) = table(&dir.path().join("est/results.csv"));
    assert!(comment.ends_with(" seed=0"));
    assert_eq!(header, ["outcome", "spec", "beta", "se_cluster", "se_aae", "f_stat", "n"]);
    // Spec (4) needs a manufacturing industry list, so three specs per outcome.
    assert_eq!(rows.len(), 6);
    let spec3 = rows.iter().find(|r| r[0] == "ratio" && r[1] == "3").unwrap();
    let beta: f64 = spec3[2].parse().unwrap();
    let f: f64 = spec3[5].parse().unwrap();
    assert!(beta < 0.0 && f > 10.0, "{spec3:?}");
    assert_eq!(spec3[6], "168");
}

#[test]
fn sweep_writes_both_sign_regions() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config("prop1-sweep", &configs().join("prop1_sweep.toml"), dir.path());
    assert!(out.status.success());
    let (_, header, rows) = table(&dir.path().join("sign_map.csv"));
    assert_eq!(rows.len(), 400);
    let k = header.iter().position(|h| h == "realized_sign").unwrap();
    assert!(rows.iter().any(|r| r[k] == "negative") && rows.iter().any(|r| r[k] == "positive"));
}
