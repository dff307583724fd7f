//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use segtrade_cli::{run_sweep, LoadedConfig, SweepConfig, SweepSummary};
use segtrade_core::*;
use segtrade_econometrics::*;
use segtrade_panel::*;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn random_economy(rng: &mut ChaCha8Rng) -> EconomyParams<f64> {
    let n = rng.random_range(2..=6usize);
    let mut v = |lo: f64, hi: f64| -> Vec<f64> { (0..n).map(|_| rng.random_range(lo..hi)).collect() };
    let alpha = v(0.1, 0.9);
    let beta_m = v(0.55, 0.95);
    let beta_f = v(0.05, 0.45);
    let nu = v(0.5, 2.0);
    let eta = v(0.3, 3.0);
    let z_m = v(0.5, 2.0);
    let z_f = v(0.5, 2.0);
    let endowment = v(0.0, 2.0);
    let pos = v(0.0, 1.0);
    let slope = rng.random_range(0.1..1.0);
    let border = rng.random_range(0.0..0.3);
    // Costs from distances on a line satisfy the triangle inequality.
    let tau = (0..n)
        .map(|o| (0..n).map(|d| if o == d { 1.0 } else { (slope * (pos[o] - pos[d]).abs() + border).exp() }).collect())
        .collect();
    let p = EconomyParams { n_regions: n, sigma: rng.random_range(1.5..8.0), alpha, beta_m, beta_f, nu, eta, z_m, z_f, tau, endowment };
    p.validate().expect("generator yields valid economies");
    p
}

fn random_economies(count: usize) -> Vec<EconomyParams<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    (0..count).map(|_| random_economy(&mut rng)).collect()
}

fn equilibrium_correctness() -> Verdict {
    let opts = SolverOptions::default();
    let world = SolverOptions::default().with_numeraire(Numeraire::FixWorldIncome);
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-8 * x.abs().max(1.0);
    let (mut worst_residual, mut worst_walras, mut worst_column, mut failures) = (0.0f64, 0.0f64, 0.0f64, Vec::new());
    for (k, p) in random_economies(200).iter().enumerate() {
        let (eq, report) = match solve(p, &opts) {
            Ok(x) => x,
            Err(e) => {
                failures.push(format!("economy {k}: {e}"));
                continue;
            }
        };
        worst_residual = worst_residual.max(report.residual);
        worst_walras = worst_walras.max(walras_check(p, &eq));
        for d in 0..p.n() {
            for s in Sector::BOTH {
                let col: f64 = (0..p.n()).map(|o| eq.share(s)[o][d]).sum();
                worst_column = worst_column.max((col - 1.0).abs());
            }
        }
        let invariant = solve(p, &world).map(|(b, _)| {
            (0..p.n()).all(|o| {
                close(eq.labor_m[o], b.labor_m[o])
                    && close(eq.labor_f[o], b.labor_f[o])
                    && close(eq.wage_ratio(o), b.wage_ratio(o))
                    && close(eq.income[o] / eq.price_ideal[o], b.income[o] / b.price_ideal[o])
                    && (0..p.n()).all(|d| close(eq.share_m[o][d], b.share_m[o][d]) && close(eq.share_f[o][d], b.share_f[o][d]))
            })
        });
        if !matches!(invariant, Ok(true)) {
            failures.push(format!("economy {k}: numeraire invariance"));
        }
    }
    let pass = failures.is_empty() && worst_residual <= 1e-12 && worst_walras <= 1e-11 && worst_column <= 1e-10;
    verdict(
        pass,
        format!(
            "200 economies, max residual {worst_residual:.2e}, max Walras gap {worst_walras:.2e}, max column error {worst_column:.2e}, failures {failures:?}"
        ),
    )
}

fn ratio_derivative() -> Verdict {
    let opts = SolverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut checked, mut sign_ok, mut magnitude_checked, mut magnitude_ok, mut worst) = (0, 0, 0, 0, 0.0f64);
    for p in random_economies(200) {
        let n = p.n();
        let origin = rng.random_range(0..n);
        let dest = (origin + rng.random_range(1..n)) % n;
        let Ok((eq, _)) = solve(&p, &opts) else { continue };
        let exact = analytic_ratio_derivative(origin, dest, &eq, &p).expect("derivative");
        let step = 1e-5 * (1.0 + p.endowment[dest]);
        let Ok(fd) = finite_difference_derivative(&p, origin, dest, step, &opts) else { continue };
        checked += 1;
        if exact.signum() == fd.signum() {
            sign_ok += 1;
        }
        if exact.abs() > 1e-6 {
            magnitude_checked += 1;
            let r = ((exact - fd) / exact).abs();
            worst = worst.max(r);
            if r <= 0.05 {
                magnitude_ok += 1;
            }
        }
    }
    verdict(
        checked > 0 && sign_ok == checked && magnitude_ok == magnitude_checked,
        format!("{sign_ok}/{checked} signs agree, {magnitude_ok}/{magnitude_checked} within 5% (worst {worst:.2e})"),
    )
}

fn sweep_config() -> SweepConfig {
    LoadedConfig::read(&workspace().join("configs/prop1_sweep.toml")).unwrap().parse().unwrap()
}

fn sign_map() -> Verdict {
    let cfg = sweep_config();
    let (eq, _) = solve(&cfg.economy, &cfg.solver).unwrap();
    let o = cfg.sweep.origin;
    let x = xi(o, &eq, &cfg.economy).unwrap();
    let theta = x / (1.0 + x);
    let interior = cfg.economy.beta_f[o] < theta && theta < cfg.economy.beta_m[o];
    let points = run_sweep(&cfg).unwrap();
    let s = SweepSummary::of(&points);
    let pass = interior && s.points == 400 && s.negative > 0 && s.positive > 0 && s.agreement() >= 0.99;
    verdict(
        pass,
        format!(
            "beta_f {} < {theta:.4} < beta_m {}: {interior}; {} points, {} converged, {} negative, {} positive, agreement {:.4}",
            cfg.economy.beta_f[o], cfg.economy.beta_m[o], s.points, s.converged, s.negative, s.positive, s.agreement()
        ),
    )
}

fn ho_contrast_check() -> Verdict {
    let cfg = sweep_config();
    let points = run_sweep(&cfg).unwrap();
    let (mut cases, mut ok, mut worst_identity) = (0, 0, 0.0f64);
    for p in &points {
        let Some(c) = &p.contrast else { continue };
        worst_identity = worst_identity.max(c.identity_error);
        let male_skewed = p.alpha > 0.5;
        if male_skewed && c.aggregate_shocked < c.aggregate_base {
            cases += 1;
            let both_rise = matches!((c.ratio_m.change(), c.ratio_f.change()), (Some(a), Some(b)) if a > 0.0 && b > 0.0);
            if both_rise && c.mu_shocked > c.mu_base {
                ok += 1;
            }
        }
    }
    verdict(
        cases > 0 && ok == cases && worst_identity <= 1e-10,
        format!("{ok}/{cases} male-skewed falling-ratio cases with both sector ratios and mu rising; max identity error {worst_identity:.2e}"),
    )
}

fn estimator_recovery() -> Verdict {
    let sim = SimConfig::default();
    let panel = simulate_panel(&sim).unwrap();
    let spec3 = estimate_spec(&PanelIndex::new(&panel).unwrap(), Outcome::Ratio, Specification::FixedEffectsControls, None).unwrap();
    let template = DesignMatrixBundle::from_panel(&panel, Outcome::Ratio, &BundleSpec { controls: true, manufacturing_industries: None }).unwrap();
    let mc = monte_carlo(&template, &McConfig { reps: 500, ..McConfig::default() }).unwrap();
    let pass = spec3.beta_hat < 0.0
        && spec3.first_stage_f > 10.0
        && (0.90..=0.98).contains(&mc.coverage)
        && mc.bias_within(2.0);
    verdict(
        pass,
        format!(
            "{} regions x {} industries x {} years; spec (3) beta {:.4e} (cluster t {:.2}), F {:.1}; MC coverage {:.3}, |bias| {:.4} vs 2 MC SE {:.4}",
            sim.n_regions_home,
            sim.n_industries,
            sim.years.len(),
            spec3.beta_hat,
            spec3.t_stat(),
            spec3.first_stage_f,
            mc.coverage,
            mc.bias.abs(),
            2.0 * mc.mc_se
        ),
    )
}

fn variance_estimators() -> Verdict {
    let panel = simulate_panel(&SimConfig::default()).unwrap();
    let raw = DesignMatrixBundle::from_panel(&panel, Outcome::Ratio, &BundleSpec { controls: true, manufacturing_industries: None }).unwrap();
    let (within, _) = within_transform(&raw, FeSpec::TwoWay).unwrap();
    let r = tsls(&within).unwrap();
    let n = within.n();
    let singleton: Vec<usize> = (0..n).collect();
    let cl = cluster_robust_vcov(&r, &singleton).unwrap();
    let hc = hc1_vcov(&r).unwrap();
    let k = cl.nrows();
    let mut singleton_gap = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let scale = hc[(i, i)].abs().max(hc[(j, j)].abs());
            singleton_gap = singleton_gap.max((cl[(i, j)] - hc[(i, j)]).abs() / scale);
        }
    }

    // One shock per row, valued at the row's instrument.
    let mut bij = raw.clone();
    bij.shocks = Some(ShockExposure {
        labels: (0..n).map(|s| format!("s{s}")).collect(),
        values: raw.instrument.clone(),
        weights: (0..n).map(|s| vec![(s, 1.0)]).collect(),
    });
    let (bw, _) = within_transform(&bij, FeSpec::TwoWay).unwrap();
    let rb = tsls(&bw).unwrap();
    let shock_clustered = cluster_robust_vcov(&rb, &singleton).unwrap()[(0, 0)].sqrt();
    let bijective_gap = (rb.se_aae.unwrap() - shock_clustered).abs() / shock_clustered;

    let rows = estimate_suite(&panel, &OutcomeSpec::default()).unwrap();
    let critical = 1.959963984540054;
    let mut unstable = Vec::new();
    let mut ratios = Vec::new();
    for row in &rows {
        let r = &row.result;
        let aae = r.se_aae.unwrap();
        ratios.push(aae / r.se_cluster);
        if (r.beta_hat.abs() / r.se_cluster > critical) != (r.beta_hat.abs() / aae > critical) {
            unstable.push(format!("{} ({})", row.outcome.label(), row.spec.label()));
        }
    }
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    verdict(
        singleton_gap <= 1e-12 && bijective_gap <= 1e-8 && unstable.is_empty(),
        format!(
            "singleton vs HC1 max gap {singleton_gap:.1e}, bijective shock-level vs shock-clustered gap {bijective_gap:.1e}, {}/{} classifications stable at 5% (AAE/cluster SE ratio {lo:.2}..{hi:.2}), unstable {unstable:?}",
            rows.len() - unstable.len(),
            rows.len()
        ),
    )
}

const ISIC_ROWS: [(&str, &str, u16); 31] = [
    ("1-3", "A", 0),
    ("5-9", "B", 65),
    ("10-12", "CA", 10),
    ("13-15", "CB", 50),
    ("16-19", "C", 60),
    ("20", "CE", 40),
    ("21-22", "C", 60),
    ("23", "CG", 20),
    ("24-25", "C", 60),
    ("26", "CI", 30),
    ("27", "CJ", 30),
    ("28", "CK", 30),
    ("29-33", "C", 60),
    ("35", "D", 67),
    ("36-39", "E", 68),
    ("41-43", "F", 69),
    ("45-47", "G", 72),
    ("49-53", "H", 76),
    ("55-56", "I", 79),
    ("58-63", "J", 76),
    ("64-66", "K", 82),
    ("68", "L", 85),
    ("72-75", "M", 85),
    ("77-82", "N", 85),
    ("84", "O", 93),
    ("85", "P", 93),
    ("86-88", "Q", 89),
    ("90-93", "R", 89),
    ("94-96", "S", 89),
    ("97-98", "T", 99),
    ("99", "U", 98),
];

const EBOPS_ROWS: [(&str, &str, u16); 9] = [
    ("SC", "205", 76),
    ("SD", "236", 79),
    ("SE", "249", 69),
    ("SF", "253", 82),
    ("SG", "260", 82),
    ("SH", "262", 76),
    ("SJ", "268", 85),
    ("SK", "287", 89),
    ("SL", "291", 93),
];

fn concordance_fidelity() -> Verdict {
    let mut bad = Vec::new();
    for (range, chapter, enpe) in ISIC_ROWS {
        let (lo, hi) = match range.split_once('-') {
            Some((a, b)) => (a.parse::<u16>().unwrap(), b.parse::<u16>().unwrap()),
            None => (range.parse().unwrap(), range.parse().unwrap()),
        };
        for division in lo..=hi {
            match map_code(&division.to_string(), Concordance::IsicToEnpe) {
                Ok(m) if m.enpe == enpe && m.row.via == chapter && m.row.source == range => {}
                other => bad.push(format!("ISIC {division}: {other:?}")),
            }
        }
    }
    for (code, id, enpe) in EBOPS_ROWS {
        for key in [code, id] {
            match map_code(key, Concordance::EbopsToEnpe) {
                Ok(m) if m.enpe == enpe && m.row.source == code && m.row.via == id => {}
                other => bad.push(format!("EBOPS {key}: {other:?}")),
            }
        }
    }
    let sizes = (Concordance::IsicToEnpe.table().len(), Concordance::EbopsToEnpe.table().len());
    verdict(
        bad.is_empty() && sizes == (31, 9),
        format!("{} + {} rows round-trip; mismatches {bad:?}", sizes.0, sizes.1),
    )
}

fn run_pipeline(dir: &Path, jobs: &str) -> std::result::Result<BTreeMap<String, Vec<u8>>, String> {
    let bin = env!("CARGO_BIN_EXE_segtrade");
    let configs = workspace().join("configs");
    let panel_dir = dir.join("panel");
    let estimate_cfg = dir.join("estimate.toml");
    fs::write(&estimate_cfg, "panel_dir = \"panel\"\n").map_err(|e| e.to_string())?;
    let steps: [(&str, PathBuf, PathBuf); 5] = [
        ("solve", configs.join("solve.toml"), dir.join("solve")),
        ("prop1-sweep", configs.join("prop1_sweep.toml"), dir.join("sweep")),
        ("simulate", configs.join("simulate.toml"), panel_dir.clone()),
        ("estimate", estimate_cfg, dir.join("estimate")),
        ("mc", configs.join("mc.toml"), dir.join("mc")),
    ];
    let mut files = BTreeMap::new();
    for (cmd, cfg, out) in steps {
        let status = Command::new(bin)
            .args([cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "20240601", "--jobs", jobs])
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("{cmd} failed: {}", String::from_utf8_lossy(&status.stderr)));
        }
        let mut entries: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for path in entries {
            let key = path.strip_prefix(dir).unwrap().display().to_string();
            files.insert(key, fs::read(&path).unwrap());
        }
    }
    Ok(files)
}

fn determinism() -> Verdict {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (first, second) = match (run_pipeline(a.path(), "1"), run_pipeline(b.path(), "4")) {
        (Ok(x), Ok(y)) => (x, y),
        (x, y) => return verdict(false, format!("pipeline error: {:?} {:?}", x.err(), y.err())),
    };
    let differing: Vec<&String> = first.keys().filter(|k| first.get(*k) != second.get(*k)).collect();
    let headers_ok = first.values().all(|bytes| bytes.starts_with(b"# segtrade "));
    verdict(
        first.len() == second.len() && differing.is_empty() && headers_ok && first.len() == 12,
        format!("{} files compared across --jobs 1 and --jobs 4, differing {differing:?}, headers present {headers_ok}", first.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict, Duration); 8] = [
        ("equilibrium correctness", equilibrium_correctness, Duration::from_secs(60)),
        ("ratio derivative", ratio_derivative, Duration::from_secs(120)),
        ("sign map", sign_map, Duration::from_secs(300)),
        ("Heckscher-Ohlin contrast", ho_contrast_check, Duration::from_secs(300)),
        ("estimator recovery", estimator_recovery, Duration::from_secs(600)),
        ("variance estimators", variance_estimators, Duration::from_secs(600)),
        ("concordance fidelity", concordance_fidelity, Duration::from_secs(60)),
        ("determinism", determinism, Duration::from_secs(600)),
    ];
    let mut failed = 0;
    for (k, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut result = check();
        let elapsed = start.elapsed();
        if elapsed > *budget {
            result.pass = false;
            result.detail.push_str(&format!("; runtime {elapsed:.1?} over budget {budget:?}"));
        }
        if !result.pass {
            failed += 1;
        }
        println!(
            "criterion {} {} {name} ({elapsed:.1?}): {}",
            k + 1,
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 8 criteria passed");
}
