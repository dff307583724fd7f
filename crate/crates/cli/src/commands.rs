//! The five subcommands. Each writes plain CSV or text files whose first
//! line records the tool version, the config digest and the seed.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use segtrade_core::{classify_prop1, ho_contrast, solve, ModelError, Prop1Report, Sector, SectorRatio, ShockExperiment, Sign};
use segtrade_econometrics::{estimate_suite, monte_carlo, results_records, BundleSpec, DesignMatrixBundle, McReport, RESULTS_HEADER};
use segtrade_panel::{read_panel, simulate_panel, write_panel, write_table, Panel, PanelPaths, SimConfig};

use crate::config::{EstimateConfig, LoadedConfig, McRunConfig, SimulateConfig, SolveConfig, SweepConfig};
use crate::error::{CliError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Per-run settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub config: LoadedConfig,
    pub out: PathBuf,
    pub seed: Option<u64>,
}

impl RunContext {
    pub fn header(&self, seed: u64) -> String {
        format!("segtrade {VERSION} config_sha256={} seed={seed}", self.config.sha256)
    }

    fn prepare(&self) -> Result<()> {
        fs::create_dir_all(&self.out).map_err(|source| CliError::Io { path: self.out.clone(), source })
    }

    fn file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn num(v: f64) -> String {
    v.to_string()
}

fn write_text(path: &Path, header: &str, body: &str) -> Result<()> {
    let io = |source| CliError::Io { path: path.to_owned(), source };
    let mut f = fs::File::create(path).map_err(io)?;
    writeln!(f, "# {header}").map_err(io)?;
    f.write_all(body.as_bytes()).map_err(io)
}

fn csv(path: &Path, header: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
    Ok(write_table(path, Some(header), columns, rows, |r| r.clone())?)
}

pub fn cmd_solve(ctx: &RunContext) -> Result<Vec<PathBuf>> {
    let cfg: SolveConfig = ctx.config.parse()?;
    cfg.solver.validate()?;
    let seed = ctx.seed.unwrap_or(cfg.seed);
    ctx.prepare()?;
    let (eq, report) = solve(&cfg.economy, &cfg.solver)?;
    let header = ctx.header(seed);

    let rows: Vec<Vec<String>> = (0..cfg.economy.n())
        .map(|o| {
            vec![
                o.to_string(),
                num(eq.wage_m[o]),
                num(eq.wage_f[o]),
                num(eq.income[o]),
                num(eq.labor_m[o]),
                num(eq.labor_f[o]),
                num(eq.employment_ratio(o)),
                num(eq.price_m[o]),
                num(eq.price_f[o]),
                num(eq.price_ideal[o]),
            ]
        })
        .collect();
    let eq_path = ctx.file("equilibrium.csv");
    csv(
        &eq_path,
        &header,
        &["region", "wage_m", "wage_f", "income", "labor_m", "labor_f", "employment_ratio", "price_m", "price_f", "price_ideal"],
        &rows,
    )?;

    let mut shares = Vec::new();
    for sector in Sector::BOTH {
        for (o, row) in eq.share(sector).iter().enumerate() {
            for (d, s) in row.iter().enumerate() {
                shares.push(vec![sector.label().to_string(), o.to_string(), d.to_string(), num(*s)]);
            }
        }
    }
    let share_path = ctx.file("trade_shares.csv");
    csv(&share_path, &header, &["sector", "origin", "dest", "share"], &shares)?;

    let report_path = ctx.file("solve_report.txt");
    write_text(&report_path, &header, &format!("{}\n", report.render(false)))?;
    Ok(vec![eq_path, share_path, report_path])
}

/// One grid point of the sign sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub alpha: f64,
    pub trade_cost: f64,
    /// `None` when the base or shocked solve did not converge.
    pub report: Option<Prop1Report>,
    pub share_m: f64,
    pub share_f: f64,
    pub contrast: Option<segtrade_core::HoDecomposition>,
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepPoint>> {
    cfg.validate()?;
    cfg.solver.validate()?;
    let (o, d) = (cfg.sweep.origin, cfg.sweep.dest);
    let grid: Vec<(f64, f64)> = cfg
        .sweep
        .alpha
        .points()
        .into_iter()
        .flat_map(|a| cfg.sweep.trade_cost.points().into_iter().map(move |t| (a, t)))
        .collect();
    grid.par_iter()
        .map(|&(alpha, tau)| {
            let p = cfg.point(alpha, tau);
            let skip = SweepPoint { alpha, trade_cost: tau, report: None, share_m: f64::NAN, share_f: f64::NAN, contrast: None };
            let report = match classify_prop1(&p, o, d, cfg.sweep.delta, &cfg.solver) {
                Ok(r) => r,
                Err(ModelError::NonConvergence { .. }) => return Ok(skip),
                Err(e) => return Err(e.into()),
            };
            let exp = match ShockExperiment::run(&p, d, cfg.sweep.delta, &cfg.solver) {
                Ok(x) => x,
                Err(ModelError::NonConvergence { .. }) => return Ok(skip),
                Err(e) => return Err(e.into()),
            };
            let contrast = ho_contrast(&exp)?.into_iter().find(|r| r.origin == o);
            Ok(SweepPoint {
                alpha,
                trade_cost: tau,
                share_m: exp.equilibrium_base.share_m[o][d],
                share_f: exp.equilibrium_base.share_f[o][d],
                report: Some(report),
                contrast,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSummary {
    pub points: usize,
    pub converged: usize,
    pub agree: usize,
    pub negative: usize,
    pub positive: usize,
}

impl SweepSummary {
    pub fn of(points: &[SweepPoint]) -> Self {
        let reports: Vec<&Prop1Report> = points.iter().filter_map(|p| p.report.as_ref()).collect();
        Self {
            points: points.len(),
            converged: reports.len(),
            agree: reports.iter().filter(|r| r.agrees()).count(),
            negative: reports.iter().filter(|r| r.realized_sign == Sign::Negative).count(),
            positive: reports.iter().filter(|r| r.realized_sign == Sign::Positive).count(),
        }
    }

    pub fn agreement(&self) -> f64 {
        self.agree as f64 / self.converged.max(1) as f64
    }
}

fn sector_pair(r: &SectorRatio) -> [String; 2] {
    match r {
        SectorRatio::Interior { base, shocked } => [num(*base), num(*shocked)],
        SectorRatio::UnchangedByAssumption => [String::new(), String::new()],
    }
}

pub fn cmd_prop1_sweep(ctx: &RunContext) -> Result<Vec<PathBuf>> {
    let cfg: SweepConfig = ctx.config.parse()?;
    let seed = ctx.seed.unwrap_or(cfg.seed);
    ctx.prepare()?;
    let points = run_sweep(&cfg)?;
    let header = ctx.header(seed);

    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            let mut row = vec![num(p.alpha), num(p.trade_cost)];
            match &p.report {
                Some(r) => row.extend([
                    "true".to_string(),
                    num(p.share_m),
                    num(p.share_f),
                    num(r.xi),
                    num(r.threshold),
                    r.condition_holds.to_string(),
                    num(r.income_share_threshold),
                    num(r.bracket),
                    num(r.appendix_formula),
                    num(r.analytic_derivative),
                    num(r.ratio_base),
                    num(r.ratio_shocked),
                    r.predicted_sign.label().to_string(),
                    r.realized_sign.label().to_string(),
                    r.agrees().to_string(),
                ]),
                None => {
                    row.push("false".to_string());
                    row.extend(std::iter::repeat_n(String::new(), 14));
                }
            }
            row
        })
        .collect();
    let map_path = ctx.file("sign_map.csv");
    csv(
        &map_path,
        &header,
        &[
            "alpha_dest",
            "trade_cost",
            "converged",
            "share_m_origin_in_dest",
            "share_f_origin_in_dest",
            "xi",
            "threshold",
            "condition_holds",
            "income_share_threshold",
            "bracket",
            "appendix_formula",
            "derivative",
            "ratio_base",
            "ratio_shocked",
            "predicted_sign",
            "realized_sign",
            "agree",
        ],
        &rows,
    )?;

    let ho_rows: Vec<Vec<String>> = points
        .iter()
        .filter_map(|p| {
            p.contrast.as_ref().map(|c| {
                let mut row = vec![num(p.alpha), num(p.trade_cost)];
                row.extend(sector_pair(&c.ratio_m));
                row.extend(sector_pair(&c.ratio_f));
                row.extend([
                    num(c.mu_base),
                    num(c.mu_shocked),
                    num(c.aggregate_base),
                    num(c.aggregate_shocked),
                    num(c.identity_error),
                ]);
                row
            })
        })
        .collect();
    let ho_path = ctx.file("ho_contrast.csv");
    csv(
        &ho_path,
        &header,
        &[
            "alpha_dest",
            "trade_cost",
            "ratio_m_base",
            "ratio_m_shocked",
            "ratio_f_base",
            "ratio_f_shocked",
            "mu_base",
            "mu_shocked",
            "aggregate_base",
            "aggregate_shocked",
            "identity_error",
        ],
        &ho_rows,
    )?;

    let s = SweepSummary::of(&points);
    let summary_path = ctx.file("sweep_summary.txt");
    write_text(
        &summary_path,
        &header,
        &format!(
            "points {}\nconverged {}\nagree {}\nagreement {}\nrealized_negative {}\nrealized_positive {}\n",
            s.points,
            s.converged,
            s.agree,
            s.agreement(),
            s.negative,
            s.positive
        ),
    )?;
    Ok(vec![map_path, ho_path, summary_path])
}

fn with_seed(mut sim: SimConfig, seed: Option<u64>) -> SimConfig {
    if let Some(s) = seed {
        sim.seed = s;
    }
    sim
}

pub fn cmd_simulate(ctx: &RunContext) -> Result<Vec<PathBuf>> {
    let cfg: SimulateConfig = ctx.config.parse()?;
    let sim = with_seed(cfg.simulation, ctx.seed);
    sim.validate()?;
    ctx.prepare()?;
    let panel = simulate_panel(&sim)?;
    let paths = PanelPaths::in_dir(&ctx.out);
    write_panel(&panel, &paths, Some(&ctx.header(sim.seed)))?;
    Ok(paths.all().into_iter().map(Path::to_path_buf).collect())
}

/// Reads the panel named in the config, or simulates it. Returns the seed
/// to record.
fn load_panel(ctx: &RunContext, dir: &Option<PathBuf>, sim: &Option<SimConfig>) -> Result<(Panel, u64)> {
    match (dir, sim) {
        (Some(_), Some(_)) => Err(CliError::Config("give either panel_dir or [simulation], not both".into())),
        (Some(dir), None) => {
            let panel = read_panel(&PanelPaths::in_dir(&ctx.config.resolve(dir)))?;
            Ok((panel, ctx.seed.unwrap_or(0)))
        }
        (None, sim) => {
            let sim = with_seed(sim.clone().unwrap_or_default(), ctx.seed);
            sim.validate()?;
            Ok((simulate_panel(&sim)?, sim.seed))
        }
    }
}

pub fn cmd_estimate(ctx: &RunContext) -> Result<Vec<PathBuf>> {
    let cfg: EstimateConfig = ctx.config.parse()?;
    if cfg.estimation.outcomes.is_empty() {
        return Err(CliError::Config("estimation.outcomes is empty".into()));
    }
    ctx.prepare()?;
    let (panel, seed) = load_panel(ctx, &cfg.panel_dir, &cfg.simulation)?;
    let rows = estimate_suite(&panel, &cfg.estimation)?;
    let records: Vec<Vec<String>> = results_records(&rows).into_iter().map(|r| r.to_vec()).collect();
    let path = ctx.file("results.csv");
    csv(&path, &ctx.header(seed), &RESULTS_HEADER, &records)?;
    Ok(vec![path])
}

pub fn run_mc(ctx: &RunContext, cfg: &McRunConfig) -> Result<(McReport, u64)> {
    let (panel, seed) = load_panel(ctx, &cfg.panel_dir, &cfg.simulation)?;
    let template = DesignMatrixBundle::from_panel(
        &panel,
        cfg.template.outcome,
        &BundleSpec { controls: cfg.template.controls, manufacturing_industries: None },
    )?;
    let mut mc = cfg.mc.clone();
    if let Some(s) = ctx.seed {
        mc.seed = s;
    }
    Ok((monte_carlo(&template, &mc)?, seed))
}

pub fn cmd_mc(ctx: &RunContext) -> Result<Vec<PathBuf>> {
    let cfg: McRunConfig = ctx.config.parse()?;
    cfg.mc.validate()?;
    ctx.prepare()?;
    let (r, panel_seed) = run_mc(ctx, &cfg)?;
    let mc_seed = ctx.seed.unwrap_or(cfg.mc.seed);
    let rows: Vec<Vec<String>> = [
        ("reps", r.reps.to_string()),
        ("beta0", num(r.beta0)),
        ("mean_beta", num(r.mean_beta)),
        ("bias", num(r.bias)),
        ("mc_se", num(r.mc_se)),
        ("sd_beta", num(r.sd_beta)),
        ("rmse", num(r.rmse)),
        ("coverage", num(r.coverage)),
        ("mean_se_cluster", num(r.mean_se_cluster)),
        ("mean_first_stage_f", num(r.mean_first_stage_f)),
        ("critical_value", num(r.critical_value)),
        ("panel_seed", panel_seed.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| vec![k.to_string(), v])
    .collect();
    let path = ctx.file("mc_report.csv");
    csv(&path, &ctx.header(mc_seed), &["statistic", "value"], &rows)?;
    Ok(vec![path])
}
