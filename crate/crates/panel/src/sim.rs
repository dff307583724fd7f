//! Panel simulation from the trade model.
//!
//! Industries come in pairs: industry `2b` is the male-intensive sector and
//! industry `2b+1` the female-intensive sector of block `b`. Each block is a
//! separate world economy with the home regions first and the foreign
//! destinations after them. Foreign GDP follows a log-AR(1) around a drift
//! and maps into the destinations' endowments; every (block, year) economy
//! is then solved and its sector employment and exports recorded.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use segtrade_core::{solve, EconomyParams, Equilibrium, Sector, SolverOptions};

use crate::data::{ControlsRow, EmploymentRow, ExportRow, GdpRow, Panel};
use crate::error::{PanelError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GdpProcess {
    /// AR(1) coefficient of log-GDP deviations, per observed period.
    pub persistence: f64,
    /// Standard deviation of log-GDP innovations.
    pub volatility: f64,
    /// Trend growth of log-GDP per calendar year.
    pub drift: f64,
    pub base_min_usd: f64,
    pub base_max_usd: f64,
}

impl Default for GdpProcess {
    fn default() -> Self {
        Self { persistence: 0.5, volatility: 0.2, drift: 0.03, base_min_usd: 5e10, base_max_usd: 5e11 }
    }
}

/// Share of destination spending that falls on the male-intensive good.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DestinationProfile {
    /// Larger destinations spend more on male-intensive goods (0.6 to 0.9).
    MaleSkewed,
    /// Mirror image of `MaleSkewed`.
    FemaleSkewed,
    Neutral,
    Custom { alpha: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TradeGeometry {
    /// Home regions sit on `[0, home_spread]` of a line.
    pub home_spread: f64,
    /// Foreign destinations sit on `[foreign_distance, foreign_distance + 1]`.
    pub foreign_distance: f64,
    /// Log cost added to every home-foreign pair.
    pub border_cost: f64,
    /// Destination log costs are evenly spaced on `[0, destination_cost_spread]`
    /// and assigned to destinations in a block-specific random order, so
    /// blocks differ in where they sell rather than in how much.
    pub destination_cost_spread: f64,
}

impl Default for TradeGeometry {
    fn default() -> Self {
        Self { home_spread: 0.4, foreign_distance: 0.6, border_cost: 0.2, destination_cost_spread: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlProcess {
    pub persistence: f64,
    pub volatility: f64,
    /// Loading of the high-school share innovation on the standardized
    /// predicted foreign-demand shock. Zero keeps controls exogenous.
    pub confounding: f64,
    /// Effect of the high-school share on `ln nu` (negative values raise
    /// female labor supply).
    pub highschool_on_log_nu: f64,
}

impl Default for ControlProcess {
    fn default() -> Self {
        Self { persistence: 0.7, volatility: 0.1, confounding: 0.0, highschool_on_log_nu: -1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub n_regions_home: usize,
    /// Even: industries are (block, sector) pairs.
    pub n_industries: usize,
    pub n_foreign: usize,
    /// Observed years, strictly increasing; gaps are allowed.
    pub years: Vec<i32>,
    pub seed: u64,
    pub gdp: GdpProcess,
    pub destination_profile: DestinationProfile,
    /// Cost share of male labor in male-intensive sectors is drawn from this range.
    pub beta_male_sector: (f64, f64),
    /// Cost share of male labor in female-intensive sectors is drawn from this range.
    pub beta_female_sector: (f64, f64),
    pub sigma: f64,
    pub eta: f64,
    pub home_alpha: f64,
    /// Standard deviation of the log productivity a home region has in a
    /// block, shared by both sectors of the block.
    pub productivity_dispersion: f64,
    /// Standard deviation of the additional sector-specific log productivity.
    pub sector_dispersion: f64,
    pub trade: TradeGeometry,
    /// Endowment units per USD of base-year GDP.
    pub gdp_to_endowment: f64,
    /// Elasticity of endowments to GDP relative to the base year; 1 is a
    /// proportional (level) mapping.
    pub endowment_elasticity: f64,
    pub home_endowment: f64,
    /// USD per model unit of expenditure.
    pub usd_per_unit: f64,
    /// Persons per model unit of labor.
    pub persons_per_unit: f64,
    /// Standard deviation of the random-walk innovations in regional `ln nu`.
    pub supply_noise: f64,
    pub controls: ControlProcess,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_regions_home: 24,
            n_industries: 16,
            n_foreign: 6,
            years: vec![2006, 2008, 2009, 2010, 2011, 2013, 2015, 2016],
            seed: 20_240_601,
            gdp: GdpProcess::default(),
            destination_profile: DestinationProfile::MaleSkewed,
            beta_male_sector: (0.7, 0.99),
            beta_female_sector: (0.25, 0.55),
            sigma: 4.0,
            eta: 0.8,
            home_alpha: 0.5,
            productivity_dispersion: 0.4,
            sector_dispersion: 0.1,
            trade: TradeGeometry::default(),
            gdp_to_endowment: 1e-11,
            endowment_elasticity: 1.0,
            home_endowment: 0.1,
            usd_per_unit: 1e10,
            persons_per_unit: 1e5,
            supply_noise: 0.002,
            controls: ControlProcess::default(),
        }
    }
}

impl SimConfig {
    pub fn n_blocks(&self) -> usize {
        self.n_industries / 2
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(PanelError::InvalidConfig(m));
        if self.n_regions_home < 2 || self.n_foreign < 2 || self.n_industries < 2 || self.years.len() < 2 {
            return fail("region, destination, industry and year counts must all be at least 2".into());
        }
        if self.n_industries % 2 != 0 {
            return fail(format!("n_industries must be even (block, sector) pairs, got {}", self.n_industries));
        }
        if self.years.windows(2).any(|w| w[0] >= w[1]) {
            return fail("years must be strictly increasing".into());
        }
        let g = &self.gdp;
        if !(0.0..1.0).contains(&g.persistence) {
            return fail(format!("gdp.persistence must lie in [0, 1), got {}", g.persistence));
        }
        if !(g.volatility >= 0.0) || !g.drift.is_finite() {
            return fail("gdp.volatility must be non-negative and gdp.drift finite".into());
        }
        if !(g.base_min_usd > 0.0 && g.base_min_usd <= g.base_max_usd) {
            return fail("gdp base range must be positive and ordered".into());
        }
        for (name, (lo, hi)) in [("beta_male_sector", self.beta_male_sector), ("beta_female_sector", self.beta_female_sector)] {
            if !(0.0 < lo && lo <= hi && hi < 1.0) {
                return fail(format!("{name} must be an ordered range inside (0, 1)"));
            }
        }
        if self.beta_female_sector.1 >= self.beta_male_sector.0 {
            return fail("female-sector male cost shares must lie below male-sector ones".into());
        }
        if let DestinationProfile::Custom { alpha } = &self.destination_profile {
            if alpha.len() != self.n_foreign || alpha.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
                return fail(format!("custom alpha must have {} entries in (0, 1)", self.n_foreign));
            }
        }
        let positive = [
            ("sigma", self.sigma),
            ("eta", self.eta),
            ("gdp_to_endowment", self.gdp_to_endowment),
            ("usd_per_unit", self.usd_per_unit),
            ("persons_per_unit", self.persons_per_unit),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        if (self.sigma - 1.0).abs() < 1e-9 {
            return fail("sigma = 1 is not supported".into());
        }
        if !(self.home_alpha > 0.0 && self.home_alpha < 1.0) {
            return fail("home_alpha must lie in (0, 1)".into());
        }
        let nonnegative = [
            ("productivity_dispersion", self.productivity_dispersion),
            ("sector_dispersion", self.sector_dispersion),
            ("home_endowment", self.home_endowment),
            ("supply_noise", self.supply_noise),
            ("controls.volatility", self.controls.volatility),
            ("trade.home_spread", self.trade.home_spread),
            ("trade.foreign_distance", self.trade.foreign_distance),
            ("trade.border_cost", self.trade.border_cost),
            ("trade.destination_cost_spread", self.trade.destination_cost_spread),
        ];
        for (name, v) in nonnegative {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.controls.persistence) {
            return fail("controls.persistence must lie in [0, 1)".into());
        }
        if !self.endowment_elasticity.is_finite() || !self.controls.confounding.is_finite() {
            return fail("endowment_elasticity and controls.confounding must be finite".into());
        }
        Ok(())
    }

    pub fn region_id(&self, r: usize) -> String {
        format!("r{:02}", r + 1)
    }

    pub fn industry_id(&self, i: usize) -> String {
        format!("i{:02}", i + 1)
    }

    pub fn destination_id(&self, d: usize) -> String {
        format!("d{:02}", d + 1)
    }
}

/// A simulated panel with the objects it was generated from.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub panel: Panel,
    /// `[block][year]` economies; home regions are indices `0..n_regions_home`.
    pub params: Vec<Vec<EconomyParams<f64>>>,
    pub equilibria: Vec<Vec<Equilibrium<f64>>>,
    /// Foreign spending shares on the male-intensive good.
    pub destination_alpha: Vec<f64>,
    /// `[destination][year]` GDP in USD.
    pub gdp_usd: Vec<Vec<f64>>,
}

impl Simulation {
    /// Home exports of industry `i` in `year_index`, in USD, computed as
    /// sector sales net of sales to home regions.
    pub fn industry_exports_usd(&self, config: &SimConfig, industry: usize, year_index: usize) -> f64 {
        let (block, sector) = (industry / 2, sector_of(industry));
        let p = &self.params[block][year_index];
        let eq = &self.equilibria[block][year_index];
        let home = config.n_regions_home;
        let total: f64 = (0..home)
            .map(|o| {
                let (rev_m, rev_f) = eq.revenues(p, o);
                let sales = if sector == Sector::Male { rev_m } else { rev_f };
                let domestic: f64 = (0..home).map(|d| eq.expenditure(p, o, d, sector)).sum();
                sales - domestic
            })
            .sum();
        total * config.usd_per_unit
    }

    /// Supply-side labor of home region `r` summed over blocks, in persons.
    pub fn region_labor(&self, config: &SimConfig, region: usize, year_index: usize) -> f64 {
        self.equilibria.iter().map(|by_year| by_year[year_index].labor_m[region] + by_year[year_index].labor_f[region]).sum::<f64>()
            * config.persons_per_unit
    }
}

fn sector_of(industry: usize) -> Sector {
    if industry % 2 == 0 {
        Sector::Male
    } else {
        Sector::Female
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

struct Structure {
    beta: Vec<(f64, f64)>,
    alpha_foreign: Vec<f64>,
    z: Vec<Vec<(f64, f64)>>,
    tau: Vec<Vec<Vec<f64>>>,
}

fn draw_structure(config: &SimConfig, gdp_base: &[f64]) -> Structure {
    let home = config.n_regions_home;
    let n = home + config.n_foreign;
    let blocks = config.n_blocks();
    let mut rng = stream(config.seed, 1);

    let beta: Vec<(f64, f64)> = (0..blocks)
        .map(|_| {
            let (lo, hi) = config.beta_male_sector;
            let bm = rng.random_range(lo..=hi);
            let (lo, hi) = config.beta_female_sector;
            (bm, rng.random_range(lo..=hi))
        })
        .collect();

    let mut order: Vec<usize> = (0..config.n_foreign).collect();
    order.sort_by(|&a, &b| gdp_base[a].total_cmp(&gdp_base[b]));
    let rank_alpha = |lo: f64, hi: f64| {
        let mut alpha = vec![0.0; config.n_foreign];
        for (rank, &d) in order.iter().enumerate() {
            alpha[d] = lo + (hi - lo) * rank as f64 / (config.n_foreign - 1) as f64;
        }
        alpha
    };
    let alpha_foreign = match &config.destination_profile {
        DestinationProfile::MaleSkewed => rank_alpha(0.6, 0.9),
        DestinationProfile::FemaleSkewed => rank_alpha(0.4, 0.1),
        DestinationProfile::Neutral => vec![0.5; config.n_foreign],
        DestinationProfile::Custom { alpha } => alpha.clone(),
    };

    let log_z = Normal::new(0.0, config.productivity_dispersion).expect("validated dispersion");
    let log_s = Normal::new(0.0, config.sector_dispersion).expect("validated dispersion");
    let z = (0..blocks)
        .map(|_| {
            (0..home)
                .map(|_| {
                    let shared = log_z.sample(&mut rng);
                    ((shared + log_s.sample(&mut rng)).exp(), (shared + log_s.sample(&mut rng)).exp())
                })
                .collect()
        })
        .collect();

    let t = &config.trade;
    let position: Vec<f64> = (0..n)
        .map(|k| {
            if k < home {
                rng.random_range(0.0..=t.home_spread)
            } else {
                t.foreign_distance + rng.random_range(0.0..=1.0)
            }
        })
        .collect();
    // Metric distance plus a border term plus node costs keeps the triangle
    // inequality for every block.
    let tau = (0..blocks)
        .map(|_| {
            let mut order: Vec<usize> = (0..config.n_foreign).collect();
            order.shuffle(&mut rng);
            let step = t.destination_cost_spread / (config.n_foreign.max(2) - 1) as f64;
            let node: Vec<f64> = (0..n).map(|k| if k < home { 0.0 } else { step * order[k - home] as f64 }).collect();
            (0..n)
                .map(|o| {
                    (0..n)
                        .map(|d| {
                            if o == d {
                                1.0
                            } else {
                                let border = if (o < home) != (d < home) { t.border_cost } else { 0.0 };
                                ((position[o] - position[d]).abs() + border + node[o] + node[d]).exp()
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Structure { beta, alpha_foreign, z, tau }
}

fn draw_gdp(config: &SimConfig) -> Vec<Vec<f64>> {
    let mut rng = stream(config.seed, 2);
    let g = &config.gdp;
    let y0 = config.years[0];
    (0..config.n_foreign)
        .map(|_| {
            let base = rng.random_range(g.base_min_usd.ln()..=g.base_max_usd.ln());
            let mut dev = 0.0;
            config
                .years
                .iter()
                .enumerate()
                .map(|(t, &year)| {
                    if t > 0 {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        dev = g.persistence * dev + g.volatility * e;
                    }
                    (base + g.drift * (year - y0) as f64 + dev).exp()
                })
                .collect()
        })
        .collect()
}

fn block_params(
    config: &SimConfig,
    s: &Structure,
    block: usize,
    gdp: &[Vec<f64>],
    year_index: usize,
    log_nu: &[Vec<f64>],
) -> EconomyParams<f64> {
    let home = config.n_regions_home;
    let n = home + config.n_foreign;
    let (bm, bf) = s.beta[block];
    let home_or = |k: usize, h: f64, f: f64| if k < home { h } else { f };
    EconomyParams {
        n_regions: n,
        sigma: config.sigma,
        alpha: (0..n).map(|k| if k < home { config.home_alpha } else { s.alpha_foreign[k - home] }).collect(),
        beta_m: vec![bm; n],
        beta_f: vec![bf; n],
        nu: (0..n).map(|k| home_or(k, log_nu.get(k).map_or(0.0, |v| v[year_index]).exp(), 1.0)).collect(),
        eta: vec![config.eta; n],
        z_m: (0..n).map(|k| home_or(k, s.z[block].get(k).map_or(1.0, |z| z.0), 1.0)).collect(),
        z_f: (0..n).map(|k| home_or(k, s.z[block].get(k).map_or(1.0, |z| z.1), 1.0)).collect(),
        tau: s.tau[block].clone(),
        endowment: (0..n)
            .map(|k| {
                if k < home {
                    config.home_endowment
                } else {
                    let series = &gdp[k - home];
                    config.gdp_to_endowment * series[0] * (series[year_index] / series[0]).powf(config.endowment_elasticity)
                }
            })
            .collect(),
    }
}

fn solve_block(params: &EconomyParams<f64>, config: &SimConfig, block: usize, year_index: usize) -> Result<Equilibrium<f64>> {
    solve(params, &SolverOptions::default())
        .map(|(eq, _)| eq)
        .map_err(|source| PanelError::Simulation { year: config.years[year_index], block, source })
}

/// Simulates the panel together with its generating economies.
pub fn simulate(config: &SimConfig) -> Result<Simulation> {
    config.validate()?;
    let home = config.n_regions_home;
    let t_len = config.years.len();
    let blocks = config.n_blocks();

    let gdp = draw_gdp(config);
    let gdp_base: Vec<f64> = gdp.iter().map(|s| s[0]).collect();
    let structure = draw_structure(config, &gdp_base);

    // Labor-supply noise and controls. Base-year shifters are drawn first so
    // the base-year solve can fix exposure shares for the confounding term.
    let mut rng = stream(config.seed, 3);
    let nu_step = Normal::new(0.0, config.supply_noise).expect("validated noise");
    let mut log_nu: Vec<Vec<f64>> = (0..home).map(|_| vec![rng.random_range(-0.2..=0.2); t_len]).collect();
    let urban0: Vec<f64> = (0..home).map(|_| logit(rng.random_range(0.3..=0.8))).collect();
    let school0: Vec<f64> = (0..home).map(|_| logit(rng.random_range(0.2..=0.6))).collect();

    let base: Vec<EconomyParams<f64>> =
        (0..blocks).map(|b| block_params(config, &structure, b, &gdp, 0, &log_nu)).collect();
    let base_eq: Vec<Equilibrium<f64>> = base
        .par_iter()
        .enumerate()
        .map(|(b, p)| solve_block(p, config, b, 0))
        .collect::<Result<_>>()?;

    let predicted = if config.controls.confounding != 0.0 {
        predicted_shocks(config, &base, &base_eq, &gdp)
    } else {
        vec![vec![0.0; t_len]; home]
    };

    let c = &config.controls;
    let ctl_step = Normal::new(0.0, c.volatility).expect("validated volatility");
    let mut urban = Vec::with_capacity(home);
    let mut school = Vec::with_capacity(home);
    for r in 0..home {
        let (mut u, mut s) = (urban0[r], school0[r]);
        let mut path_u = vec![logistic(u)];
        let mut path_s = vec![logistic(s)];
        for t in 1..t_len {
            u = urban0[r] + c.persistence * (u - urban0[r]) + ctl_step.sample(&mut rng);
            s = school0[r] + c.persistence * (s - school0[r]) + ctl_step.sample(&mut rng) + c.confounding * predicted[r][t];
            path_u.push(logistic(u));
            path_s.push(logistic(s));
            log_nu[r][t] = log_nu[r][t - 1] + nu_step.sample(&mut rng);
        }
        for t in 0..t_len {
            log_nu[r][t] += c.highschool_on_log_nu * (path_s[t] - path_s[0]);
        }
        urban.push(path_u);
        school.push(path_s);
    }

    let jobs: Vec<(usize, usize)> = (0..blocks).flat_map(|b| (1..t_len).map(move |t| (b, t))).collect();
    let solved: Vec<(EconomyParams<f64>, Equilibrium<f64>)> = jobs
        .par_iter()
        .map(|&(b, t)| {
            let p = block_params(config, &structure, b, &gdp, t, &log_nu);
            let eq = solve_block(&p, config, b, t)?;
            Ok((p, eq))
        })
        .collect::<Result<_>>()?;

    let mut params: Vec<Vec<EconomyParams<f64>>> = base.into_iter().map(|p| vec![p]).collect();
    let mut equilibria: Vec<Vec<Equilibrium<f64>>> = base_eq.into_iter().map(|e| vec![e]).collect();
    for ((b, _), (p, eq)) in jobs.iter().zip(solved) {
        params[*b].push(p);
        equilibria[*b].push(eq);
    }

    let panel = assemble(config, &params, &equilibria, &gdp, &urban, &school)?;
    Ok(Simulation { panel, params, equilibria, destination_alpha: structure.alpha_foreign, gdp_usd: gdp })
}

/// Convenience wrapper returning only the panel.
pub fn simulate_panel(config: &SimConfig) -> Result<Panel> {
    simulate(config).map(|s| s.panel)
}

/// Standardized shift-share prediction of each region's foreign-demand
/// shock using base-year employment and destination shares.
fn predicted_shocks(
    config: &SimConfig,
    params: &[EconomyParams<f64>],
    eqs: &[Equilibrium<f64>],
    gdp: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let home = config.n_regions_home;
    let t_len = config.years.len();
    let mut raw = vec![vec![0.0; t_len]; home];
    for r in 0..home {
        let total: f64 = (0..config.n_industries)
            .map(|i| {
                let (f, m) = eqs[i / 2].sector_employment(&params[i / 2], r, sector_of(i));
                f + m
            })
            .sum();
        for i in 0..config.n_industries {
            let (b, s) = (i / 2, sector_of(i));
            let (f, m) = eqs[b].sector_employment(&params[b], r, s);
            let flows: Vec<f64> = (0..config.n_foreign)
                .map(|d| (0..home).map(|o| eqs[b].expenditure(&params[b], o, home + d, s)).sum())
                .collect();
            let sum: f64 = flows.iter().sum();
            for t in 1..t_len {
                let shift: f64 = (0..config.n_foreign).map(|d| flows[d] / sum * (gdp[d][t] - gdp[d][t - 1])).sum();
                raw[r][t] += (f + m) / total * shift;
            }
        }
    }
    let values: Vec<f64> = raw.iter().flat_map(|row| row[1..].iter().copied()).collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64).sqrt();
    raw.iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(t, v)| if t == 0 || sd == 0.0 { 0.0 } else { (v - mean) / sd })
                .collect()
        })
        .collect()
}

fn assemble(
    config: &SimConfig,
    params: &[Vec<EconomyParams<f64>>],
    equilibria: &[Vec<Equilibrium<f64>>],
    gdp: &[Vec<f64>],
    urban: &[Vec<f64>],
    school: &[Vec<f64>],
) -> Result<Panel> {
    let home = config.n_regions_home;
    let mut employment = Vec::new();
    let mut exports = Vec::new();
    let mut gdp_rows = Vec::new();
    let mut controls = Vec::new();
    for (t, &year) in config.years.iter().enumerate() {
        for r in 0..home {
            for i in 0..config.n_industries {
                let (b, s) = (i / 2, sector_of(i));
                let (f, m) = equilibria[b][t].sector_employment(&params[b][t], r, s);
                employment.push(EmploymentRow {
                    region: config.region_id(r),
                    industry: config.industry_id(i),
                    year,
                    emp_female: f * config.persons_per_unit,
                    emp_male: m * config.persons_per_unit,
                });
            }
            controls.push(ControlsRow {
                region: config.region_id(r),
                year,
                urban_share: urban[r][t],
                highschool_share: school[r][t],
            });
        }
        for i in 0..config.n_industries {
            let (b, s) = (i / 2, sector_of(i));
            for d in 0..config.n_foreign {
                let flow: f64 = (0..home).map(|o| equilibria[b][t].expenditure(&params[b][t], o, home + d, s)).sum();
                exports.push(ExportRow {
                    industry: config.industry_id(i),
                    destination: config.destination_id(d),
                    year,
                    exports_usd: flow * config.usd_per_unit,
                });
            }
        }
        for (d, series) in gdp.iter().enumerate() {
            gdp_rows.push(GdpRow { destination: config.destination_id(d), year, gdp_usd: series[t] });
        }
    }
    Panel::new(employment, exports, gdp_rows, controls)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig { n_regions_home: 4, n_industries: 4, n_foreign: 3, years: vec![2000, 2001, 2003], ..SimConfig::default() }
    }

    #[test]
    fn validation() {
        assert!(SimConfig::default().validate().is_ok());
        let odd = SimConfig { n_industries: 5, ..small() };
        assert!(matches!(odd.validate(), Err(PanelError::InvalidConfig(_))));
        let mut bad = small();
        bad.gdp.persistence = 1.0;
        assert!(bad.validate().is_err());
        let bad = SimConfig { years: vec![2001, 2000], ..small() };
        assert!(bad.validate().is_err());
        let bad = SimConfig { n_foreign: 1, ..small() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn generated_trade_costs_are_valid() {
        let sim = simulate(&small()).unwrap();
        for by_year in &sim.params {
            for p in by_year {
                p.validate().unwrap();
            }
        }
    }

    #[test]
    fn panel_shape() {
        let c = small();
        let p = simulate_panel(&c).unwrap();
        assert_eq!(p.employment.len(), 4 * 4 * 3);
        assert_eq!(p.exports.len(), 4 * 3 * 3);
        assert_eq!(p.gdp.len(), 3 * 3);
        assert_eq!(p.controls.len(), 4 * 3);
        assert_eq!(p.years(), vec![2000, 2001, 2003]);
    }

    #[test]
    fn male_skewed_profile_rises_with_size() {
        let c = small();
        let sim = simulate(&c).unwrap();
        let mut pairs: Vec<(f64, f64)> = sim.gdp_usd.iter().map(|s| s[0]).zip(sim.destination_alpha.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(pairs.windows(2).all(|w| w[0].1 < w[1].1));
    }
}
