//! Dense indexing of a panel and the two shift-share constructions.

use std::collections::HashMap;

use segtrade_panel::Panel;

use crate::error::{EstimationError, Result};

/// USD per unit of the exposure regressor.
pub const EXPOSURE_UNIT_USD: f64 = 1e9;

/// Panel tables as dense arrays over sorted region, industry, destination
/// and year lists.
#[derive(Debug, Clone)]
pub struct PanelIndex {
    pub regions: Vec<String>,
    pub industries: Vec<String>,
    pub destinations: Vec<String>,
    pub years: Vec<i32>,
    /// `[region][industry][year]` as `(female, male)`.
    pub employment: Vec<Vec<Vec<(f64, f64)>>>,
    /// `[industry][destination][year]`; missing rows are zero.
    pub exports: Vec<Vec<Vec<f64>>>,
    /// `[destination][year]`.
    pub gdp: Vec<Vec<f64>>,
    /// `[region][year]` as `(urban, highschool)`; empty when the panel has no controls.
    pub controls: Vec<Vec<(f64, f64)>>,
}

fn positions<T: std::hash::Hash + Eq + Clone>(items: &[T]) -> HashMap<T, usize> {
    items.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect()
}

impl PanelIndex {
    pub fn new(panel: &Panel) -> Result<Self> {
        panel.validate()?;
        let regions = panel.regions();
        let industries = panel.industries();
        let destinations = panel.destinations();
        let years = panel.years();
        let (ri, ii, di, ti) = (positions(&regions), positions(&industries), positions(&destinations), positions(&years));

        let mut employment = vec![vec![vec![(0.0, 0.0); years.len()]; industries.len()]; regions.len()];
        for r in &panel.employment {
            employment[ri[&r.region]][ii[&r.industry]][ti[&r.year]] = (r.emp_female, r.emp_male);
        }
        let mut exports = vec![vec![vec![0.0; years.len()]; destinations.len()]; industries.len()];
        for r in &panel.exports {
            if let (Some(&i), Some(&t)) = (ii.get(&r.industry), ti.get(&r.year)) {
                exports[i][di[&r.destination]][t] = r.exports_usd;
            }
        }
        let mut gdp = vec![vec![0.0; years.len()]; destinations.len()];
        for r in &panel.gdp {
            if let Some(&t) = ti.get(&r.year) {
                gdp[di[&r.destination]][t] = r.gdp_usd;
            }
        }
        let controls = if panel.controls.is_empty() {
            Vec::new()
        } else {
            let mut c = vec![vec![(0.0, 0.0); years.len()]; regions.len()];
            for r in &panel.controls {
                if let Some(&t) = ti.get(&r.year) {
                    c[ri[&r.region]][t] = (r.urban_share, r.highschool_share);
                }
            }
            c
        };
        Ok(Self { regions, industries, destinations, years, employment, exports, gdp, controls })
    }

    pub fn region(&self, id: &str) -> Result<usize> {
        self.regions.iter().position(|r| r == id).ok_or_else(|| EstimationError::Invalid(format!("unknown region {id}")))
    }

    /// Index of `year`, which must have a predecessor.
    pub fn transition(&self, year: i32) -> Result<usize> {
        match self.years.iter().position(|&y| y == year) {
            Some(t) if t > 0 => Ok(t),
            Some(_) => Err(EstimationError::Invalid(format!("{year} is the first observed year; no lagged data"))),
            None => Err(EstimationError::Invalid(format!("year {year} not in panel"))),
        }
    }

    pub fn industry_exports(&self, industry: usize, t: usize) -> f64 {
        self.exports[industry].iter().map(|by_year| by_year[t]).sum()
    }

    /// Employment shares `L_{r,i,t}/L_{r,t}`.
    pub fn shares(&self, region: usize, t: usize) -> Result<Vec<f64>> {
        let by_industry: Vec<f64> = self.employment[region].iter().map(|y| y[t].0 + y[t].1).collect();
        let total: f64 = by_industry.iter().sum();
        if !(total > 0.0) {
            return Err(EstimationError::UndefinedExposure { region: self.regions[region].clone(), year: self.years[t] });
        }
        Ok(by_industry.into_iter().map(|l| l / total).collect())
    }

    /// Destination shares of industry exports at `t`; all zero when the
    /// industry exported nothing.
    pub fn destination_shares(&self, industry: usize, t: usize) -> Vec<f64> {
        let total = self.industry_exports(industry, t);
        self.exports[industry]
            .iter()
            .map(|by_year| if total > 0.0 { by_year[t] / total } else { 0.0 })
            .collect()
    }

    /// Exposure to export growth between `t-1` and `t`, in billions of USD.
    pub fn exposure(&self, region: usize, t: usize) -> Result<f64> {
        let shares = self.shares(region, t - 1)?;
        let usd: f64 = shares
            .iter()
            .enumerate()
            .map(|(i, s)| s * (self.industry_exports(i, t) - self.industry_exports(i, t - 1)))
            .sum();
        Ok(usd / EXPOSURE_UNIT_USD)
    }

    /// Foreign-demand instrument for the transition into `t`, in USD.
    pub fn instrument(&self, region: usize, t: usize) -> Result<f64> {
        let shares = self.shares(region, t - 1)?;
        Ok(shares
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let dest = self.destination_shares(i, t - 1);
                s * dest.iter().enumerate().map(|(d, sh)| sh * (self.gdp[d][t] - self.gdp[d][t - 1])).sum::<f64>()
            })
            .sum())
    }

    /// Female and male employment of a region.
    pub fn region_employment(&self, region: usize, t: usize) -> (f64, f64) {
        self.employment[region].iter().fold((0.0, 0.0), |(f, m), y| (f + y[t].0, m + y[t].1))
    }
}

/// `sum_i (L_{r,i,t-1}/L_{r,t-1}) (X_{i,t} - X_{i,t-1})` in billions of USD,
/// where `t-1` is the previous observed year.
pub fn export_exposure_change(panel: &Panel, region: &str, year: i32) -> Result<f64> {
    let idx = PanelIndex::new(panel)?;
    idx.exposure(idx.region(region)?, idx.transition(year)?)
}

/// `sum_i (L_{r,i,t-1}/L_{r,t-1}) sum_d (X_{d,i,t-1}/X_{i,t-1}) (Y_{d,t} - Y_{d,t-1})`.
pub fn foreign_demand_instrument(panel: &Panel, region: &str, year: i32) -> Result<f64> {
    let idx = PanelIndex::new(panel)?;
    idx.instrument(idx.region(region)?, idx.transition(year)?)
}
