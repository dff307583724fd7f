//! Regression rows built from a panel, and the fixed-effects transform.

use serde::{Deserialize, Serialize};

use segtrade_panel::Panel;

use crate::error::{EstimationError, Result};
use crate::index::PanelIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Change in the female-to-male employment ratio.
    Ratio,
    /// Change in female employment (persons).
    Female,
    /// Change in male employment (persons).
    Male,
    /// Change in total employment (persons).
    Total,
    /// The exposure regressor itself.
    Exposure,
}

impl Outcome {
    pub const ALL: [Outcome; 5] = [Outcome::Ratio, Outcome::Female, Outcome::Male, Outcome::Total, Outcome::Exposure];

    pub fn label(self) -> &'static str {
        match self {
            Outcome::Ratio => "ratio",
            Outcome::Female => "female",
            Outcome::Male => "male",
            Outcome::Total => "total",
            Outcome::Exposure => "exposure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeSpec {
    None,
    Time,
    Region,
    TwoWay,
}

impl FeSpec {
    pub fn time(self) -> bool {
        matches!(self, FeSpec::Time | FeSpec::TwoWay)
    }

    pub fn region(self) -> bool {
        matches!(self, FeSpec::Region | FeSpec::TwoWay)
    }
}

/// Exposure of each regression row to shocks indexed by (industry,
/// destination, period).
#[derive(Debug, Clone, PartialEq)]
pub struct ShockExposure {
    pub labels: Vec<String>,
    /// Shock values `Delta Y_{d,t}`.
    pub values: Vec<f64>,
    /// Per row: `(shock, weight)` with weight `s_{r,i,t-1} * X_{d,i,t-1}/X_{i,t-1}`.
    pub weights: Vec<Vec<(usize, f64)>>,
}

impl ShockExposure {
    pub fn n_shocks(&self) -> usize {
        self.values.len()
    }
}

/// One row per (region, transition). Columns are stored separately.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrixBundle {
    pub outcome_name: String,
    pub outcome: Vec<f64>,
    /// Exposure to export growth, billions of USD.
    pub endogenous: Vec<f64>,
    /// Foreign-demand instrument, USD.
    pub instrument: Vec<f64>,
    pub control_names: Vec<String>,
    pub controls: Vec<Vec<f64>>,
    /// Controls before any fixed-effects transform.
    pub raw_controls: Vec<Vec<f64>>,
    pub time_ids: Vec<usize>,
    pub region_ids: Vec<usize>,
    pub cluster_ids: Vec<usize>,
    /// `(region, end year of the transition)`.
    pub row_labels: Vec<(String, i32)>,
    pub shocks: Option<ShockExposure>,
    /// Fixed effects already swept out of the columns.
    pub absorbed: FeSpec,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BundleSpec {
    pub controls: bool,
    /// Industries whose lagged regional employment share enters as a control.
    pub manufacturing_industries: Option<Vec<String>>,
}

pub const URBAN: &str = "d_urban_share";
pub const HIGHSCHOOL: &str = "d_highschool_share";
pub const MANUFACTURING: &str = "lag_manufacturing_share";

impl DesignMatrixBundle {
    pub fn from_panel(panel: &Panel, outcome: Outcome, spec: &BundleSpec) -> Result<Self> {
        Self::from_index(&PanelIndex::new(panel)?, outcome, spec)
    }

    pub fn from_index(idx: &PanelIndex, outcome: Outcome, spec: &BundleSpec) -> Result<Self> {
        let n_years = idx.years.len();
        if n_years < 2 {
            return Err(EstimationError::Invalid("need at least two years to difference".into()));
        }
        if spec.controls && idx.controls.is_empty() {
            return Err(EstimationError::Invalid("controls requested but the panel has none".into()));
        }
        let manufacturing: Option<Vec<usize>> = match &spec.manufacturing_industries {
            Some(ids) => Some(
                ids.iter()
                    .map(|id| {
                        idx.industries
                            .iter()
                            .position(|i| i == id)
                            .ok_or_else(|| EstimationError::Invalid(format!("unknown manufacturing industry {id}")))
                    })
                    .collect::<Result<_>>()?,
            ),
            None => None,
        };

        let n_industries = idx.industries.len();
        let n_dest = idx.destinations.len();
        let mut labels = Vec::new();
        let mut values = Vec::new();
        for t in 1..n_years {
            for i in 0..n_industries {
                for d in 0..n_dest {
                    labels.push(format!("{}:{}:{}", idx.industries[i], idx.destinations[d], idx.years[t]));
                    values.push(idx.gdp[d][t] - idx.gdp[d][t - 1]);
                }
            }
        }
        let shock_id = |t: usize, i: usize, d: usize| ((t - 1) * n_industries + i) * n_dest + d;

        let mut b = DesignMatrixBundle {
            outcome_name: outcome.label().to_string(),
            outcome: Vec::new(),
            endogenous: Vec::new(),
            instrument: Vec::new(),
            control_names: Vec::new(),
            controls: Vec::new(),
            raw_controls: Vec::new(),
            time_ids: Vec::new(),
            region_ids: Vec::new(),
            cluster_ids: Vec::new(),
            row_labels: Vec::new(),
            shocks: None,
            absorbed: FeSpec::None,
        };
        let mut urban = Vec::new();
        let mut school = Vec::new();
        let mut manuf = Vec::new();
        let mut weights = Vec::new();

        for r in 0..idx.regions.len() {
            for t in 1..n_years {
                let x = idx.exposure(r, t)?;
                let z = idx.instrument(r, t)?;
                let y = match outcome {
                    Outcome::Exposure => x,
                    _ => {
                        let (f1, m1) = idx.region_employment(r, t);
                        let (f0, m0) = idx.region_employment(r, t - 1);
                        match outcome {
                            Outcome::Ratio => {
                                for (m, year) in [(m0, idx.years[t - 1]), (m1, idx.years[t])] {
                                    if !(m > 0.0) {
                                        return Err(EstimationError::UndefinedOutcome { region: idx.regions[r].clone(), year });
                                    }
                                }
                                f1 / m1 - f0 / m0
                            }
                            Outcome::Female => f1 - f0,
                            Outcome::Male => m1 - m0,
                            Outcome::Total => (f1 + m1) - (f0 + m0),
                            Outcome::Exposure => unreachable!(),
                        }
                    }
                };
                b.outcome.push(y);
                b.endogenous.push(x);
                b.instrument.push(z);
                b.time_ids.push(t - 1);
                b.region_ids.push(r);
                b.cluster_ids.push(r);
                b.row_labels.push((idx.regions[r].clone(), idx.years[t]));

                if spec.controls {
                    urban.push(idx.controls[r][t].0 - idx.controls[r][t - 1].0);
                    school.push(idx.controls[r][t].1 - idx.controls[r][t - 1].1);
                }
                let shares = idx.shares(r, t - 1)?;
                if let Some(m) = &manufacturing {
                    manuf.push(m.iter().map(|&i| shares[i]).sum());
                }
                let mut row = Vec::new();
                for (i, s) in shares.iter().enumerate() {
                    for (d, sh) in idx.destination_shares(i, t - 1).iter().enumerate() {
                        let w = s * sh;
                        if w != 0.0 {
                            row.push((shock_id(t, i, d), w));
                        }
                    }
                }
                weights.push(row);
            }
        }
        if spec.controls {
            b.control_names.extend([URBAN.to_string(), HIGHSCHOOL.to_string()]);
            b.controls.extend([urban, school]);
        }
        if manufacturing.is_some() {
            b.control_names.push(MANUFACTURING.to_string());
            b.controls.push(manuf);
        }
        b.raw_controls = b.controls.clone();
        b.shocks = Some(ShockExposure { labels, values, weights });
        Ok(b)
    }

    pub fn n(&self) -> usize {
        self.outcome.len()
    }

    /// Same rows with the controls removed.
    pub fn without_controls(&self) -> Self {
        let mut b = self.clone();
        b.control_names.clear();
        b.controls.clear();
        b.raw_controls.clear();
        b
    }

    /// Appends a control column (untransformed).
    pub fn push_control(&mut self, name: &str, column: Vec<f64>) -> Result<()> {
        if column.len() != self.n() {
            return Err(EstimationError::Invalid(format!("control {name} has {} rows, expected {}", column.len(), self.n())));
        }
        if self.absorbed != FeSpec::None {
            return Err(EstimationError::Invalid("add controls before the fixed-effects transform".into()));
        }
        self.control_names.push(name.to_string());
        self.raw_controls.push(column.clone());
        self.controls.push(column);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let lens = [
            self.endogenous.len(),
            self.instrument.len(),
            self.time_ids.len(),
            self.region_ids.len(),
            self.cluster_ids.len(),
            self.row_labels.len(),
        ];
        if lens.iter().any(|&l| l != n)
            || self.controls.iter().chain(&self.raw_controls).any(|c| c.len() != n)
            || self.controls.len() != self.control_names.len()
        {
            return Err(EstimationError::Invalid("bundle columns are not conformable".into()));
        }
        if let Some(s) = &self.shocks {
            if s.weights.len() != n || s.labels.len() != s.values.len() {
                return Err(EstimationError::Invalid("shock exposure is not conformable with the rows".into()));
            }
        }
        let all = self.outcome.iter().chain(&self.endogenous).chain(&self.instrument).chain(self.controls.iter().flatten());
        if all.clone().any(|v| !v.is_finite()) {
            return Err(EstimationError::Invalid("bundle contains non-finite values".into()));
        }
        Ok(())
    }

    pub(crate) fn select_rows(&self, keep: &[usize]) -> Self {
        let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let pick_ids = |v: &[usize]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
        DesignMatrixBundle {
            outcome_name: self.outcome_name.clone(),
            outcome: pick(&self.outcome),
            endogenous: pick(&self.endogenous),
            instrument: pick(&self.instrument),
            control_names: self.control_names.clone(),
            controls: self.controls.iter().map(|c| pick(c)).collect(),
            raw_controls: self.raw_controls.iter().map(|c| pick(c)).collect(),
            time_ids: pick_ids(&self.time_ids),
            region_ids: pick_ids(&self.region_ids),
            cluster_ids: pick_ids(&self.cluster_ids),
            row_labels: keep.iter().map(|&i| self.row_labels[i].clone()).collect(),
            shocks: self.shocks.as_ref().map(|s| ShockExposure {
                labels: s.labels.clone(),
                values: s.values.clone(),
                weights: keep.iter().map(|&i| s.weights[i].clone()).collect(),
            }),
            absorbed: self.absorbed,
        }
    }

    pub(crate) fn fe_dimensions(&self, fe: FeSpec) -> Vec<&[usize]> {
        let mut dims: Vec<&[usize]> = Vec::new();
        if fe.time() {
            dims.push(&self.time_ids);
        }
        if fe.region() {
            dims.push(&self.region_ids);
        }
        dims
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WithinReport {
    pub dropped_rows: Vec<(String, i32)>,
    pub sweeps: usize,
}

const WITHIN_TOLERANCE: f64 = 1e-12;
const WITHIN_MAX_SWEEPS: usize = 10_000;

fn group_count(ids: &[usize]) -> usize {
    ids.iter().max().map_or(0, |m| m + 1)
}

fn demean(column: &mut [f64], ids: &[usize], groups: usize) -> f64 {
    let mut sum = vec![0.0; groups];
    let mut count = vec![0usize; groups];
    for (v, &g) in column.iter().zip(ids) {
        sum[g] += v;
        count[g] += 1;
    }
    let mut change: f64 = 0.0;
    for (v, &g) in column.iter_mut().zip(ids) {
        let m = sum[g] / count[g] as f64;
        *v -= m;
        change = change.max(m.abs());
    }
    change
}

/// Sweeps the requested fixed effects out of every column by alternating
/// group-mean subtraction, until no cell moves by more than `1e-12` times
/// the column scale. Rows that are alone in a fixed-effect group are
/// dropped first (repeatedly) and reported.
pub fn within_transform(bundle: &DesignMatrixBundle, fe: FeSpec) -> Result<(DesignMatrixBundle, WithinReport)> {
    bundle.validate()?;
    if bundle.absorbed != FeSpec::None {
        return Err(EstimationError::Invalid("bundle is already transformed".into()));
    }
    let mut current = bundle.clone();
    let mut dropped = Vec::new();
    loop {
        let dims = current.fe_dimensions(fe);
        let mut singleton = vec![false; current.n()];
        for ids in &dims {
            let mut count = vec![0usize; group_count(ids)];
            for &g in ids.iter() {
                count[g] += 1;
            }
            for (row, &g) in ids.iter().enumerate() {
                if count[g] == 1 {
                    singleton[row] = true;
                }
            }
        }
        if !singleton.iter().any(|&s| s) {
            break;
        }
        let keep: Vec<usize> = (0..current.n()).filter(|&i| !singleton[i]).collect();
        for (i, s) in singleton.iter().enumerate() {
            if *s {
                log::warn!("dropping singleton fixed-effect row {:?}", current.row_labels[i]);
                dropped.push(current.row_labels[i].clone());
            }
        }
        current = current.select_rows(&keep);
    }
    if current.n() == 0 {
        return Err(EstimationError::TooFewObservations { n: 0, k: 1 });
    }

    let dims: Vec<(Vec<usize>, usize)> =
        current.fe_dimensions(fe).into_iter().map(|ids| (ids.to_vec(), group_count(ids))).collect();
    let mut sweeps = 0;
    {
        let mut columns: Vec<&mut Vec<f64>> = vec![&mut current.outcome, &mut current.endogenous, &mut current.instrument];
        columns.extend(current.controls.iter_mut());
        for col in columns {
            let scale = col.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
            for sweep in 1..=WITHIN_MAX_SWEEPS {
                let mut change: f64 = 0.0;
                for (ids, groups) in &dims {
                    change = change.max(demean(col, ids, *groups));
                }
                sweeps = sweeps.max(sweep);
                if change <= WITHIN_TOLERANCE * scale || dims.len() < 2 {
                    break;
                }
            }
        }
    }
    current.absorbed = fe;
    Ok((current, WithinReport { dropped_rows: dropped, sweeps }))
}
