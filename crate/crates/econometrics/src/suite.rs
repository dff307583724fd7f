//! The three-column specification layout, and its CSV rendering.

use serde::{Deserialize, Serialize};

use segtrade_panel::Panel;

use crate::bundle::{within_transform, BundleSpec, DesignMatrixBundle, FeSpec, Outcome};
use crate::error::Result;
use crate::index::PanelIndex;
use crate::tsls::{tsls, EstimationResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Specification {
    /// Pooled, intercept only.
    NoFixedEffects,
    /// Region and period fixed effects.
    FixedEffects,
    /// Fixed effects and regional controls.
    FixedEffectsControls,
    /// Fixed effects, controls and the lagged manufacturing share.
    FixedEffectsControlsManufacturing,
}

impl Specification {
    pub fn label(self) -> &'static str {
        match self {
            Specification::NoFixedEffects => "1",
            Specification::FixedEffects => "2",
            Specification::FixedEffectsControls => "3",
            Specification::FixedEffectsControlsManufacturing => "4",
        }
    }

    pub fn fixed_effects(self) -> FeSpec {
        match self {
            Specification::NoFixedEffects => FeSpec::None,
            _ => FeSpec::TwoWay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutcomeSpec {
    pub outcomes: Vec<Outcome>,
    /// When set, adds a fourth column controlling for the lagged employment
    /// share of these industries.
    pub manufacturing_industries: Option<Vec<String>>,
}

impl Default for OutcomeSpec {
    fn default() -> Self {
        Self { outcomes: vec![Outcome::Ratio, Outcome::Female, Outcome::Male, Outcome::Total], manufacturing_industries: None }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteRow {
    pub outcome: Outcome,
    pub spec: Specification,
    pub result: EstimationResult,
}

/// Builds the bundle for one specification and estimates it.
pub fn estimate_spec(
    idx: &PanelIndex,
    outcome: Outcome,
    spec: Specification,
    manufacturing: Option<&[String]>,
) -> Result<EstimationResult> {
    let with_controls = spec != Specification::NoFixedEffects && spec != Specification::FixedEffects;
    let bundle_spec = BundleSpec {
        controls: with_controls && !idx.controls.is_empty(),
        manufacturing_industries: if spec == Specification::FixedEffectsControlsManufacturing {
            manufacturing.map(|m| m.to_vec())
        } else {
            None
        },
    };
    let bundle = DesignMatrixBundle::from_index(idx, outcome, &bundle_spec)?;
    let bundle = match spec.fixed_effects() {
        FeSpec::None => bundle,
        fe => within_transform(&bundle, fe)?.0,
    };
    tsls(&bundle)
}

pub fn estimate_suite(panel: &Panel, outcome_spec: &OutcomeSpec) -> Result<Vec<SuiteRow>> {
    let idx = PanelIndex::new(panel)?;
    let mut specs = vec![Specification::NoFixedEffects, Specification::FixedEffects, Specification::FixedEffectsControls];
    if outcome_spec.manufacturing_industries.is_some() {
        specs.push(Specification::FixedEffectsControlsManufacturing);
    }
    let mut rows = Vec::new();
    for &outcome in &outcome_spec.outcomes {
        for &spec in &specs {
            let result = estimate_spec(&idx, outcome, spec, outcome_spec.manufacturing_industries.as_deref())?;
            rows.push(SuiteRow { outcome, spec, result });
        }
    }
    Ok(rows)
}

pub const RESULTS_HEADER: [&str; 7] = ["outcome", "spec", "beta", "se_cluster", "se_aae", "f_stat", "n"];

/// Rows ready for CSV output, floats written at full round-trip precision.
pub fn results_records(rows: &[SuiteRow]) -> Vec<[String; 7]> {
    rows.iter()
        .map(|r| {
            [
                r.outcome.label().to_string(),
                r.spec.label().to_string(),
                format!("{:e}", r.result.beta_hat),
                format!("{:e}", r.result.se_cluster),
                r.result.se_aae.map_or_else(String::new, |v| format!("{v:e}")),
                format!("{:e}", r.result.first_stage_f),
                r.result.n_obs.to_string(),
            ]
        })
        .collect()
}
