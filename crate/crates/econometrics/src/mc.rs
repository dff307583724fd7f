//! Monte Carlo check of the estimator on a known data-generating process
//! built over the rows of a real bundle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::bundle::{within_transform, DesignMatrixBundle, FeSpec};
use crate::error::{EstimationError, Result};
use crate::tsls::tsls;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub reps: usize,
    /// True structural coefficient.
    pub beta0: f64,
    /// First-stage coefficient on the instrument, scaled to unit spread net
    /// of the fixed effects.
    pub pi0: f64,
    /// Correlation between first- and second-stage errors (endogeneity).
    pub rho: f64,
    pub error_sd: f64,
    /// Coefficient on every control column in the outcome equation.
    pub control_effect: f64,
    pub fixed_effects: FeSpec,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            reps: 500,
            beta0: -0.05,
            pi0: 1.0,
            rho: 0.5,
            error_sd: 1.0,
            control_effect: 0.5,
            fixed_effects: FeSpec::TwoWay,
            confidence: 0.95,
            seed: 20240601,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(EstimationError::Invalid(m.to_string()));
        if self.reps < 2 {
            return bad("reps must be at least 2");
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return bad("rho must lie in (-1, 1)");
        }
        if !(self.error_sd > 0.0) || !self.error_sd.is_finite() {
            return bad("error_sd must be positive");
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return bad("confidence must lie in (0, 1)");
        }
        if ![self.beta0, self.pi0, self.control_effect].iter().all(|v| v.is_finite()) {
            return bad("coefficients must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub reps: usize,
    pub beta0: f64,
    pub mean_beta: f64,
    pub bias: f64,
    /// Standard error of the mean estimate across replications.
    pub mc_se: f64,
    pub sd_beta: f64,
    pub rmse: f64,
    pub coverage: f64,
    pub mean_se_cluster: f64,
    pub mean_first_stage_f: f64,
    pub critical_value: f64,
}

impl McReport {
    pub fn bias_within(&self, multiple: f64) -> bool {
        self.bias.abs() <= multiple * self.mc_se
    }
}

struct Draw {
    beta: f64,
    se: f64,
    f: f64,
}

/// Runs `config.reps` replications on the rows, fixed-effect groups,
/// clusters and controls of `template` (which must be untransformed). Each
/// replication draws from its own ChaCha8 stream, so results do not depend
/// on the thread count.
pub fn monte_carlo(template: &DesignMatrixBundle, config: &McConfig) -> Result<McReport> {
    config.validate()?;
    template.validate()?;
    if template.absorbed != FeSpec::None {
        return Err(EstimationError::Invalid("Monte Carlo template must be untransformed".into()));
    }
    let n = template.n();
    // Scale the instrument by the spread that survives the fixed effects, so
    // `pi0` sets the strength of the identifying variation.
    let mean = template.instrument.iter().sum::<f64>() / n as f64;
    let within = match config.fixed_effects {
        FeSpec::None => template.instrument.iter().map(|z| z - mean).collect(),
        fe => within_transform(template, fe)?.0.instrument,
    };
    let sd = (within.iter().map(|z| z * z).sum::<f64>() / within.len() as f64).sqrt();
    if !(sd > 0.0) {
        return Err(EstimationError::SingularDesign { columns: vec!["instrument".into()] });
    }
    let z_std: Vec<f64> = template.instrument.iter().map(|z| (z - mean) / sd).collect();

    // Fixed effects held constant across replications.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_regions = template.region_ids.iter().max().map_or(0, |m| m + 1);
    let n_periods = template.time_ids.iter().max().map_or(0, |m| m + 1);
    let mut effect = |k: usize| (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect::<Vec<f64>>();
    let (region_x, region_y, time_x, time_y) = (effect(n_regions), effect(n_regions), effect(n_periods), effect(n_periods));

    let clusters = template.cluster_ids.iter().collect::<std::collections::BTreeSet<_>>().len();
    if clusters < 2 {
        return Err(EstimationError::TooFewClusters { found: clusters });
    }
    let t = StudentsT::new(0.0, 1.0, (clusters - 1) as f64)
        .map_err(|e| EstimationError::Invalid(format!("critical value: {e}")))?;
    let critical_value = t.inverse_cdf(0.5 + config.confidence / 2.0);

    let draws: Vec<Result<Draw>> = (0..config.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(rep as u64 + 1);
            let mut b = template.clone();
            b.shocks = None;
            let rho_c = (1.0 - config.rho * config.rho).sqrt();
            for i in 0..n {
                let e1: f64 = rng.sample(StandardNormal);
                let e2: f64 = rng.sample(StandardNormal);
                let v = config.error_sd * e1;
                let u = config.error_sd * (config.rho * e1 + rho_c * e2);
                let (r, p) = (template.region_ids[i], template.time_ids[i]);
                let x = config.pi0 * z_std[i] + region_x[r] + time_x[p] + v;
                let controls: f64 = template.raw_controls.iter().map(|c| config.control_effect * c[i]).sum();
                b.endogenous[i] = x;
                b.outcome[i] = config.beta0 * x + region_y[r] + time_y[p] + controls + u;
            }
            let b = match config.fixed_effects {
                FeSpec::None => b,
                fe => within_transform(&b, fe)?.0,
            };
            let r = tsls(&b)?;
            Ok(Draw { beta: r.beta_hat, se: r.se_cluster, f: r.first_stage_f })
        })
        .collect();
    let draws: Vec<Draw> = draws.into_iter().collect::<Result<_>>()?;

    let reps = draws.len() as f64;
    let mean_beta = draws.iter().map(|d| d.beta).sum::<f64>() / reps;
    let sd_beta = (draws.iter().map(|d| (d.beta - mean_beta).powi(2)).sum::<f64>() / (reps - 1.0)).sqrt();
    let rmse = (draws.iter().map(|d| (d.beta - config.beta0).powi(2)).sum::<f64>() / reps).sqrt();
    let covered = draws.iter().filter(|d| (d.beta - config.beta0).abs() <= critical_value * d.se).count();
    Ok(McReport {
        reps: draws.len(),
        beta0: config.beta0,
        mean_beta,
        bias: mean_beta - config.beta0,
        mc_se: sd_beta / reps.sqrt(),
        sd_beta,
        rmse,
        coverage: covered as f64 / reps,
        mean_se_cluster: draws.iter().map(|d| d.se).sum::<f64>() / reps,
        mean_first_stage_f: draws.iter().map(|d| d.f).sum::<f64>() / reps,
        critical_value,
    })
}
