//! Two-stage least squares and its variance estimators.

use nalgebra::{DMatrix, DVector};

use crate::bundle::{DesignMatrixBundle, FeSpec};
use crate::error::{EstimationError, Result};

/// Relative threshold for declaring a column linearly dependent on the
/// columns before it.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub beta_hat: f64,
    pub gamma_hat: f64,
    pub se_cluster: f64,
    pub se_hc: f64,
    pub se_aae: Option<f64>,
    pub first_stage_f: f64,
    pub n_obs: usize,
    pub n_clusters: usize,
    /// Parameters used in small-sample factors: explicit regressors plus
    /// absorbed fixed effects not nested in the clusters.
    pub dof_params: usize,
    pub coefficient_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub vcov_cluster: DMatrix<f64>,
    pub residuals_first: Vec<f64>,
    pub residuals_second: Vec<f64>,
    /// Second-stage regressors with the fitted endogenous column.
    pub(crate) w_hat: DMatrix<f64>,
    pub(crate) bread: DMatrix<f64>,
    pub(crate) fe_groups: Vec<Vec<usize>>,
    pub(crate) explicit_params: usize,
}

impl EstimationResult {
    pub fn t_stat(&self) -> f64 {
        self.beta_hat / self.se_cluster
    }

    pub fn n_params(&self) -> usize {
        self.explicit_params
    }
}

/// Columns rescaled to unit root-mean-square so that exposure in billions
/// and instruments in USD can share one normal-equation solve.
struct Scaled {
    x: DMatrix<f64>,
    scale: Vec<f64>,
}

fn build(columns: &[(String, Vec<f64>)]) -> Result<Scaled> {
    let n = columns.first().map_or(0, |c| c.1.len());
    let mut scale = Vec::with_capacity(columns.len());
    let mut x = DMatrix::zeros(n, columns.len());
    let mut zero = Vec::new();
    for (j, (name, col)) in columns.iter().enumerate() {
        let s = (col.iter().map(|v| v * v).sum::<f64>() / n.max(1) as f64).sqrt();
        if !(s > 0.0) || !s.is_finite() {
            zero.push(name.clone());
            scale.push(1.0);
        } else {
            scale.push(s);
        }
        for (i, v) in col.iter().enumerate() {
            x[(i, j)] = v / scale[j];
        }
    }
    if !zero.is_empty() {
        return Err(EstimationError::SingularDesign { columns: zero });
    }
    // Modified Gram-Schmidt: a column whose residual norm collapses relative
    // to its own norm is (numerically) spanned by the earlier columns.
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for (j, (name, _)) in columns.iter().enumerate() {
        let mut v = x.column(j).into_owned();
        let norm = v.norm();
        for q in &basis {
            let c = q.dot(&v);
            v -= q * c;
        }
        let r = v.norm();
        if r <= RANK_TOLERANCE * norm {
            if dependent.is_empty() {
                // Name the earlier columns that carry the dependency, read off
                // a least-squares fit of this column on them.
                let earlier = x.columns(0, j).into_owned();
                let target = x.column(j).into_owned();
                if let Ok(coef) = earlier.clone().svd(true, true).solve(&target, 1e-12) {
                    for (k, (other, _)) in columns[..j].iter().enumerate() {
                        if coef[k].abs() > 1e-6 {
                            dependent.push(other.clone());
                        }
                    }
                }
            }
            dependent.push(name.clone());
        } else {
            basis.push(v / r);
        }
    }
    if !dependent.is_empty() {
        return Err(EstimationError::SingularDesign { columns: dependent });
    }
    Ok(Scaled { x, scale })
}

fn inverse_gram(x: &DMatrix<f64>, names: &[String]) -> Result<DMatrix<f64>> {
    (x.transpose() * x)
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| EstimationError::SingularDesign { columns: names.to_vec() })
}

fn unscale(v: &DMatrix<f64>, scale: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] / (scale[i] * scale[j]))
}

fn group_count(ids: &[usize]) -> usize {
    ids.iter().max().map_or(0, |m| m + 1)
}

fn nested(fe: &[usize], clusters: &[usize]) -> bool {
    let mut owner = vec![usize::MAX; group_count(fe)];
    for (&g, &c) in fe.iter().zip(clusters) {
        if owner[g] == usize::MAX {
            owner[g] = c;
        } else if owner[g] != c {
            return false;
        }
    }
    true
}

/// Explicit parameters plus absorbed fixed effects, skipping dimensions
/// whose groups each sit inside a single cluster.
fn dof_params(explicit: usize, fe_groups: &[Vec<usize>], clusters: &[usize]) -> usize {
    if fe_groups.is_empty() {
        return explicit;
    }
    let absorbed: usize = fe_groups
        .iter()
        .filter(|ids| !nested(ids, clusters))
        .map(|ids| group_count(ids) - 1)
        .sum();
    explicit + absorbed + 1
}

fn cluster_index(ids: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::BTreeMap::new();
    for &c in ids {
        let next = map.len();
        map.entry(c).or_insert(next);
    }
    (ids.iter().map(|c| map[c]).collect(), map.len())
}

fn sandwich(bread: &DMatrix<f64>, meat: &DMatrix<f64>) -> DMatrix<f64> {
    bread * meat * bread
}

struct Vcov {
    matrix: DMatrix<f64>,
    clusters: usize,
    dof: usize,
}

fn cluster_vcov(
    w: &DMatrix<f64>,
    bread: &DMatrix<f64>,
    e: &[f64],
    clusters: &[usize],
    explicit: usize,
    fe_groups: &[Vec<usize>],
) -> Result<Vcov> {
    let n = e.len();
    if clusters.len() != n {
        return Err(EstimationError::Invalid(format!("{} cluster ids for {n} observations", clusters.len())));
    }
    let (ids, g) = cluster_index(clusters);
    if g < 2 {
        return Err(EstimationError::TooFewClusters { found: g });
    }
    let k = dof_params(explicit, fe_groups, clusters);
    if n <= k {
        return Err(EstimationError::TooFewObservations { n, k });
    }
    let p = w.ncols();
    let mut scores = DMatrix::zeros(g, p);
    for i in 0..n {
        for j in 0..p {
            scores[(ids[i], j)] += w[(i, j)] * e[i];
        }
    }
    let meat = scores.transpose() * &scores;
    let factor = g as f64 / (g - 1) as f64 * (n - 1) as f64 / (n - k) as f64;
    Ok(Vcov { matrix: sandwich(bread, &meat) * factor, clusters: g, dof: k })
}

fn hc1_vcov_raw(w: &DMatrix<f64>, bread: &DMatrix<f64>, e: &[f64], k: usize) -> Result<DMatrix<f64>> {
    let n = e.len();
    if n <= k {
        return Err(EstimationError::TooFewObservations { n, k });
    }
    let p = w.ncols();
    let mut meat = DMatrix::zeros(p, p);
    for i in 0..n {
        let e2 = e[i] * e[i];
        for a in 0..p {
            for b in 0..p {
                meat[(a, b)] += w[(i, a)] * w[(i, b)] * e2;
            }
        }
    }
    Ok(sandwich(bread, &meat) * (n as f64 / (n - k) as f64))
}

/// Exact 2SLS with a single endogenous regressor and a single excluded
/// instrument. Controls enter both stages; an intercept is added when no
/// fixed effects were absorbed. Standard errors cluster on
/// `bundle.cluster_ids`.
pub fn tsls(bundle: &DesignMatrixBundle) -> Result<EstimationResult> {
    bundle.validate()?;
    let n = bundle.n();
    let fe_groups: Vec<Vec<usize>> = bundle.fe_dimensions(bundle.absorbed).into_iter().map(|v| v.to_vec()).collect();

    let mut exog: Vec<(String, Vec<f64>)> =
        bundle.control_names.iter().cloned().zip(bundle.controls.iter().cloned()).collect();
    if bundle.absorbed == FeSpec::None {
        exog.push(("intercept".to_string(), vec![1.0; n]));
    }
    let explicit = exog.len() + 1;
    let k_min = dof_params(explicit, &fe_groups, &(0..n).collect::<Vec<_>>());
    if n <= k_min {
        return Err(EstimationError::TooFewObservations { n, k: k_min });
    }

    // First stage.
    let mut z_cols = vec![("instrument".to_string(), bundle.instrument.clone())];
    z_cols.extend(exog.iter().cloned());
    let z_names: Vec<String> = z_cols.iter().map(|c| c.0.clone()).collect();
    let z = build(&z_cols)?;
    let z_bread = inverse_gram(&z.x, &z_names)?;
    let x = DVector::from_column_slice(&bundle.endogenous);
    let gamma_scaled = &z_bread * z.x.transpose() * &x;
    let x_hat = &z.x * &gamma_scaled;
    let residuals_first: Vec<f64> = (&x - &x_hat).iter().copied().collect();
    let gamma_hat = gamma_scaled[0] / z.scale[0];
    let k_first = dof_params(z_cols.len(), &fe_groups, &(0..n).collect::<Vec<_>>());
    let v_first = unscale(&hc1_vcov_raw(&z.x, &z_bread, &residuals_first, k_first)?, &z.scale);
    let first_stage_f = if v_first[(0, 0)] > 0.0 { gamma_hat * gamma_hat / v_first[(0, 0)] } else { f64::INFINITY };

    // Make sure the structural design is itself full rank, so the error
    // names the endogenous column rather than its fitted values.
    let mut w_cols = vec![("exposure".to_string(), bundle.endogenous.clone())];
    w_cols.extend(exog.iter().cloned());
    build(&w_cols)?;

    let mut what_cols = vec![("fitted_exposure".to_string(), x_hat.iter().copied().collect::<Vec<f64>>())];
    what_cols.extend(exog.iter().cloned());
    let names: Vec<String> = w_cols.iter().map(|c| c.0.clone()).collect();
    let w_hat = build(&what_cols)?;
    let bread = inverse_gram(&w_hat.x, &names)?;
    let y = DVector::from_column_slice(&bundle.outcome);
    let coef_scaled = &bread * w_hat.x.transpose() * &y;
    let coefficients: Vec<f64> = coef_scaled.iter().zip(&w_hat.scale).map(|(c, s)| c / s).collect();

    let residuals_second: Vec<f64> = (0..n)
        .map(|i| {
            let fitted: f64 = w_cols.iter().zip(&coefficients).map(|(c, b)| c.1[i] * b).sum();
            bundle.outcome[i] - fitted
        })
        .collect();

    let cl = cluster_vcov(&w_hat.x, &bread, &residuals_second, &bundle.cluster_ids, explicit, &fe_groups)?;
    let vcov_cluster = unscale(&cl.matrix, &w_hat.scale);
    let k_hc = dof_params(explicit, &fe_groups, &(0..n).collect::<Vec<_>>());
    let v_hc = unscale(&hc1_vcov_raw(&w_hat.x, &bread, &residuals_second, k_hc)?, &w_hat.scale);

    let mut result = EstimationResult {
        beta_hat: coefficients[0],
        gamma_hat,
        se_cluster: vcov_cluster[(0, 0)].max(0.0).sqrt(),
        se_hc: v_hc[(0, 0)].max(0.0).sqrt(),
        se_aae: None,
        first_stage_f,
        n_obs: n,
        n_clusters: cl.clusters,
        dof_params: cl.dof,
        coefficient_names: names,
        coefficients,
        vcov_cluster,
        residuals_first,
        residuals_second,
        w_hat: unscale_columns(&w_hat),
        bread: unscale(&bread, &w_hat.scale),
        fe_groups,
        explicit_params: explicit,
    };
    if bundle.shocks.is_some() {
        result.se_aae = Some(shock_level_se(bundle, &result)?);
    }
    Ok(result)
}

fn unscale_columns(s: &Scaled) -> DMatrix<f64> {
    DMatrix::from_fn(s.x.nrows(), s.x.ncols(), |i, j| s.x[(i, j)] * s.scale[j])
}

/// Cluster-robust variance of all second-stage coefficients for an
/// arbitrary clustering of the estimation rows.
pub fn cluster_robust_vcov(result: &EstimationResult, cluster_ids: &[usize]) -> Result<DMatrix<f64>> {
    Ok(cluster_vcov(&result.w_hat, &result.bread, &result.residuals_second, cluster_ids, result.explicit_params, &result.fe_groups)?
        .matrix)
}

/// Heteroskedasticity-robust (HC1) variance of the second-stage coefficients.
pub fn hc1_vcov(result: &EstimationResult) -> Result<DMatrix<f64>> {
    let n = result.n_obs;
    let k = dof_params(result.explicit_params, &result.fe_groups, &(0..n).collect::<Vec<_>>());
    hc1_vcov_raw(&result.w_hat, &result.bread, &result.residuals_second, k)
}

/// Shock-level quantities behind [`shock_level_se`], exposed for audit.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockLevelScores {
    /// Indices into the bundle's shock list, for shocks with positive exposure.
    pub shocks: Vec<usize>,
    /// Shock values net of shock-level controls.
    pub residual_shocks: Vec<f64>,
    /// Second-stage residuals aggregated with exposure weights.
    pub residual_scores: Vec<f64>,
    pub denominator: f64,
    pub factor: f64,
}

/// Exposure-robust standard error for the exposure coefficient.
///
/// Second-stage residuals are aggregated to shocks with the exposure
/// weights, the shock values are residualized on exposure-weighted averages
/// of the row-level controls and fixed-effect dummies, and the sandwich is
/// taken over shocks. With one distinct shock per row this reproduces the
/// cluster-robust SE with one cluster per row.
pub fn shock_level_se(bundle: &DesignMatrixBundle, result: &EstimationResult) -> Result<f64> {
    let s = shock_level_scores(bundle, result)?;
    let meat: f64 = s.residual_shocks.iter().zip(&s.residual_scores).map(|(g, r)| (g * r).powi(2)).sum();
    Ok((s.factor * meat).sqrt() / s.denominator.abs())
}

pub fn shock_level_scores(bundle: &DesignMatrixBundle, result: &EstimationResult) -> Result<ShockLevelScores> {
    let shocks = bundle
        .shocks
        .as_ref()
        .ok_or_else(|| EstimationError::Invalid("bundle has no shock-level share matrix".into()))?;
    let n = bundle.n();
    if result.residuals_second.len() != n {
        return Err(EstimationError::Invalid("result does not belong to this bundle".into()));
    }
    let n_shocks = shocks.n_shocks();

    // Row-level exogenous design in levels: raw controls, intercept and
    // dummies for whatever the transform absorbed.
    let mut d_cols: Vec<Vec<f64>> = bundle.raw_controls.clone();
    d_cols.push(vec![1.0; n]);
    for ids in bundle.fe_dimensions(bundle.absorbed) {
        for g in 1..group_count(ids) {
            d_cols.push(ids.iter().map(|&v| if v == g { 1.0 } else { 0.0 }).collect());
        }
    }
    let q = d_cols.len();

    let mut exposure = vec![0.0; n_shocks];
    let mut score = vec![0.0; n_shocks];
    let mut c = vec![vec![0.0; q]; n_shocks];
    for (row, ws) in shocks.weights.iter().enumerate() {
        for &(s, w) in ws {
            exposure[s] += w;
            score[s] += w * result.residuals_second[row];
            for j in 0..q {
                c[s][j] += w * d_cols[j][row];
            }
        }
    }
    let active: Vec<usize> = (0..n_shocks).filter(|&s| exposure[s] > 0.0).collect();
    if active.len() <= result.explicit_params {
        return Err(EstimationError::TooFewShocks { shocks: active.len(), params: result.explicit_params });
    }

    // Weighted least squares of shock values on shock-level controls.
    let m = active.len();
    let cm = DMatrix::from_fn(m, q, |a, j| c[active[a]][j] / exposure[active[a]]);
    let sw = DVector::from_fn(m, |a, _| exposure[active[a]]);
    let g = DVector::from_fn(m, |a, _| shocks.values[active[a]]);
    let ctw = DMatrix::from_fn(q, m, |j, a| cm[(a, j)] * sw[a]);
    let gram = &ctw * &cm;
    let rhs = &ctw * &g;
    let coef = gram
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-12 * gram.amax().max(f64::MIN_POSITIVE))
        .map_err(|e| EstimationError::Invalid(format!("shock-level control regression failed: {e}")))?;
    let g_tilde = &g - &cm * coef;

    // Row-level instrument net of the included exogenous columns.
    let mut exog: Vec<(String, Vec<f64>)> =
        bundle.control_names.iter().cloned().zip(bundle.controls.iter().cloned()).collect();
    if bundle.absorbed == FeSpec::None {
        exog.push(("intercept".to_string(), vec![1.0; n]));
    }
    let z = DVector::from_column_slice(&bundle.instrument);
    let z_tilde = if exog.is_empty() {
        z
    } else {
        let names: Vec<String> = exog.iter().map(|c| c.0.clone()).collect();
        let e = build(&exog)?;
        let coef = inverse_gram(&e.x, &names)? * e.x.transpose() * &z;
        &z - &e.x * coef
    };
    let denominator: f64 = z_tilde.iter().zip(&bundle.endogenous).map(|(a, b)| a * b).sum();
    if denominator == 0.0 {
        return Err(EstimationError::Invalid("shock-level design has no identifying variation".into()));
    }
    let k = result.dof_params_unclustered();
    let factor = m as f64 / (m - 1) as f64 * (n - 1) as f64 / (n - k) as f64;
    Ok(ShockLevelScores {
        residual_shocks: g_tilde.iter().copied().collect(),
        residual_scores: active.iter().map(|&s| score[s]).collect(),
        shocks: active,
        denominator,
        factor,
    })
}

impl EstimationResult {
    fn dof_params_unclustered(&self) -> usize {
        dof_params(self.explicit_params, &self.fe_groups, &(0..self.n_obs).collect::<Vec<_>>())
    }
}
