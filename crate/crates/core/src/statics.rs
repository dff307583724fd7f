//! Comparative statics of the female-to-male employment ratio with respect
//! to a foreign endowment.

use serde::Serialize;

use crate::dual::Dual;
use crate::economy::{EconomyParams, Equilibrium, Sector};
use crate::error::{ModelError, Result};
use crate::scalar::Scalar;
use crate::solver::{free_jacobian, free_residuals, log_residuals, pack_free, solve, unpack_free, SolverOptions};

/// Dead band for classifying signs of realized ratio changes.
pub const SIGN_DEAD_BAND: f64 = 1e-9;

const XI_TOLERANCE: f64 = 1e-8;
const DECOMPOSITION_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn of(value: f64, dead_band: f64) -> Self {
        if value > dead_band {
            Sign::Positive
        } else if value < -dead_band {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Sign::Negative => "negative",
            Sign::Zero => "zero",
            Sign::Positive => "positive",
        }
    }
}

/// Male labor income of `origin` computed from demand:
/// `Xi_o = beta_f R_f + beta_m R_m`. Checked against `L_m w_m`.
pub fn xi<T: Scalar>(origin: usize, eq: &Equilibrium<T>, params: &EconomyParams<T>) -> Result<T> {
    let (_, male) = eq.demand_labor_incomes(params, origin);
    let supply = eq.labor_m[origin] * eq.wage_m[origin];
    let gap = ((male - supply) / supply).abs().as_f64();
    if !(gap <= XI_TOLERANCE) {
        return Err(ModelError::Inconsistent(format!(
            "Xi of region {origin} is {} but L_m w_m is {} (relative gap {gap:e}); equilibrium not converged?",
            male.as_f64(),
            supply.as_f64()
        )));
    }
    Ok(male)
}

/// `pi_{od,f}(1-alpha_d)(theta - beta_f) + pi_{od,m} alpha_d (theta - beta_m)`.
pub fn appendix_bracket<T: Scalar>(
    origin: usize,
    dest: usize,
    eq: &Equilibrium<T>,
    params: &EconomyParams<T>,
    theta: T,
) -> T {
    let alpha = params.alpha[dest];
    eq.share_f[origin][dest] * (T::one() - alpha) * (theta - params.beta_f[origin])
        + eq.share_m[origin][dest] * alpha * (theta - params.beta_m[origin])
}

/// The closed-form expression
/// `bracket(Xi/(1+Xi)) * P_d / Xi^2 * (w_f/w_m)^-1`, with the destination
/// price index multiplying the bracket. It captures the shift of relative
/// labor demand at fixed wages and the level normalization it was written
/// under, not the general-equilibrium response; see
/// [`analytic_ratio_derivative`] for the latter.
pub fn appendix_formula<T: Scalar>(origin: usize, dest: usize, eq: &Equilibrium<T>, params: &EconomyParams<T>) -> Result<T> {
    let x = xi(origin, eq, params)?;
    let theta = x / (T::one() + x);
    let bracket = appendix_bracket(origin, dest, eq, params, theta);
    Ok(bracket * eq.price_ideal[dest] / (x * x) / eq.wage_ratio(origin))
}

/// Exact derivative of relative labor demand
/// `(female income / male income) (w_f/w_m)^-1` with respect to `e_d`,
/// holding all wages fixed.
pub fn demand_shift_derivative<T: Scalar>(
    origin: usize,
    dest: usize,
    eq: &Equilibrium<T>,
    params: &EconomyParams<T>,
) -> Result<T> {
    check_pair(origin, dest, params.n())?;
    let mut dual = params.map(Dual::constant);
    dual.endowment[dest] = Dual::variable(params.endowment[dest]);
    let wm: Vec<Dual<T>> = eq.wage_m.iter().map(|&w| Dual::constant(w)).collect();
    let wf: Vec<Dual<T>> = eq.wage_f.iter().map(|&w| Dual::constant(w)).collect();
    let at = Equilibrium::at_wages(&dual, &wm, &wf)?;
    Ok(crate::economy::labor_demand_ratio(origin, &dual, &at)?.eps)
}

/// General-equilibrium derivative `d(L_{o,f}/L_{o,m}) / d e_d` at a solved
/// equilibrium, by the implicit function theorem on the labor-market
/// residuals: `dx/de = -J^-1 dr/de` with both terms exact (dual numbers).
pub fn analytic_ratio_derivative<T: Scalar>(
    origin: usize,
    dest: usize,
    eq: &Equilibrium<T>,
    params: &EconomyParams<T>,
) -> Result<T> {
    let n = params.n();
    check_pair(origin, dest, n)?;
    let base = eq.wage_m[0].ln();
    let ln_wm: Vec<T> = eq.wage_m.iter().map(|w| w.ln() - base).collect();
    let ln_wf: Vec<T> = eq.wage_f.iter().map(|w| w.ln() - base).collect();
    let x = pack_free(&ln_wm, &ln_wf);

    let constant = params.map(Dual::constant);
    let jac = free_jacobian(&constant, &x)?;

    let mut shocked = constant.clone();
    shocked.endowment[dest] = Dual::variable(params.endowment[dest]);
    let dual_wm: Vec<Dual<T>> = ln_wm.iter().map(|&v| Dual::constant(v)).collect();
    let dual_wf: Vec<Dual<T>> = ln_wf.iter().map(|&v| Dual::constant(v)).collect();
    let r = log_residuals(&shocked, &dual_wm, &dual_wf)?;
    let rhs: Vec<T> = free_residuals(&r).iter().map(|v| -v.eps).collect();

    let dx = jac
        .solve(&rhs)
        .ok_or_else(|| ModelError::Degenerate("labor-market Jacobian is singular at the equilibrium".into()))?;
    let (dln_wm, dln_wf) = unpack_free(&dx, n);
    let ratio = eq.employment_ratio(origin);
    Ok(ratio * (dln_wf[origin] - dln_wm[origin]) / params.eta[origin])
}

fn check_pair(origin: usize, dest: usize, n: usize) -> Result<()> {
    if origin >= n || dest >= n {
        return Err(ModelError::Precondition(format!("region index out of range (origin {origin}, dest {dest}, n {n})")));
    }
    if origin == dest {
        return Err(ModelError::Precondition("destination must differ from origin".into()));
    }
    Ok(())
}

fn with_endowment<T: Scalar>(params: &EconomyParams<T>, dest: usize, value: T) -> Result<EconomyParams<T>> {
    if !(value >= T::zero()) {
        return Err(ModelError::Domain { what: "shocked endowment", value: value.as_f64() });
    }
    let mut p = params.clone();
    p.endowment[dest] = value;
    Ok(p)
}

/// Central difference of `L_{o,f}/L_{o,m}` with respect to `e_d`.
pub fn finite_difference_derivative<T: Scalar>(
    params: &EconomyParams<T>,
    origin: usize,
    dest: usize,
    step: T,
    options: &SolverOptions<T>,
) -> Result<T> {
    check_pair(origin, dest, params.n())?;
    if !(step > T::zero()) {
        return Err(ModelError::Precondition(format!("finite-difference step must be positive, got {}", step.as_f64())));
    }
    let e = params.endowment[dest];
    let up = with_endowment(params, dest, e + step)?;
    let down = with_endowment(params, dest, e - step)?;
    let (eq_up, _) = solve(&up, options)?;
    let (eq_down, _) = solve(&down, options)?;
    Ok((eq_up.employment_ratio(origin) - eq_down.employment_ratio(origin)) / (step + step))
}

/// Base and shocked equilibria for a change in one endowment.
#[derive(Debug, Clone, Serialize)]
pub struct ShockExperiment<T> {
    pub params_base: EconomyParams<T>,
    pub shocked_region: usize,
    pub delta_endowment: T,
    pub equilibrium_base: Equilibrium<T>,
    pub equilibrium_shocked: Equilibrium<T>,
}

impl<T: Scalar> ShockExperiment<T> {
    pub fn run(params: &EconomyParams<T>, dest: usize, delta: T, options: &SolverOptions<T>) -> Result<Self> {
        if dest >= params.n() {
            return Err(ModelError::Precondition(format!("shocked region {dest} out of range")));
        }
        let shocked = with_endowment(params, dest, params.endowment[dest] + delta)?;
        let (equilibrium_base, _) = solve(params, options)?;
        let (equilibrium_shocked, _) = solve(&shocked, options)?;
        Ok(Self {
            params_base: params.clone(),
            shocked_region: dest,
            delta_endowment: delta,
            equilibrium_base,
            equilibrium_shocked,
        })
    }

    pub fn params_shocked(&self) -> EconomyParams<T> {
        let mut p = self.params_base.clone();
        p.endowment[self.shocked_region] = p.endowment[self.shocked_region] + self.delta_endowment;
        p
    }

    pub fn ratio_change(&self, origin: usize) -> T {
        self.equilibrium_shocked.employment_ratio(origin) - self.equilibrium_base.employment_ratio(origin)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Prop1Report {
    pub origin: usize,
    pub dest: usize,
    pub delta: f64,
    pub xi: f64,
    /// `Xi/(1+Xi)`; depends on the numeraire through the level of Xi.
    pub threshold: f64,
    pub condition_holds: bool,
    /// `Xi/(Xi+F)`, the male share of labor income; numeraire-free.
    pub income_share_threshold: f64,
    pub bracket: f64,
    pub appendix_formula: f64,
    pub analytic_derivative: f64,
    pub ratio_base: f64,
    pub ratio_shocked: f64,
    pub predicted_sign: Sign,
    pub realized_sign: Sign,
}

impl Prop1Report {
    pub fn agrees(&self) -> bool {
        self.predicted_sign == self.realized_sign
    }
}

/// Predicts the sign of the ratio response to `e_d += delta` from the
/// analytic derivative and compares it with the realized discrete change.
pub fn classify_prop1<T: Scalar>(
    params: &EconomyParams<T>,
    origin: usize,
    dest: usize,
    delta: T,
    options: &SolverOptions<T>,
) -> Result<Prop1Report> {
    check_pair(origin, dest, params.n())?;
    let experiment = ShockExperiment::run(params, dest, delta, options)?;
    let eq = &experiment.equilibrium_base;
    let x = xi(origin, eq, params)?;
    let (female, _) = eq.demand_labor_incomes(params, origin);
    let threshold = x / (T::one() + x);
    let derivative = analytic_ratio_derivative(origin, dest, eq, params)?;

    let report = Prop1Report {
        origin,
        dest,
        delta: delta.as_f64(),
        xi: x.as_f64(),
        threshold: threshold.as_f64(),
        condition_holds: params.beta_f[origin] < threshold && threshold < params.beta_m[origin],
        income_share_threshold: (x / (x + female)).as_f64(),
        bracket: appendix_bracket(origin, dest, eq, params, threshold).as_f64(),
        appendix_formula: appendix_formula(origin, dest, eq, params)?.as_f64(),
        analytic_derivative: derivative.as_f64(),
        ratio_base: eq.employment_ratio(origin).as_f64(),
        ratio_shocked: experiment.equilibrium_shocked.employment_ratio(origin).as_f64(),
        predicted_sign: Sign::of((derivative * delta).as_f64(), SIGN_DEAD_BAND),
        realized_sign: Sign::of(experiment.ratio_change(origin).as_f64(), SIGN_DEAD_BAND),
    };
    if !report.agrees() {
        log::warn!(
            "prop1 sign disagreement at origin {origin}, dest {dest}: predicted {}, realized {} (derivative {:e}, change {:e})",
            report.predicted_sign.label(),
            report.realized_sign.label(),
            report.analytic_derivative,
            report.ratio_shocked - report.ratio_base
        );
    }
    Ok(report)
}

/// Within-sector female-to-male ratio of one sector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SectorRatio {
    Interior { base: f64, shocked: f64 },
    /// The sector employs one gender only; its ratio does not move.
    UnchangedByAssumption,
}

impl SectorRatio {
    pub fn change(&self) -> Option<f64> {
        match self {
            SectorRatio::Interior { base, shocked } => Some(shocked - base),
            SectorRatio::UnchangedByAssumption => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HoDecomposition {
    pub origin: usize,
    pub ratio_m: SectorRatio,
    pub ratio_f: SectorRatio,
    /// Share of male employment in the male-intensive sector.
    pub mu_base: f64,
    pub mu_shocked: f64,
    pub aggregate_base: f64,
    pub aggregate_shocked: f64,
    /// Largest gap between the aggregate ratio and `mu r_m + (1-mu) r_f`.
    pub identity_error: f64,
}

struct SectorSplit {
    mu: f64,
    ratio_m: Option<f64>,
    ratio_f: Option<f64>,
    aggregate: f64,
    recomposed: f64,
}

fn split<T: Scalar>(params: &EconomyParams<T>, eq: &Equilibrium<T>, origin: usize) -> SectorSplit {
    let (lf_m, lm_m) = eq.sector_employment(params, origin, Sector::Male);
    let (lf_f, lm_f) = eq.sector_employment(params, origin, Sector::Female);
    let labor_m = eq.labor_m[origin];
    let mu = (lm_m / labor_m).as_f64();
    let interior = |beta: T| beta > T::zero() && beta < T::one();
    let ratio_m = interior(params.beta_m[origin]).then(|| (lf_m / lm_m).as_f64());
    let ratio_f = interior(params.beta_f[origin]).then(|| (lf_f / lm_f).as_f64());
    let term_m = ratio_m.map_or((lf_m / labor_m).as_f64(), |r| mu * r);
    let term_f = ratio_f.map_or((lf_f / labor_m).as_f64(), |r| (1.0 - mu) * r);
    SectorSplit {
        mu,
        ratio_m,
        ratio_f,
        aggregate: eq.employment_ratio(origin).as_f64(),
        recomposed: term_m + term_f,
    }
}

/// Within-sector ratios, male employment shares and the aggregate ratio for
/// every region, before and after the shock.
pub fn ho_contrast<T: Scalar>(experiment: &ShockExperiment<T>) -> Result<Vec<HoDecomposition>> {
    let base_params = &experiment.params_base;
    let shocked_params = experiment.params_shocked();
    (0..base_params.n())
        .map(|origin| {
            let b = split(base_params, &experiment.equilibrium_base, origin);
            let s = split(&shocked_params, &experiment.equilibrium_shocked, origin);
            let identity_error = (b.aggregate - b.recomposed).abs().max((s.aggregate - s.recomposed).abs());
            let scale = b.aggregate.abs().max(s.aggregate.abs()).max(1.0);
            if identity_error > DECOMPOSITION_TOLERANCE * scale {
                return Err(ModelError::Inconsistent(format!(
                    "employment-share decomposition off by {identity_error:e} in region {origin}"
                )));
            }
            let pair = |base: Option<f64>, shocked: Option<f64>| match (base, shocked) {
                (Some(base), Some(shocked)) => SectorRatio::Interior { base, shocked },
                _ => SectorRatio::UnchangedByAssumption,
            };
            Ok(HoDecomposition {
                origin,
                ratio_m: pair(b.ratio_m, s.ratio_m),
                ratio_f: pair(b.ratio_f, s.ratio_f),
                mu_base: b.mu,
                mu_shocked: s.mu,
                aggregate_base: b.aggregate,
                aggregate_shocked: s.aggregate,
                identity_error,
            })
        })
        .collect()
}
