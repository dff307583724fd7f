//! Equilibrium solver.
//!
//! Unknowns are log wages `(ln w_m, ln w_f)` with the male wage of region 0
//! pinned to one. Given wages every other object is explicit (see
//! [`Equilibrium::at_log_wages`]), so the system reduces to the 2N labor
//! market conditions
//!
//! ```text
//! ln(demand-side labor income) - ln(L^s w) = 0    for each (region, gender)
//! ```
//!
//! One of them is redundant by Walras' law. The solver runs a damped
//! multiplicative fixed-point iteration and hands over to Newton steps with
//! an exact dual-number Jacobian once the residual is small.

use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dual::Dual;
use crate::economy::{EconomyParams, Equilibrium, Numeraire};
use crate::error::{ModelError, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

const NEWTON_SWITCH: f64 = 1e-3;
const FIXED_POINT_BEFORE_NEWTON: usize = 200;
const NEWTON_MAX_STEPS: usize = 60;
const POLISH_STEPS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions<T> {
    /// Max-norm of the log residuals.
    pub tolerance: T,
    pub max_iterations: usize,
    /// Step length of the fixed-point update, in (0, 1].
    pub damping: T,
    /// Starting wages `(w_m, w_f)`; all ones when absent.
    pub initial_wages: Option<(Vec<T>, Vec<T>)>,
    pub numeraire: Numeraire,
    pub newton_polish: bool,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tolerance: T::lit(1e-12).max(T::epsilon() * T::lit(1000.0)),
            max_iterations: 10_000,
            damping: T::lit(0.5),
            initial_wages: None,
            numeraire: Numeraire::FixMaleWageRegion1,
            newton_polish: true,
        }
    }
}

impl<T: Scalar> SolverOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > T::zero() && self.damping <= T::one()) {
            return Err(ModelError::InvalidParams(format!(
                "damping must lie in (0, 1], got {}",
                self.damping.as_f64()
            )));
        }
        if !(self.tolerance > T::epsilon() * T::lit(100.0)) {
            return Err(ModelError::InvalidParams(format!(
                "tolerance {} is below 100 machine epsilons",
                self.tolerance.as_f64()
            )));
        }
        if self.max_iterations == 0 {
            return Err(ModelError::InvalidParams("max_iterations must be positive".into()));
        }
        Ok(())
    }

    pub fn with_numeraire(mut self, numeraire: Numeraire) -> Self {
        self.numeraire = numeraire;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Fixed-point plus Newton iterations.
    pub iterations: usize,
    pub newton_steps: usize,
    /// Final max-norm of the log residuals.
    pub residual: f64,
    pub converged: bool,
    pub wall_time: Duration,
}

impl SolveReport {
    /// Structured text block. Timing is optional so that files written from
    /// it are reproducible.
    pub fn render(&self, with_timing: bool) -> String {
        let mut out = format!(
            "[solve_report]\nconverged = {}\niterations = {}\nnewton_steps = {}\nresidual_max_norm = {:e}\n",
            self.converged, self.iterations, self.newton_steps, self.residual
        );
        if with_timing {
            out.push_str(&format!("wall_time_ms = {:.3}\n", self.wall_time.as_secs_f64() * 1e3));
        }
        out
    }
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(true))
    }
}

/// Log excess-demand residuals at the given wage levels, laid out as
/// `[male_0 .. male_{n-1}, female_0 .. female_{n-1}]`. A negative entry means
/// labor of that type is in excess supply.
pub fn excess_residuals<T: Scalar>(params: &EconomyParams<T>, wage_m: &[T], wage_f: &[T]) -> Result<Vec<T>> {
    let eq = Equilibrium::at_wages(params, wage_m, wage_f)?;
    residuals_of(params, &eq)
}

/// Residuals at log wages.
pub fn log_residuals<T: Scalar>(params: &EconomyParams<T>, ln_wm: &[T], ln_wf: &[T]) -> Result<Vec<T>> {
    let eq = Equilibrium::at_log_wages(params, ln_wm, ln_wf)?;
    residuals_of(params, &eq)
}

fn residuals_of<T: Scalar>(params: &EconomyParams<T>, eq: &Equilibrium<T>) -> Result<Vec<T>> {
    let n = params.n();
    let mut out = vec![T::zero(); 2 * n];
    for o in 0..n {
        let (female, male) = eq.demand_labor_incomes(params, o);
        let supply_m = eq.labor_m[o] * eq.wage_m[o];
        let supply_f = eq.labor_f[o] * eq.wage_f[o];
        out[o] = male.ln() - supply_m.ln();
        out[n + o] = female.ln() - supply_f.ln();
    }
    if let Some(index) = out.iter().position(|r| !r.is_finite()) {
        return Err(ModelError::NumericalFailure { stage: "excess residual", index });
    }
    Ok(out)
}

fn max_norm<T: Scalar>(r: &[T]) -> T {
    r.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

/// Free coordinates: `ln w_m[1..n]` then `ln w_f[0..n]`; the male residual of
/// region 0 is the redundant equation.
pub(crate) fn pack_free<T: Scalar>(ln_wm: &[T], ln_wf: &[T]) -> Vec<T> {
    ln_wm[1..].iter().chain(ln_wf.iter()).copied().collect()
}

pub(crate) fn unpack_free<T: Scalar>(x: &[T], n: usize) -> (Vec<T>, Vec<T>) {
    let mut ln_wm = Vec::with_capacity(n);
    ln_wm.push(T::zero());
    ln_wm.extend_from_slice(&x[..n - 1]);
    (ln_wm, x[n - 1..].to_vec())
}

/// Residuals restricted to the free equations.
pub(crate) fn free_residuals<T: Scalar>(full: &[T]) -> Vec<T> {
    full[1..].to_vec()
}

/// Exact Jacobian of the free residuals with respect to the free log wages.
pub(crate) fn free_jacobian<T: Scalar>(params: &EconomyParams<Dual<T>>, x: &[T]) -> Result<DenseMatrix<T>> {
    let n = params.n();
    let m = x.len();
    let mut jac = DenseMatrix::zeros(m);
    for j in 0..m {
        let seeded: Vec<Dual<T>> = x
            .iter()
            .enumerate()
            .map(|(k, &v)| if k == j { Dual::variable(v) } else { Dual::constant(v) })
            .collect();
        let (ln_wm, ln_wf) = unpack_free(&seeded, n);
        let r = log_residuals(params, &ln_wm, &ln_wf)?;
        for (i, ri) in free_residuals(&r).iter().enumerate() {
            jac.set(i, j, ri.eps);
        }
    }
    Ok(jac)
}

struct Iterate<T> {
    x: Vec<T>,
    residual: Vec<T>,
    norm: T,
}

impl<T: Scalar> Iterate<T> {
    fn at(params: &EconomyParams<T>, x: Vec<T>) -> Result<Self> {
        let (ln_wm, ln_wf) = unpack_free(&x, params.n());
        let residual = log_residuals(params, &ln_wm, &ln_wf)?;
        let norm = max_norm(&residual);
        Ok(Self { x, residual, norm })
    }
}

/// Solves for the equilibrium wage vector.
pub fn solve<T: Scalar>(params: &EconomyParams<T>, options: &SolverOptions<T>) -> Result<(Equilibrium<T>, SolveReport)> {
    let start = Instant::now();
    params.validate()?;
    options.validate()?;
    let n = params.n();

    let (ln_wm, ln_wf) = match &options.initial_wages {
        Some((wm, wf)) => {
            if wm.len() != n || wf.len() != n {
                return Err(ModelError::Precondition(format!("initial wages must have length {n}")));
            }
            if let Some(bad) = wm.iter().chain(wf).find(|w| !(w.is_finite() && **w > T::zero())) {
                return Err(ModelError::Domain { what: "initial wage", value: bad.as_f64() });
            }
            let base = wm[0].ln();
            (
                wm.iter().map(|w| w.ln() - base).collect::<Vec<_>>(),
                wf.iter().map(|w| w.ln() - base).collect::<Vec<_>>(),
            )
        }
        None => (vec![T::zero(); n], vec![T::zero(); n]),
    };

    let step_scale: Vec<T> = (0..n)
        .map(|o| {
            let gain = T::one() + params.eta[o].recip() + (params.sigma - T::one()).abs();
            options.damping / gain
        })
        .collect();

    let mut current = Iterate::at(params, pack_free(&ln_wm, &ln_wf))?;
    let mut best_x = current.x.clone();
    let mut best_norm = current.norm;
    let mut iterations = 0usize;
    let mut newton_steps = 0usize;
    let mut fixed_point_run = 0usize;
    let mut newton_enabled = options.newton_polish;
    let dual_params = if options.newton_polish {
        Some(params.map(Dual::constant))
    } else {
        None
    };

    let converged = loop {
        if current.norm < best_norm {
            best_norm = current.norm;
            best_x = current.x.clone();
        }
        if current.norm <= options.tolerance {
            break true;
        }
        if iterations >= options.max_iterations {
            break false;
        }

        let try_newton = newton_enabled && newton_steps < NEWTON_MAX_STEPS
            && (current.norm <= T::lit(NEWTON_SWITCH) || fixed_point_run >= FIXED_POINT_BEFORE_NEWTON);
        if try_newton {
            match newton_step(dual_params.as_ref().expect("dual params"), params, &current)? {
                Some(next) => {
                    current = next;
                    newton_steps += 1;
                    iterations += 1;
                    continue;
                }
                None => {
                    log::debug!("newton step failed at residual {:e}; continuing with fixed point", current.norm.as_f64());
                    newton_enabled = false;
                }
            }
        }

        let next = fixed_point_step(params, &current, &step_scale);
        current = Iterate::at(params, next)?;
        fixed_point_run += 1;
        iterations += 1;
    };

    if converged && newton_enabled {
        for _ in 0..POLISH_STEPS {
            match newton_step(dual_params.as_ref().expect("dual params"), params, &current)? {
                Some(next) if next.norm.as_f64() * 2.0 <= current.norm.as_f64() => current = next,
                _ => break,
            }
        }
    }

    if !converged {
        let (wm, wf) = unpack_free(&best_x, n);
        return Err(ModelError::NonConvergence {
            iterations,
            residual: best_norm.as_f64(),
            best_wage_m: wm.iter().map(|v| v.exp().as_f64()).collect(),
            best_wage_f: wf.iter().map(|v| v.exp().as_f64()).collect(),
        });
    }

    let (ln_wm, ln_wf) = unpack_free(&current.x, n);
    let mut eq = Equilibrium::at_log_wages(params, &ln_wm, &ln_wf)?;
    if options.numeraire == Numeraire::FixWorldIncome {
        let world = eq.income.iter().fold(T::zero(), |a, &y| a + y);
        eq.rescale_nominal(world.recip());
    }
    eq.numeraire = Some(options.numeraire);

    let report = SolveReport {
        iterations,
        newton_steps,
        residual: current.norm.as_f64(),
        converged: true,
        wall_time: start.elapsed(),
    };
    Ok((eq, report))
}

fn fixed_point_step<T: Scalar>(params: &EconomyParams<T>, current: &Iterate<T>, step_scale: &[T]) -> Vec<T> {
    let n = params.n();
    let (mut ln_wm, mut ln_wf) = unpack_free(&current.x, n);
    for o in 0..n {
        ln_wm[o] = ln_wm[o] + step_scale[o] * current.residual[o];
        ln_wf[o] = ln_wf[o] + step_scale[o] * current.residual[n + o];
    }
    let base = ln_wm[0];
    for v in ln_wm.iter_mut().chain(ln_wf.iter_mut()) {
        *v = *v - base;
    }
    pack_free(&ln_wm, &ln_wf)
}

/// One Newton step with backtracking on the max-norm. `None` when the
/// Jacobian is singular or no step length reduces the residual.
fn newton_step<T: Scalar>(
    dual_params: &EconomyParams<Dual<T>>,
    params: &EconomyParams<T>,
    current: &Iterate<T>,
) -> Result<Option<Iterate<T>>> {
    let jac = free_jacobian(dual_params, &current.x)?;
    let rhs: Vec<T> = free_residuals(&current.residual).iter().map(|&r| -r).collect();
    let Some(dx) = jac.solve(&rhs) else {
        return Ok(None);
    };
    let mut lambda = T::one();
    for _ in 0..30 {
        let trial: Vec<T> = current.x.iter().zip(&dx).map(|(&x, &d)| x + lambda * d).collect();
        if let Ok(next) = Iterate::at(params, trial) {
            if next.norm < current.norm {
                return Ok(Some(next));
            }
        }
        lambda = lambda * T::lit(0.5);
    }
    Ok(None)
}

/// Budget-balance diagnostic: the larger of
/// `max_o |sales_o - factor income_o| / factor income_o` and
/// `max_d |spending_d - Y_d| / Y_d`. Zero at an equilibrium.
pub fn walras_check<T: Scalar>(params: &EconomyParams<T>, eq: &Equilibrium<T>) -> T {
    let n = params.n();
    let mut worst = T::zero();
    for o in 0..n {
        let (rev_m, rev_f) = eq.revenues(params, o);
        let income = eq.labor_income(o);
        worst = worst.max(((rev_m + rev_f) - income).abs() / income);
    }
    for d in 0..n {
        let spending = (0..n).fold(T::zero(), |acc, o| {
            acc + eq.expenditure(params, o, d, crate::economy::Sector::Male)
                + eq.expenditure(params, o, d, crate::economy::Sector::Female)
        });
        worst = worst.max((spending - eq.income[d]).abs() / eq.income[d]);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn asym3() -> EconomyParams<f64> {
        EconomyParams {
            n_regions: 3,
            sigma: 3.5,
            alpha: vec![0.6, 0.35, 0.75],
            beta_m: vec![0.8, 0.9, 0.7],
            beta_f: vec![0.3, 0.2, 0.4],
            nu: vec![1.2, 0.8, 1.0],
            eta: vec![1.5, 0.7, 2.0],
            z_m: vec![1.0, 1.3, 0.8],
            z_f: vec![0.9, 1.1, 1.4],
            tau: vec![vec![1.0, 1.4, 1.7], vec![1.3, 1.0, 1.5], vec![1.5, 1.2, 1.0]],
            endowment: vec![0.5, 1.0, 2.0],
        }
    }

    #[test]
    fn symmetric_fixed_point_at_unit_wages() {
        // Symmetric intensities at 1/2 make unit wages clear both markets.
        let mut p = EconomyParams::<f64>::symmetric(3, 4.0, 0.5, 0.5 + 1e-9, 0.5 - 1e-9, 1.3);
        p.beta_m = vec![0.5; 3];
        p.beta_f = vec![0.5; 3];
        let r = excess_residuals(&p, &[1.0; 3], &[1.0; 3]).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-12), "{r:?}");
    }

    #[test]
    fn symmetric_two_region_solution() {
        for &tau in &[1.0, 1.5] {
            let p = EconomyParams::<f64>::symmetric(2, 3.0, 0.6, 0.8, 0.3, tau);
            let (eq, report) = solve(&p, &SolverOptions::default()).unwrap();
            assert!(report.converged && report.residual <= 1e-12);
            assert!((eq.wage_m[0] - eq.wage_m[1]).abs() < 1e-12);
            assert!((eq.wage_f[0] - eq.wage_f[1]).abs() < 1e-12);
            assert!((eq.income[0] - eq.income[1]).abs() < 1e-12);
            for o in 0..2 {
                assert!((eq.share_m[o][o] - eq.share_m[1 - o][1 - o]).abs() < 1e-12);
            }
        }
        // Free trade: every origin supplies half of each market.
        let p = EconomyParams::<f64>::symmetric(2, 3.0, 0.6, 0.8, 0.3, 1.0);
        let (eq, _) = solve(&p, &SolverOptions::default()).unwrap();
        for o in 0..2 {
            for d in 0..2 {
                assert!((eq.share_m[o][d] - 0.5).abs() < 1e-12);
                assert!((eq.share_f[o][d] - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn autarky_full_segmentation_closed_form() {
        // One region, beta_m = 1, beta_f = 0: L_m w_m = alpha Y, L_f w_f = (1-alpha) Y,
        // so r^(1+1/eta) = ((1-alpha)/alpha) nu^(1/eta) with w_m = 1.
        for &(alpha, nu, eta) in &[(0.3, 1.0, 1.0), (0.6, 1.4, 0.5), (0.45, 0.7, 2.5)] {
            let mut p = EconomyParams::<f64>::symmetric(1, 3.0, alpha, 1.0, 0.0, 1.0);
            p.nu = vec![nu];
            p.eta = vec![eta];
            p.endowment = vec![0.8];
            let (eq, _) = solve(&p, &SolverOptions::default()).unwrap();
            let ratio: f64 = ((1.0 - alpha) / alpha).powf(eta) * nu;
            let expected = ratio.powf(1.0 / (1.0 + eta));
            assert!((eq.wage_f[0] - expected).abs() < 1e-10, "{} vs {expected}", eq.wage_f[0]);
            assert_eq!(eq.wage_m[0], 1.0);
        }
    }

    #[test]
    fn raising_own_wage_creates_excess_supply() {
        let p = asym3();
        let (eq, _) = solve(&p, &SolverOptions::default()).unwrap();
        for k in 0..6 {
            let mut wm = eq.wage_m.clone();
            let mut wf = eq.wage_f.clone();
            if k < 3 {
                wm[k] *= 1.01;
            } else {
                wf[k - 3] *= 1.01;
            }
            let r = excess_residuals(&p, &wm, &wf).unwrap();
            assert!(r[k] < 0.0, "entry {k}: {}", r[k]);
        }
    }

    #[test]
    fn walras_check_zero_at_solution_positive_off_it() {
        let p = asym3();
        let (eq, _) = solve(&p, &SolverOptions::default()).unwrap();
        assert!(walras_check(&p, &eq) <= 1e-11);
        let off = Equilibrium::at_wages(&p, &[1.0, 2.0, 0.5], &[1.0, 1.0, 1.0]).unwrap();
        assert!(walras_check(&p, &off) > 1e-3);
    }

    #[test]
    fn multi_start_agreement() {
        let p = asym3();
        let (a, _) = solve(&p, &SolverOptions::default()).unwrap();
        let opts = SolverOptions {
            initial_wages: Some((vec![3.0, 0.2, 1.7], vec![0.4, 2.5, 0.9])),
            ..SolverOptions::default()
        };
        let (b, _) = solve(&p, &opts).unwrap();
        for o in 0..3 {
            assert!((a.wage_m[o] - b.wage_m[o]).abs() < 1e-8);
            assert!((a.wage_f[o] - b.wage_f[o]).abs() < 1e-8);
        }
    }

    #[test]
    fn pure_fixed_point_converges() {
        let p = asym3();
        let opts = SolverOptions { newton_polish: false, ..SolverOptions::default() };
        let (eq, report) = solve(&p, &opts).unwrap();
        assert_eq!(report.newton_steps, 0);
        assert!(report.residual <= 1e-12);
        let (reference, _) = solve(&p, &SolverOptions::default()).unwrap();
        assert!((eq.wage_f[2] - reference.wage_f[2]).abs() < 1e-10);
    }

    #[test]
    fn non_convergence_returns_best_iterate() {
        let p = asym3();
        let opts = SolverOptions { max_iterations: 3, newton_polish: false, ..SolverOptions::default() };
        match solve(&p, &opts) {
            Err(ModelError::NonConvergence { iterations, best_wage_m, residual, .. }) => {
                assert_eq!(iterations, 3);
                assert_eq!(best_wage_m.len(), 3);
                assert!(residual > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn option_validation() {
        let p = asym3();
        let bad = SolverOptions { damping: 0.0, ..SolverOptions::default() };
        assert!(matches!(solve(&p, &bad), Err(ModelError::InvalidParams(_))));
        let bad = SolverOptions { tolerance: 1e-16, ..SolverOptions::default() };
        assert!(matches!(solve(&p, &bad), Err(ModelError::InvalidParams(_))));
    }

    #[test]
    fn equilibrium_invariants() {
        let p = asym3();
        let (eq, report) = solve(&p, &SolverOptions::default()).unwrap();
        for d in 0..3 {
            let cm: f64 = (0..3).map(|o| eq.share_m[o][d]).sum();
            let cf: f64 = (0..3).map(|o| eq.share_f[o][d]).sum();
            assert!((cm - 1.0).abs() < 1e-10 && (cf - 1.0).abs() < 1e-10);
        }
        for o in 0..3 {
            let supply = (eq.wage_ratio(o) / p.nu[o]).powf(1.0 / p.eta[o]);
            assert!((eq.employment_ratio(o) / supply - 1.0).abs() < 1e-12);
            let (female, male) = eq.demand_labor_incomes(&p, o);
            let gross = female + male + eq.price_ideal[o] * p.endowment[o];
            assert!((eq.claims_scale * gross / eq.income[o] - 1.0).abs() < 10.0 * report.residual.max(1e-15));
        }
    }

    #[test]
    fn f32_solve() {
        let p = asym3().map(|x| x as f32);
        let (eq, report) = solve(&p, &SolverOptions::default()).unwrap();
        assert!(report.converged);
        let (reference, _) = solve(&asym3(), &SolverOptions::default()).unwrap();
        assert!((eq.wage_f[1] as f64 / reference.wage_f[1] - 1.0).abs() < 1e-3);
    }
}
