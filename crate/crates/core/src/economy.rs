//! Structural primitives of the world economy and the closed-form pricing,
//! trade-share and labor formulas. Nothing in this module iterates.
//!
//! Regions are indexed `0..n`. Matrices are stored `[origin][destination]`.
//! Every product of powers is evaluated in log domain.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::scalar::{log_sum_exp, Scalar};

/// The two goods. `Male` is the male-intensive good `m`, `Female` the
/// female-intensive good `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    Male,
    Female,
}

impl Sector {
    pub const BOTH: [Sector; 2] = [Sector::Male, Sector::Female];

    pub fn label(self) -> &'static str {
        match self {
            Sector::Male => "m",
            Sector::Female => "f",
        }
    }
}

/// Normalization resolving the price-level indeterminacy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Numeraire {
    /// Male wage of region 0 equals one.
    #[default]
    FixMaleWageRegion1,
    /// World income sums to one.
    FixWorldIncome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconomyParams<T> {
    pub n_regions: usize,
    /// Elasticity of substitution across origin varieties.
    pub sigma: T,
    /// Expenditure share on the male-intensive good, per destination.
    pub alpha: Vec<T>,
    /// Male-labor cost share of good `m`, per origin.
    pub beta_m: Vec<T>,
    /// Male-labor cost share of good `f`, per origin.
    pub beta_f: Vec<T>,
    /// Disutility shifter of female labor.
    pub nu: Vec<T>,
    /// Inverse labor-supply elasticity.
    pub eta: Vec<T>,
    pub z_m: Vec<T>,
    pub z_f: Vec<T>,
    /// Iceberg costs, `tau[origin][destination]`.
    pub tau: Vec<Vec<T>>,
    /// Income shifter valued at the local ideal price index.
    pub endowment: Vec<T>,
}

impl<T: Scalar> EconomyParams<T> {
    /// Fully symmetric economy with unit productivities and endowments.
    pub fn symmetric(n: usize, sigma: T, alpha: T, beta_m: T, beta_f: T, trade_cost: T) -> Self {
        let tau = (0..n)
            .map(|o| (0..n).map(|d| if o == d { T::one() } else { trade_cost }).collect())
            .collect();
        Self {
            n_regions: n,
            sigma,
            alpha: vec![alpha; n],
            beta_m: vec![beta_m; n],
            beta_f: vec![beta_f; n],
            nu: vec![T::one(); n],
            eta: vec![T::one(); n],
            z_m: vec![T::one(); n],
            z_f: vec![T::one(); n],
            tau,
            endowment: vec![T::one(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.n_regions
    }

    pub fn beta(&self, origin: usize, sector: Sector) -> T {
        match sector {
            Sector::Male => self.beta_m[origin],
            Sector::Female => self.beta_f[origin],
        }
    }

    pub fn productivity(&self, origin: usize, sector: Sector) -> T {
        match sector {
            Sector::Male => self.z_m[origin],
            Sector::Female => self.z_f[origin],
        }
    }

    /// Share of destination spending that falls on `sector`.
    pub fn spending_share(&self, dest: usize, sector: Sector) -> T {
        match sector {
            Sector::Male => self.alpha[dest],
            Sector::Female => T::one() - self.alpha[dest],
        }
    }

    /// Converts every parameter to another scalar type.
    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> EconomyParams<U> {
        let v = |xs: &[T]| xs.iter().map(|&x| f(x)).collect::<Vec<U>>();
        EconomyParams {
            n_regions: self.n_regions,
            sigma: f(self.sigma),
            alpha: v(&self.alpha),
            beta_m: v(&self.beta_m),
            beta_f: v(&self.beta_f),
            nu: v(&self.nu),
            eta: v(&self.eta),
            z_m: v(&self.z_m),
            z_f: v(&self.z_f),
            tau: self.tau.iter().map(|row| v(row)).collect(),
            endowment: v(&self.endowment),
        }
    }

    /// Checks shapes, domains, `tau_oo = 1`, the triangle inequality and
    /// `beta_m > beta_f`. The triangle check is O(n^3).
    pub fn validate(&self) -> Result<()> {
        let n = self.n_regions;
        if n == 0 {
            return Err(ModelError::InvalidParams("n_regions must be positive".into()));
        }
        let lengths = [
            ("alpha", self.alpha.len()),
            ("beta_m", self.beta_m.len()),
            ("beta_f", self.beta_f.len()),
            ("nu", self.nu.len()),
            ("eta", self.eta.len()),
            ("z_m", self.z_m.len()),
            ("z_f", self.z_f.len()),
            ("endowment", self.endowment.len()),
            ("tau", self.tau.len()),
        ];
        for (name, len) in lengths {
            if len != n {
                return Err(ModelError::InvalidParams(format!(
                    "{name} has length {len}, expected n_regions = {n}"
                )));
            }
        }
        if let Some(o) = self.tau.iter().position(|row| row.len() != n) {
            return Err(ModelError::InvalidParams(format!(
                "tau row {o} has length {}, expected {n}",
                self.tau[o].len()
            )));
        }
        if !(self.sigma.is_finite() && self.sigma > T::zero()) {
            return Err(ModelError::InvalidParams(format!(
                "sigma must be positive, got {}",
                self.sigma.as_f64()
            )));
        }
        if self.sigma == T::one() {
            return Err(ModelError::Unsupported(
                "sigma = 1 (Cobb-Douglas variety aggregation) is not supported".into(),
            ));
        }
        let zero = T::zero();
        let one = T::one();
        let check = |name: &str, xs: &[T], ok: &dyn Fn(T) -> bool, domain: &str| -> Result<()> {
            match xs.iter().position(|&x| !x.is_finite() || !ok(x)) {
                Some(i) => Err(ModelError::InvalidParams(format!(
                    "{name}[{i}] = {} outside {domain}",
                    xs[i].as_f64()
                ))),
                None => Ok(()),
            }
        };
        check("alpha", &self.alpha, &|x| x > zero && x < one, "(0, 1)")?;
        check("beta_m", &self.beta_m, &|x| x >= zero && x <= one, "[0, 1]")?;
        check("beta_f", &self.beta_f, &|x| x >= zero && x <= one, "[0, 1]")?;
        check("nu", &self.nu, &|x| x > zero, "(0, inf)")?;
        check("eta", &self.eta, &|x| x > zero, "(0, inf)")?;
        check("z_m", &self.z_m, &|x| x > zero, "(0, inf)")?;
        check("z_f", &self.z_f, &|x| x > zero, "(0, inf)")?;
        check("endowment", &self.endowment, &|x| x >= zero, "[0, inf)")?;
        for o in 0..n {
            if self.beta_m[o] <= self.beta_f[o] {
                return Err(ModelError::InvalidParams(format!(
                    "beta_m[{o}] = {} must exceed beta_f[{o}] = {}",
                    self.beta_m[o].as_f64(),
                    self.beta_f[o].as_f64()
                )));
            }
            check(&format!("tau[{o}]"), &self.tau[o], &|x| x >= one, "[1, inf)")?;
            if self.tau[o][o] != one {
                return Err(ModelError::InvalidParams(format!(
                    "tau[{o}][{o}] = {} but self-trade must be costless",
                    self.tau[o][o].as_f64()
                )));
            }
        }
        let slack = one + T::lit(1e-12);
        for o in 0..n {
            for d in 0..n {
                for via in 0..n {
                    if self.tau[o][d] > self.tau[o][via] * self.tau[via][d] * slack {
                        return Err(ModelError::InvalidParams(format!(
                            "tau violates the triangle inequality: tau[{o}][{d}] = {} > tau[{o}][{via}] * tau[{via}][{d}] = {}",
                            self.tau[o][d].as_f64(),
                            (self.tau[o][via] * self.tau[via][d]).as_f64()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn positive<T: Scalar>(what: &'static str, x: T) -> Result<T> {
    if x.is_finite() && x > T::zero() {
        Ok(x)
    } else {
        Err(ModelError::Domain { what, value: x.as_f64() })
    }
}

/// `ln A` where `A = alpha^-alpha (1-alpha)^-(1-alpha)`.
fn ln_cobb_douglas_constant<T: Scalar>(alpha: T) -> T {
    let one = T::one();
    -(alpha * alpha.ln()) - (one - alpha) * (one - alpha).ln()
}

/// Ideal (Cobb-Douglas) consumer price index `A * P_m^alpha * P_f^(1-alpha)`.
pub fn ideal_price_index<T: Scalar>(price_m: T, price_f: T, alpha: T) -> Result<T> {
    let price_m = positive("price_m", price_m)?;
    let price_f = positive("price_f", price_f)?;
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(ModelError::Domain { what: "alpha", value: alpha.as_f64() });
    }
    let ln = ln_cobb_douglas_constant(alpha) + alpha * price_m.ln() + (T::one() - alpha) * price_f.ln();
    Ok(ln.exp())
}

/// Log unit cost `beta ln w_m + (1-beta) ln w_f - ln z`. The boundary
/// intensities drop the unused wage explicitly so `0 * ln w` never appears.
pub fn log_unit_cost<T: Scalar>(beta: T, ln_wage_m: T, ln_wage_f: T, z: T) -> T {
    let labor = if beta == T::one() {
        ln_wage_m
    } else if beta == T::zero() {
        ln_wage_f
    } else {
        beta * ln_wage_m + (T::one() - beta) * ln_wage_f
    };
    labor - z.ln()
}

/// Landed price `tau_od * w_m^beta * w_f^(1-beta) / z` of origin `o`'s
/// variety of `sector` in destination `d`.
pub fn landed_price<T: Scalar>(
    origin: usize,
    dest: usize,
    sector: Sector,
    params: &EconomyParams<T>,
    wage_m: &[T],
    wage_f: &[T],
) -> Result<T> {
    let wm = positive("wage_m", wage_m[origin])?;
    let wf = positive("wage_f", wage_f[origin])?;
    let ln_cost = log_unit_cost(
        params.beta(origin, sector),
        wm.ln(),
        wf.ln(),
        params.productivity(origin, sector),
    );
    Ok((params.tau[origin][dest].ln() + ln_cost).exp())
}

fn ces_exponent<T: Scalar>(sigma: T) -> Result<T> {
    if sigma == T::one() {
        return Err(ModelError::Unsupported(
            "sigma = 1 (Cobb-Douglas variety aggregation) is not supported".into(),
        ));
    }
    Ok(T::one() - sigma)
}

/// CES price index `(sum p^(1-sigma))^(1/(1-sigma))`, evaluated as a
/// log-sum-exp.
pub fn sector_price_index<T: Scalar>(landed_prices: &[T], sigma: T) -> Result<T> {
    let k = ces_exponent(sigma)?;
    let mut logs = Vec::with_capacity(landed_prices.len());
    for &p in landed_prices {
        logs.push(k * positive("landed price", p)?.ln());
    }
    Ok((log_sum_exp(logs) / k).exp())
}

/// Column `d` of the trade-share matrix in log form: returns
/// `(ln P_{d,i}, ln pi_{od,i} for all o)` given log unit costs.
fn log_share_column<T: Scalar>(params: &EconomyParams<T>, dest: usize, ln_cost: &[T], k: T) -> (T, Vec<T>) {
    let terms: Vec<T> = (0..params.n())
        .map(|o| k * (params.tau[o][dest].ln() + ln_cost[o]))
        .collect();
    let lse = log_sum_exp(terms.iter().copied());
    let ln_shares = terms.iter().map(|&t| t - lse).collect();
    (lse / k, ln_shares)
}

/// Expenditure share `pi_{od,i}` of destination `d` on origin `o`'s variety.
pub fn trade_share<T: Scalar>(
    origin: usize,
    dest: usize,
    sector: Sector,
    params: &EconomyParams<T>,
    wage_m: &[T],
    wage_f: &[T],
) -> Result<T> {
    let k = ces_exponent(params.sigma)?;
    let ln_cost = log_costs(params, sector, wage_m, wage_f)?;
    let (_, ln_shares) = log_share_column(params, dest, &ln_cost, k);
    Ok(ln_shares[origin].exp())
}

fn log_costs<T: Scalar>(params: &EconomyParams<T>, sector: Sector, wage_m: &[T], wage_f: &[T]) -> Result<Vec<T>> {
    (0..params.n())
        .map(|o| {
            let wm = positive("wage_m", wage_m[o])?;
            let wf = positive("wage_f", wage_f[o])?;
            Ok(log_unit_cost(params.beta(o, sector), wm.ln(), wf.ln(), params.productivity(o, sector)))
        })
        .collect()
}

/// Household labor supply from the first-order conditions
/// `w_m / P = L_m^eta` and `w_f / P = nu L_f^eta` (utility is linear in the
/// real consumption index, so there is no income effect). The ratio
/// `L_f / L_m = ((1/nu)(w_f/w_m))^(1/eta)` follows.
pub fn labor_supply_levels<T: Scalar>(wage_m: T, wage_f: T, price_ideal: T, nu: T, eta: T) -> Result<(T, T)> {
    let (ln_m, ln_f) = log_labor_supply(
        positive("wage_m", wage_m)?.ln(),
        positive("wage_f", wage_f)?.ln(),
        positive("price_ideal", price_ideal)?.ln(),
        positive("nu", nu)?,
        positive("eta", eta)?,
    );
    Ok((ln_m.exp(), ln_f.exp()))
}

fn log_labor_supply<T: Scalar>(ln_wm: T, ln_wf: T, ln_price: T, nu: T, eta: T) -> (T, T) {
    let inv = eta.recip();
    ((ln_wm - ln_price) * inv, (ln_wf - nu.ln() - ln_price) * inv)
}

/// Revenue of origin `o` in each sector: `R_{o,m} = sum_d pi_{od,m} alpha_d Y_d`
/// and `R_{o,f} = sum_d pi_{od,f} (1-alpha_d) Y_d`.
pub fn sector_revenues<T: Scalar>(
    origin: usize,
    params: &EconomyParams<T>,
    share_m: &[Vec<T>],
    share_f: &[Vec<T>],
    income: &[T],
) -> (T, T) {
    let mut rev_m = T::zero();
    let mut rev_f = T::zero();
    for d in 0..params.n() {
        rev_m = rev_m + share_m[origin][d] * params.alpha[d] * income[d];
        rev_f = rev_f + share_f[origin][d] * (T::one() - params.alpha[d]) * income[d];
    }
    (rev_m, rev_f)
}

/// Demand-side labor incomes of origin `o`: returns `(female, male)` where
/// female = `(1-beta_f) R_f + (1-beta_m) R_m` and male =
/// `beta_f R_f + beta_m R_m`.
pub fn sector_labor_incomes<T: Scalar>(
    origin: usize,
    params: &EconomyParams<T>,
    share_m: &[Vec<T>],
    share_f: &[Vec<T>],
    income: &[T],
) -> (T, T) {
    let (rev_m, rev_f) = sector_revenues(origin, params, share_m, share_f, income);
    split_labor_income(params.beta_m[origin], params.beta_f[origin], rev_m, rev_f)
}

fn split_labor_income<T: Scalar>(beta_m: T, beta_f: T, rev_m: T, rev_f: T) -> (T, T) {
    let one = T::one();
    let female = (one - beta_f) * rev_f + (one - beta_m) * rev_m;
    let male = beta_f * rev_f + beta_m * rev_m;
    (female, male)
}

/// Relative labor demand `(female income / male income) * (w_f/w_m)^-1`.
pub fn labor_demand_ratio<T: Scalar>(origin: usize, params: &EconomyParams<T>, eq: &Equilibrium<T>) -> Result<T> {
    let (female, male) = sector_labor_incomes(origin, params, &eq.share_m, &eq.share_f, &eq.income);
    if male <= T::zero() {
        return Err(ModelError::Degenerate(format!(
            "male labor income of region {origin} is zero; relative labor demand undefined"
        )));
    }
    Ok(female / male / eq.wage_ratio(origin))
}

/// Within-sector female-to-male labor ratio from cost minimization:
/// `((1-beta)/beta) * (w_f/w_m)^-1`. Undefined on the boundary.
pub fn sector_factor_ratio<T: Scalar>(beta: T, wage_ratio: T) -> Result<T> {
    if !(beta > T::zero() && beta < T::one()) {
        return Err(ModelError::Degenerate(format!(
            "within-sector factor ratio undefined for beta = {}",
            beta.as_f64()
        )));
    }
    Ok((T::one() - beta) / beta / positive("wage ratio", wage_ratio)?)
}

/// All equilibrium objects implied by a wage vector. When the wages solve
/// the labor-market conditions this is an equilibrium; otherwise it is the
/// price system at those wages.
///
/// Incomes: gross claims `G_d = L_{d,m} w_{d,m} + L_{d,f} w_{d,f} + P_d e_d`
/// exceed world factor income by the value of endowments, so endowment claims
/// are financed by a uniform levy on all gross claims:
/// `Y_d = kappa G_d` with `kappa = sum(labor income) / sum(G)`. World
/// spending then equals world factor income.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium<T> {
    pub wage_m: Vec<T>,
    pub wage_f: Vec<T>,
    pub income: Vec<T>,
    pub labor_m: Vec<T>,
    pub labor_f: Vec<T>,
    pub price_m: Vec<T>,
    pub price_f: Vec<T>,
    pub price_ideal: Vec<T>,
    pub share_m: Vec<Vec<T>>,
    pub share_f: Vec<Vec<T>>,
    /// Levy factor `kappa` applied to gross claims.
    pub claims_scale: T,
    /// Normalization applied, `None` for an unnormalized price system.
    pub numeraire: Option<Numeraire>,
}

impl<T: Scalar> Equilibrium<T> {
    /// Price system at wage levels.
    pub fn at_wages(params: &EconomyParams<T>, wage_m: &[T], wage_f: &[T]) -> Result<Self> {
        let n = params.n();
        if wage_m.len() != n || wage_f.len() != n {
            return Err(ModelError::Precondition(format!(
                "wage vectors must have length {n}"
            )));
        }
        let ln_wm = wage_m.iter().map(|&w| positive("wage_m", w).map(|w| w.ln())).collect::<Result<Vec<_>>>()?;
        let ln_wf = wage_f.iter().map(|&w| positive("wage_f", w).map(|w| w.ln())).collect::<Result<Vec<_>>>()?;
        Self::at_log_wages(params, &ln_wm, &ln_wf)
    }

    /// Price system at log wages; the entry point used with dual numbers.
    pub fn at_log_wages(params: &EconomyParams<T>, ln_wm: &[T], ln_wf: &[T]) -> Result<Self> {
        let n = params.n();
        let k = ces_exponent(params.sigma)?;
        let mut ln_price = [vec![T::zero(); n], vec![T::zero(); n]];
        let mut shares = [vec![vec![T::zero(); n]; n], vec![vec![T::zero(); n]; n]];
        for (s, sector) in Sector::BOTH.into_iter().enumerate() {
            let ln_cost: Vec<T> = (0..n)
                .map(|o| log_unit_cost(params.beta(o, sector), ln_wm[o], ln_wf[o], params.productivity(o, sector)))
                .collect();
            for d in 0..n {
                let (ln_p, ln_sh) = log_share_column(params, d, &ln_cost, k);
                ln_price[s][d] = ln_p;
                for o in 0..n {
                    shares[s][o][d] = ln_sh[o].exp();
                }
            }
        }
        let [ln_pm, ln_pf] = ln_price;
        let [share_m, share_f] = shares;

        let mut price_ideal = Vec::with_capacity(n);
        let mut labor_m = Vec::with_capacity(n);
        let mut labor_f = Vec::with_capacity(n);
        let mut claims = Vec::with_capacity(n);
        let mut factor_income = T::zero();
        let mut endowment_value = T::zero();
        for d in 0..n {
            let a = params.alpha[d];
            let ln_p = ln_cobb_douglas_constant(a) + a * ln_pm[d] + (T::one() - a) * ln_pf[d];
            let (ln_lm, ln_lf) = log_labor_supply(ln_wm[d], ln_wf[d], ln_p, params.nu[d], params.eta[d]);
            let labor_income = (ln_lm + ln_wm[d]).exp() + (ln_lf + ln_wf[d]).exp();
            let p = ln_p.exp();
            let endow = p * params.endowment[d];
            factor_income = factor_income + labor_income;
            endowment_value = endowment_value + endow;
            claims.push(labor_income + endow);
            price_ideal.push(p);
            labor_m.push(ln_lm.exp());
            labor_f.push(ln_lf.exp());
        }
        let claims_scale = factor_income / (factor_income + endowment_value);
        let income: Vec<T> = claims.iter().map(|&g| claims_scale * g).collect();

        let eq = Self {
            wage_m: ln_wm.iter().map(|w| w.exp()).collect(),
            wage_f: ln_wf.iter().map(|w| w.exp()).collect(),
            income,
            labor_m,
            labor_f,
            price_m: ln_pm.iter().map(|p| p.exp()).collect(),
            price_f: ln_pf.iter().map(|p| p.exp()).collect(),
            price_ideal,
            share_m,
            share_f,
            claims_scale,
            numeraire: None,
        };
        eq.check_finite()?;
        Ok(eq)
    }

    fn check_finite(&self) -> Result<()> {
        let vectors: [(&'static str, &Vec<T>); 8] = [
            ("wage_m", &self.wage_m),
            ("wage_f", &self.wage_f),
            ("income", &self.income),
            ("labor_m", &self.labor_m),
            ("labor_f", &self.labor_f),
            ("price_m", &self.price_m),
            ("price_f", &self.price_f),
            ("price_ideal", &self.price_ideal),
        ];
        for (stage, v) in vectors {
            if let Some(index) = v.iter().position(|x| !x.is_finite()) {
                return Err(ModelError::NumericalFailure { stage, index });
            }
        }
        for (stage, m) in [("share_m", &self.share_m), ("share_f", &self.share_f)] {
            for (o, row) in m.iter().enumerate() {
                if let Some(d) = row.iter().position(|x| !x.is_finite()) {
                    return Err(ModelError::NumericalFailure { stage, index: o * row.len() + d });
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.wage_m.len()
    }

    pub fn share(&self, sector: Sector) -> &[Vec<T>] {
        match sector {
            Sector::Male => &self.share_m,
            Sector::Female => &self.share_f,
        }
    }

    /// Female-to-male employment ratio `L_f / L_m`.
    pub fn employment_ratio(&self, region: usize) -> T {
        self.labor_f[region] / self.labor_m[region]
    }

    pub fn wage_ratio(&self, region: usize) -> T {
        self.wage_f[region] / self.wage_m[region]
    }

    /// Supply-side labor income `L_m w_m + L_f w_f`.
    pub fn labor_income(&self, region: usize) -> T {
        self.labor_m[region] * self.wage_m[region] + self.labor_f[region] * self.wage_f[region]
    }

    /// Expenditure `X_{od,i} = pi_{od,i} * spending share * Y_d`.
    pub fn expenditure(&self, params: &EconomyParams<T>, origin: usize, dest: usize, sector: Sector) -> T {
        self.share(sector)[origin][dest] * params.spending_share(dest, sector) * self.income[dest]
    }

    pub fn revenues(&self, params: &EconomyParams<T>, origin: usize) -> (T, T) {
        sector_revenues(origin, params, &self.share_m, &self.share_f, &self.income)
    }

    /// Demand-side `(female, male)` labor incomes.
    pub fn demand_labor_incomes(&self, params: &EconomyParams<T>, origin: usize) -> (T, T) {
        sector_labor_incomes(origin, params, &self.share_m, &self.share_f, &self.income)
    }

    /// Sector employment `(female, male)` implied by cost shares:
    /// `L^i_m = beta_i R_i / w_m`, `L^i_f = (1-beta_i) R_i / w_f`.
    pub fn sector_employment(&self, params: &EconomyParams<T>, origin: usize, sector: Sector) -> (T, T) {
        let (rev_m, rev_f) = self.revenues(params, origin);
        let revenue = match sector {
            Sector::Male => rev_m,
            Sector::Female => rev_f,
        };
        let beta = params.beta(origin, sector);
        (
            (T::one() - beta) * revenue / self.wage_f[origin],
            beta * revenue / self.wage_m[origin],
        )
    }

    /// Multiplies every nominal quantity by `factor`; real quantities and
    /// shares are unchanged.
    pub fn rescale_nominal(&mut self, factor: T) {
        for v in [
            &mut self.wage_m,
            &mut self.wage_f,
            &mut self.income,
            &mut self.price_m,
            &mut self.price_f,
            &mut self.price_ideal,
        ] {
            for x in v.iter_mut() {
                *x = *x * factor;
            }
        }
    }

    pub fn to_f64(&self) -> Equilibrium<f64> {
        let v = |xs: &[T]| xs.iter().map(|x| x.as_f64()).collect::<Vec<f64>>();
        Equilibrium {
            wage_m: v(&self.wage_m),
            wage_f: v(&self.wage_f),
            income: v(&self.income),
            labor_m: v(&self.labor_m),
            labor_f: v(&self.labor_f),
            price_m: v(&self.price_m),
            price_f: v(&self.price_f),
            price_ideal: v(&self.price_ideal),
            share_m: self.share_m.iter().map(|r| v(r)).collect(),
            share_f: self.share_f.iter().map(|r| v(r)).collect(),
            claims_scale: self.claims_scale.as_f64(),
            numeraire: self.numeraire,
        }
    }
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
    fn ideal_price_index_examples() {
        assert!((ideal_price_index::<f64>(1.0, 1.0, 0.5).unwrap() - 2.0).abs() < 1e-15);
        assert!((ideal_price_index::<f64>(4.0, 1.0, 0.5).unwrap() - 4.0).abs() < 1e-14);
        assert!(matches!(ideal_price_index::<f64>(0.0, 1.0, 0.5), Err(ModelError::Domain { .. })));
        assert!(matches!(ideal_price_index::<f64>(1.0, 1.0, 1.0), Err(ModelError::Domain { .. })));
    }

    #[test]
    fn ideal_price_index_matches_direct_power_evaluation() {
        // Oracle: A computed with plain powers, no log domain.
        for &a in &[0.05f64, 0.2, 0.37, 0.5, 0.81, 0.95] {
            let oracle = a.powf(-a) * (1.0 - a).powf(-(1.0 - a));
            let got = ideal_price_index::<f64>(1.0, 1.0, a).unwrap();
            assert!((got / oracle - 1.0).abs() < 1e-14, "alpha {a}");
        }
    }

    #[test]
    fn landed_price_examples() {
        let mut p = EconomyParams::<f64>::symmetric(2, 3.0, 0.5, 0.5, 0.2, 2.0);
        assert!((landed_price(0, 0, Sector::Male, &p, &[1.0, 1.0], &[1.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        p.beta_m = vec![0.5, 0.5];
        let got = landed_price(0, 1, Sector::Male, &p, &[4.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!((got - 4.0).abs() < 1e-14);
    }

    #[test]
    fn sector_price_index_examples() {
        assert!((sector_price_index::<f64>(&[1.0, 2.0], 2.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let p = sector_price_index(&[1.7; 4], 5.0).unwrap();
        assert!((p - 1.7 * 4.0_f64.powf(1.0 / (1.0 - 5.0))).abs() < 1e-14);
        assert!(matches!(sector_price_index(&[1.0, 2.0], 1.0), Err(ModelError::Unsupported(_))));
        assert!(matches!(sector_price_index(&[1.0, -2.0], 2.0), Err(ModelError::Domain { .. })));
    }

    #[test]
    fn full_segmentation_uses_single_wage() {
        // beta = 1 ignores w_f entirely, even if it is enormous.
        let c = log_unit_cost(1.0, 0.3_f64, 700.0, 1.0);
        assert_eq!(c, 0.3);
        let c = log_unit_cost(0.0, 700.0_f64, 0.3, 1.0);
        assert_eq!(c, 0.3);
    }

    #[test]
    fn trade_share_symmetric_and_autarky() {
        let p = EconomyParams::<f64>::symmetric(4, 3.0, 0.5, 0.7, 0.3, 1.0);
        let w = vec![1.0; 4];
        for o in 0..4 {
            for d in 0..4 {
                let s = trade_share(o, d, Sector::Female, &p, &w, &w).unwrap();
                assert!((s - 0.25).abs() < 1e-15);
            }
        }
        let p1 = EconomyParams::<f64>::symmetric(1, 3.0, 0.5, 0.7, 0.3, 1.0);
        assert_eq!(trade_share(0, 0, Sector::Male, &p1, &[2.0], &[3.0]).unwrap(), 1.0);
    }

    #[test]
    fn trade_share_matches_direct_formula() {
        // Oracle: numerator over denominator with plain powers.
        let p = asym3();
        let wm = [1.0f64, 1.4, 0.7];
        let wf = [0.8f64, 0.9, 1.2];
        for sector in Sector::BOTH {
            for d in 0..3 {
                let term = |k: usize| {
                    let b = p.beta(k, sector);
                    (p.tau[k][d] * wm[k].powf(b) * wf[k].powf(1.0 - b)).powf(1.0 - p.sigma)
                        * p.productivity(k, sector).powf(p.sigma - 1.0)
                };
                let denom: f64 = (0..3).map(term).sum();
                for o in 0..3 {
                    let got = trade_share(o, d, sector, &p, &wm, &wf).unwrap();
                    assert!((got - term(o) / denom).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn labor_supply_ratio_examples() {
        let (lm, lf) = labor_supply_levels::<f64>(1.3, 1.3, 2.0, 1.0, 1.7).unwrap();
        assert!((lf / lm - 1.0).abs() < 1e-15);
        let (lm, lf) = labor_supply_levels::<f64>(1.0, 2.0, 1.5, 1.0, 1.0).unwrap();
        assert!((lf / lm - 2.0).abs() < 1e-14);
        assert!(matches!(labor_supply_levels(1.0, 1.0, 1.0, 1.0, 0.0), Err(ModelError::Domain { .. })));
    }

    #[test]
    fn labor_demand_ratio_boundary_cases() {
        let mut p = EconomyParams::<f64>::symmetric(2, 3.0, 0.4, 0.5, 0.5 - 1e-12, 1.2);
        p.beta_f = vec![0.5, 0.5];
        let eq = Equilibrium::at_wages(&p, &[1.0, 1.1], &[0.7, 0.9]).unwrap();
        for o in 0..2 {
            let got = labor_demand_ratio(o, &p, &eq).unwrap();
            assert!((got - 1.0 / eq.wage_ratio(o)).abs() < 1e-13);
        }
        let mut p1 = EconomyParams::<f64>::symmetric(1, 3.0, 0.3, 1.0, 0.0, 1.0);
        p1.endowment = vec![0.4];
        let eq = Equilibrium::at_wages(&p1, &[1.0], &[0.6]).unwrap();
        let got = labor_demand_ratio(0, &p1, &eq).unwrap();
        assert!((got - (0.7 / 0.3) / 0.6).abs() < 1e-13);
    }

    #[test]
    fn labor_demand_ratio_matches_term_by_term_sum() {
        let p = asym3();
        let eq = Equilibrium::at_wages(&p, &[1.0, 1.2, 0.9], &[0.7, 1.1, 0.8]).unwrap();
        for o in 0..3 {
            let mut num = 0.0;
            let mut den = 0.0;
            for d in 0..3 {
                let xf = eq.share_f[o][d] * (1.0 - p.alpha[d]) * eq.income[d];
                let xm = eq.share_m[o][d] * p.alpha[d] * eq.income[d];
                num += (1.0 - p.beta_f[o]) * xf + (1.0 - p.beta_m[o]) * xm;
                den += p.beta_f[o] * xf + p.beta_m[o] * xm;
            }
            let oracle = num / den * (eq.wage_m[o] / eq.wage_f[o]);
            assert!((labor_demand_ratio(o, &p, &eq).unwrap() / oracle - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn sector_labor_incomes_symmetric() {
        let p = EconomyParams::<f64>::symmetric(3, 4.0, 0.55, 0.8, 0.2, 1.5);
        let eq = Equilibrium::at_wages(&p, &[1.0; 3], &[0.8; 3]).unwrap();
        let first = eq.demand_labor_incomes(&p, 0);
        for o in 1..3 {
            let inc = eq.demand_labor_incomes(&p, o);
            assert!((inc.0 - first.0).abs() < 1e-14 && (inc.1 - first.1).abs() < 1e-14);
        }
    }

    #[test]
    fn one_region_labor_income_exhausts_spending() {
        // With a single region the levy makes all spending labor income.
        let mut p = EconomyParams::<f64>::symmetric(1, 2.5, 0.45, 0.75, 0.25, 1.0);
        p.endowment = vec![3.0];
        let eq = Equilibrium::at_wages(&p, &[1.0], &[0.9]).unwrap();
        let (female, male) = eq.demand_labor_incomes(&p, 0);
        assert!(((female + male) / eq.income[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        let good = asym3();
        good.validate().unwrap();

        let mut p = good.clone();
        p.tau[1][1] = 1.1;
        assert!(matches!(p.validate(), Err(ModelError::InvalidParams(m)) if m.contains("costless")));

        let mut p = good.clone();
        p.tau[0][2] = 5.0;
        assert!(matches!(p.validate(), Err(ModelError::InvalidParams(m)) if m.contains("triangle")));

        let mut p = good.clone();
        p.beta_f[2] = 0.7;
        assert!(matches!(p.validate(), Err(ModelError::InvalidParams(m)) if m.contains("must exceed")));

        let mut p = good.clone();
        p.sigma = 1.0;
        assert!(matches!(p.validate(), Err(ModelError::Unsupported(_))));

        let mut p = good.clone();
        p.alpha[0] = 1.0;
        assert!(p.validate().is_err());

        let mut p = good;
        p.nu.pop();
        assert!(matches!(p.validate(), Err(ModelError::InvalidParams(m)) if m.contains("nu has length")));

        let seg = EconomyParams::<f64>::symmetric(2, 3.0, 0.5, 1.0, 0.0, 1.2);
        seg.validate().unwrap();
    }

    #[test]
    fn sector_factor_ratio_boundary() {
        assert!((sector_factor_ratio::<f64>(0.25, 2.0).unwrap() - 1.5).abs() < 1e-15);
        assert!(matches!(sector_factor_ratio(1.0, 2.0), Err(ModelError::Degenerate(_))));
        assert!(matches!(sector_factor_ratio(0.0, 2.0), Err(ModelError::Degenerate(_))));
    }

    #[test]
    fn f32_evaluation_tracks_f64() {
        let p = asym3();
        let p32 = p.map(|x| x as f32);
        let e64 = Equilibrium::at_wages(&p, &[1.0, 1.2, 0.9], &[0.7, 1.1, 0.8]).unwrap();
        let e32 = Equilibrium::at_wages(&p32, &[1.0, 1.2, 0.9], &[0.7, 1.1, 0.8]).unwrap();
        for d in 0..3 {
            assert!((e32.income[d] as f64 / e64.income[d] - 1.0).abs() < 1e-5);
        }
    }
}
