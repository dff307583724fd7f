//! Two-sector Armington trade model with gender-specific labor supply.
//!
//! Regions produce a male-intensive good and a female-intensive good with
//! Cobb-Douglas technologies and trade them under CES demand with iceberg
//! costs. Households supply male and female labor with isoelastic disutility.
//! The crate solves for wages and evaluates how foreign demand shocks move
//! the female-to-male employment ratio.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the precision.

pub mod dual;
pub mod economy;
pub mod error;
pub mod linalg;
pub mod scalar;
pub mod solver;
pub mod statics;

pub use dual::Dual;
pub use economy::{
    ideal_price_index, labor_demand_ratio, labor_supply_levels, landed_price, log_unit_cost, sector_factor_ratio,
    sector_labor_incomes, sector_price_index, sector_revenues, trade_share, EconomyParams, Equilibrium, Numeraire,
    Sector,
};
pub use error::{ModelError, Result};
pub use scalar::Scalar;
pub use solver::{excess_residuals, solve, walras_check, SolveReport, SolverOptions};
pub use statics::{
    analytic_ratio_derivative, appendix_bracket, appendix_formula, classify_prop1, demand_shift_derivative,
    finite_difference_derivative, ho_contrast, xi, HoDecomposition, Prop1Report, SectorRatio, ShockExperiment, Sign,
};

pub type EconomyParamsF64 = EconomyParams<f64>;
pub type EconomyParamsF32 = EconomyParams<f32>;
pub type EquilibriumF64 = Equilibrium<f64>;
pub type EquilibriumF32 = Equilibrium<f32>;
pub type SolverOptionsF64 = SolverOptions<f64>;
pub type SolverOptionsF32 = SolverOptions<f32>;
pub type ShockExperimentF64 = ShockExperiment<f64>;
