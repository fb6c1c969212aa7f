//! Solver for the pay-as-bid supply-function auction.
//!
//! Firms with quadratic costs bid non-decreasing supply functions into a
//! market with linear demand; the market clears where demand meets total
//! supply and every unit is paid at its bid price. With supply functions
//! restricted to be K-Lipschitz, equilibria are attained by kinked offers
//! `K [p - p_i]_+`, reducing the game to one breakpoint per firm.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `*F64` and
//! `*F32` aliases below fix the scalar type.

pub mod analysis;
pub mod best_response;
pub mod equilibrium;
pub mod error;
pub mod market;
pub mod payoff;
pub mod scalar;
pub mod search;

pub use analysis::{
    dominance_transform, increasing_differences_check, k_sweep, kink_improvement, IncreasingDifferencesReport,
    KSweepRow, Quadruple,
};
pub use best_response::{best_response, best_response_grid_oracle, BestResponseResult};
pub use equilibrium::{find_equilibrium, multi_start, verify_nash, EquilibriumResult, NashCertificate, SolverOptions};
pub use error::{Error, Result};
pub use market::{clear_market_general, clear_market_kinked, Demand, Firm, KinkedOffer, MarketOutcome, Scenario, SupplyCurve};
pub use payoff::{pab_utility_general, restricted_utility, UtilityBreakdown};
pub use scalar::Scalar;

pub type DemandF64 = Demand<f64>;
pub type FirmF64 = Firm<f64>;
pub type KinkedOfferF64 = KinkedOffer<f64>;
pub type SupplyCurveF64 = SupplyCurve<f64>;
pub type ScenarioF64 = Scenario<f64>;
pub type MarketOutcomeF64 = MarketOutcome<f64>;
pub type SolverOptionsF64 = SolverOptions<f64>;
pub type EquilibriumResultF64 = EquilibriumResult<f64>;

pub type DemandF32 = Demand<f32>;
pub type FirmF32 = Firm<f32>;
pub type KinkedOfferF32 = KinkedOffer<f32>;
pub type SupplyCurveF32 = SupplyCurve<f32>;
pub type ScenarioF32 = Scenario<f32>;
pub type MarketOutcomeF32 = MarketOutcome<f32>;
pub type SolverOptionsF32 = SolverOptions<f32>;
pub type EquilibriumResultF32 = EquilibriumResult<f32>;
