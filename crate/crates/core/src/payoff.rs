//! Pay-as-bid utilities.
//!
//! A firm bidding `S` is paid its bid price for every unit sold, so its
//! revenue at clearing price `p*` is `p* S(p*) - ∫_0^{p*} S(p) dp`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{check_slope, clear_market_kinked, Demand, Firm, MarketOutcome, Scenario, SupplyCurve};
use crate::scalar::Scalar;

/// Revenue, cost and utility of one firm. `utility = revenue - cost`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityBreakdown<T> {
    pub revenue: T,
    pub cost: T,
    pub utility: T,
}

impl<T: Scalar> UtilityBreakdown<T> {
    fn new(revenue: T, cost: T) -> Self {
        Self {
            revenue,
            cost,
            utility: revenue - cost,
        }
    }
}

/// Pay-as-bid utility of a general piecewise-linear supply, integrated exactly.
pub fn pab_utility_general<T: Scalar>(
    supply: &SupplyCurve<T>,
    clearing_price: T,
    firm: &Firm<T>,
) -> Result<UtilityBreakdown<T>> {
    let cap = supply.domain_end();
    if clearing_price.is_nan() || clearing_price < T::zero() || clearing_price > cap {
        return Err(Error::PriceOutOfRange {
            value: clearing_price.to_f64_lossy(),
            cap: cap.to_f64_lossy(),
        });
    }
    let quantity = supply.value_at(clearing_price);
    let revenue = clearing_price * quantity - supply.integral_to(clearing_price);
    Ok(UtilityBreakdown::new(revenue, firm.cost_at(quantity)))
}

/// Closed-form utility of the kinked offer `K [p - p_i]_+` at a given
/// clearing price: with `q = K [p* - p_i]_+` the integral term is `q^2 / 2K`.
pub fn kinked_utility<T: Scalar>(
    breakpoint: T,
    clearing_price: T,
    slope: T,
    firm: &Firm<T>,
) -> UtilityBreakdown<T> {
    let quantity = slope * (clearing_price - breakpoint).positive_part();
    if quantity == T::zero() {
        return UtilityBreakdown::new(T::zero(), firm.cost_at(T::zero()));
    }
    let revenue = clearing_price * quantity - quantity * quantity / (T::two() * slope);
    UtilityBreakdown::new(revenue, firm.cost_at(quantity))
}

/// Utility in the restricted game over breakpoints: clears the market for the
/// profile `(own, others...)` and evaluates the kinked utility of `own`.
pub fn restricted_utility<T: Scalar>(
    own_breakpoint: T,
    other_breakpoints: &[T],
    slope: T,
    demand: &Demand<T>,
    firm: &Firm<T>,
) -> Result<T> {
    restricted_breakdown(own_breakpoint, other_breakpoints, slope, demand, firm).map(|(_, b)| b.utility)
}

/// Like [`restricted_utility`] but also returns the clearing price and the
/// full breakdown.
pub fn restricted_breakdown<T: Scalar>(
    own_breakpoint: T,
    other_breakpoints: &[T],
    slope: T,
    demand: &Demand<T>,
    firm: &Firm<T>,
) -> Result<(T, UtilityBreakdown<T>)> {
    check_slope(slope)?;
    let mut profile = Vec::with_capacity(other_breakpoints.len() + 1);
    profile.push(own_breakpoint);
    profile.extend_from_slice(other_breakpoints);
    let price = clear_market_kinked(&profile, slope, demand)?;
    Ok((price, kinked_utility(own_breakpoint, price, slope, firm)))
}

/// Breakpoints of every firm except `index`.
pub(crate) fn others<T: Copy>(profile: &[T], index: usize) -> Vec<T> {
    profile
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != index)
        .map(|(_, &p)| p)
        .collect()
}

impl<T: Scalar> MarketOutcome<T> {
    /// Outcome of a profile of kinked offers in `scenario`.
    pub fn from_kinked(scenario: &Scenario<T>, breakpoints: &[T]) -> Result<Self> {
        let price = scenario.clear(breakpoints)?;
        let k = scenario.lipschitz;
        let quantities = breakpoints
            .iter()
            .map(|&b| k * (price - b).positive_part())
            .collect();
        let utilities = breakpoints
            .iter()
            .zip(&scenario.firms)
            .map(|(&b, firm)| kinked_utility(b, price, k, firm).utility)
            .collect();
        Ok(Self {
            clearing_price: price,
            quantities,
            utilities,
        })
    }
}
