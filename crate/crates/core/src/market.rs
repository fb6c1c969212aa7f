//! Demand, firms, supply strategies and the clearing price.
//!
//! The clearing price `p*` is the unique root of `D(p) = sum_i S_i(p)` on
//! `[0, p_hat]`. Linear demand is strictly decreasing and every admissible
//! supply is non-decreasing with `S(0) = 0`, so the root always exists.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Bisection stopping width on price.
pub const BISECTION_TOLERANCE: f64 = 1e-10;
/// Bisection iteration cap.
pub const BISECTION_MAX_ITERATIONS: usize = 200;
/// Relative slack used when validating monotonicity and Lipschitz bounds.
pub const VALIDATION_SLACK: f64 = 1e-12;

fn slack<T: Scalar>(scale: T) -> T {
    let rel = T::lit(VALIDATION_SLACK).max(T::epsilon() * T::lit(16.0));
    rel * scale.abs().max(T::one())
}

/// Linear demand `D(p) = N - gamma * p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Demand<T> {
    intercept: T,
    slope: T,
    price_cap: T,
}

impl<T: Scalar> Demand<T> {
    pub fn new(intercept: T, slope: T) -> Result<Self> {
        if !intercept.is_finite() || intercept < T::zero() {
            return Err(Error::InvalidDemand(format!(
                "intercept N must be finite and >= 0, got {intercept}"
            )));
        }
        if !slope.is_finite() || slope <= T::zero() {
            return Err(Error::InvalidDemand(format!(
                "slope gamma must be finite and > 0, got {slope}"
            )));
        }
        Ok(Self {
            intercept,
            slope,
            price_cap: intercept / slope,
        })
    }

    pub fn intercept(&self) -> T {
        self.intercept
    }

    pub fn slope(&self) -> T {
        self.slope
    }

    /// `p_hat`, the price at which demand vanishes.
    pub fn price_cap(&self) -> T {
        self.price_cap
    }

    /// Quantity demanded at `price`. Written as `gamma * (p_hat - p)` so that
    /// the value at `p_hat` is exactly zero.
    pub fn demand_at(&self, price: T) -> T {
        self.slope * (self.price_cap - price)
    }

    pub(crate) fn check_breakpoints(&self, breakpoints: &[T]) -> Result<()> {
        for (index, &value) in breakpoints.iter().enumerate() {
            if value.is_nan() || value < T::zero() || value > self.price_cap {
                return Err(Error::BreakpointOutOfRange {
                    index,
                    value: value.to_f64_lossy(),
                    cap: self.price_cap.to_f64_lossy(),
                });
            }
        }
        Ok(())
    }
}

/// A producer with quadratic cost `C(q) = c * q^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Firm<T> {
    /// One-based index of the firm in its scenario.
    pub id: usize,
    cost_coeff: T,
}

impl<T: Scalar> Firm<T> {
    pub fn new(id: usize, cost_coeff: T) -> Result<Self> {
        if !cost_coeff.is_finite() || cost_coeff < T::zero() {
            return Err(Error::InvalidFirm {
                id,
                reason: format!("cost coefficient must be finite and >= 0, got {cost_coeff}"),
            });
        }
        Ok(Self { id, cost_coeff })
    }

    pub fn cost_coeff(&self) -> T {
        self.cost_coeff
    }

    pub fn cost_at(&self, quantity: T) -> T {
        self.cost_coeff * quantity * quantity
    }
}

pub(crate) fn check_slope<T: Scalar>(slope: T) -> Result<()> {
    if !slope.is_finite() || slope <= T::zero() {
        return Err(Error::InvalidSlope(slope.to_f64_lossy()));
    }
    Ok(())
}

/// The one-parameter offer `S(p) = K * max(p - p_i, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinkedOffer<T> {
    pub breakpoint: T,
    pub slope: T,
}

impl<T: Scalar> KinkedOffer<T> {
    pub fn new(breakpoint: T, slope: T, demand: &Demand<T>) -> Result<Self> {
        check_slope(slope)?;
        demand.check_breakpoints(&[breakpoint])?;
        Ok(Self { breakpoint, slope })
    }

    pub fn value_at(&self, price: T) -> T {
        self.slope * (price - self.breakpoint).positive_part()
    }

    /// Exact piecewise-linear encoding on `[0, price_cap]`.
    pub fn to_supply_curve(&self, price_cap: T) -> SupplyCurve<T> {
        let mut nodes = vec![(T::zero(), T::zero())];
        if self.breakpoint > T::zero() && self.breakpoint < price_cap {
            nodes.push((self.breakpoint, T::zero()));
        }
        if price_cap > T::zero() {
            nodes.push((price_cap, self.value_at(price_cap)));
        }
        SupplyCurve { nodes }
    }
}

/// Continuous, non-decreasing, piecewise-linear supply with `S(0) = 0`.
///
/// Nodes are `(price, quantity)` pairs with strictly increasing prices,
/// starting at `(0, 0)`. The last node sits at the price cap of the market
/// the curve is used in; that is checked where a demand is at hand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(T, T)>", into = "Vec<(T, T)>")]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct SupplyCurve<T> {
    nodes: Vec<(T, T)>,
}

impl<T: Scalar> TryFrom<Vec<(T, T)>> for SupplyCurve<T> {
    type Error = Error;

    fn try_from(nodes: Vec<(T, T)>) -> Result<Self> {
        Self::new(nodes)
    }
}

impl<T: Scalar> From<SupplyCurve<T>> for Vec<(T, T)> {
    fn from(curve: SupplyCurve<T>) -> Self {
        curve.nodes
    }
}

impl<T: Scalar> SupplyCurve<T> {
    pub fn new(nodes: Vec<(T, T)>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidCurve(format!(
                "need at least two nodes, got {}",
                nodes.len()
            )));
        }
        if nodes.iter().any(|(p, q)| !p.is_finite() || !q.is_finite()) {
            return Err(Error::InvalidCurve("non-finite node".into()));
        }
        if nodes[0] != (T::zero(), T::zero()) {
            return Err(Error::InvalidCurve(format!(
                "first node must be (0, 0), got ({}, {})",
                nodes[0].0, nodes[0].1
            )));
        }
        for (k, w) in nodes.windows(2).enumerate() {
            let ((p0, q0), (p1, q1)) = (w[0], w[1]);
            if p1 <= p0 {
                return Err(Error::InvalidCurve(format!(
                    "node prices must strictly increase (nodes {k} and {})",
                    k + 1
                )));
            }
            if q1 < q0 - slack(q0) {
                return Err(Error::InvalidCurve(format!(
                    "quantity decreases between nodes {k} and {} ({q0} -> {q1})",
                    k + 1
                )));
            }
        }
        Ok(Self { nodes })
    }

    /// `S ≡ 0` on `[0, price_cap]`.
    pub fn zero(price_cap: T) -> Self {
        Self {
            nodes: vec![(T::zero(), T::zero()), (price_cap, T::zero())],
        }
    }

    pub fn nodes(&self) -> &[(T, T)] {
        &self.nodes
    }

    /// Price of the last node.
    pub fn domain_end(&self) -> T {
        self.nodes[self.nodes.len() - 1].0
    }

    /// Checks that the curve is defined exactly on `[0, p_hat]` of `demand`.
    pub fn check_domain(&self, demand: &Demand<T>) -> Result<()> {
        let cap = demand.price_cap();
        let end = self.domain_end();
        if (end - cap).abs() > slack(cap) {
            return Err(Error::InvalidCurve(format!(
                "last node price {end} does not match the price cap {cap}"
            )));
        }
        Ok(())
    }

    /// Linear interpolation; constant extension outside the node range.
    pub fn value_at(&self, price: T) -> T {
        let nodes = &self.nodes;
        if price <= T::zero() {
            return T::zero();
        }
        let last = nodes[nodes.len() - 1];
        if price >= last.0 {
            return last.1;
        }
        // first node with node price > price; k >= 1 since nodes[0].0 = 0 < price
        let k = nodes.partition_point(|&(p, _)| p <= price);
        let (p0, q0) = nodes[k - 1];
        let (p1, q1) = nodes[k];
        if price == p0 {
            return q0;
        }
        q0 + (q1 - q0) * ((price - p0) / (p1 - p0))
    }

    /// Exact `∫_0^price S(p) dp` of the piecewise-linear interpolant.
    pub fn integral_to(&self, price: T) -> T {
        let mut total = T::zero();
        for w in self.nodes.windows(2) {
            let ((p0, q0), (p1, q1)) = (w[0], w[1]);
            if price <= p0 {
                break;
            }
            if price >= p1 {
                total = total + (p1 - p0) * (q0 + q1) * T::half();
            } else {
                let qp = self.value_at(price);
                total = total + (price - p0) * (q0 + qp) * T::half();
                break;
            }
        }
        let last = self.nodes[self.nodes.len() - 1];
        if price > last.0 {
            total = total + (price - last.0) * last.1;
        }
        total
    }

    /// Largest chord slope; for piecewise-linear curves this is the Lipschitz
    /// constant.
    pub fn lipschitz_constant(&self) -> T {
        self.nodes
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .fold(T::zero(), T::max)
    }

    /// Membership in the K-Lipschitz strategy space.
    pub fn check_lipschitz(&self, bound: T) -> Result<()> {
        check_slope(bound)?;
        for (segment, w) in self.nodes.windows(2).enumerate() {
            let rise = w[1].1 - w[0].1;
            let run = w[1].0 - w[0].0;
            if rise > bound * run + slack(bound * run) {
                return Err(Error::LipschitzViolation {
                    segment,
                    slope: (rise / run).to_f64_lossy(),
                    bound: bound.to_f64_lossy(),
                });
            }
        }
        Ok(())
    }

    /// True when every node quantity in `[0, up_to]` is zero.
    pub fn is_zero_up_to(&self, up_to: T) -> bool {
        self.value_at(up_to) == T::zero()
    }
}

/// Clearing price, quantities and utilities of a strategy profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketOutcome<T> {
    pub clearing_price: T,
    pub quantities: Vec<T>,
    pub utilities: Vec<T>,
}

/// Demand, firms and the Lipschitz bound `K` of the strategy space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario<T> {
    pub demand: Demand<T>,
    pub firms: Vec<Firm<T>>,
    pub lipschitz: T,
}

impl<T: Scalar> Scenario<T> {
    pub fn new(demand: Demand<T>, firms: Vec<Firm<T>>, lipschitz: T) -> Result<Self> {
        if firms.is_empty() {
            return Err(Error::NoFirms);
        }
        check_slope(lipschitz)?;
        Ok(Self {
            demand,
            firms,
            lipschitz,
        })
    }

    /// Builds firms with ids `1..=n` from their cost coefficients.
    pub fn from_costs(demand: Demand<T>, costs: &[T], lipschitz: T) -> Result<Self> {
        let firms = costs
            .iter()
            .enumerate()
            .map(|(i, &c)| Firm::new(i + 1, c))
            .collect::<Result<Vec<_>>>()?;
        Self::new(demand, firms, lipschitz)
    }

    pub fn n_firms(&self) -> usize {
        self.firms.len()
    }

    pub fn price_cap(&self) -> T {
        self.demand.price_cap()
    }

    pub(crate) fn firm(&self, index: usize) -> Result<&Firm<T>> {
        self.firms.get(index).ok_or(Error::FirmIndex {
            index,
            count: self.firms.len(),
        })
    }

    pub(crate) fn check_profile(&self, breakpoints: &[T]) -> Result<()> {
        if breakpoints.len() != self.firms.len() {
            return Err(Error::InvalidOption(format!(
                "expected {} breakpoints, got {}",
                self.firms.len(),
                breakpoints.len()
            )));
        }
        self.demand.check_breakpoints(breakpoints)
    }

    /// Clearing price of a profile of kinked offers.
    pub fn clear(&self, breakpoints: &[T]) -> Result<T> {
        self.check_profile(breakpoints)?;
        clear_market_kinked(breakpoints, self.lipschitz, &self.demand)
    }
}

/// Closed-form clearing price for kinked offers `K * [p - p_i]_+`.
///
/// On a segment where the active set `A = {i : p_i < p*}` is fixed the
/// clearing condition is affine, giving `p* = (N + K sum_A p_i) / (gamma + K|A|)`.
/// Breakpoints are scanned in ascending order; the root lies in the first
/// segment whose right end has non-positive excess demand.
pub fn clear_market_kinked<T: Scalar>(breakpoints: &[T], slope: T, demand: &Demand<T>) -> Result<T> {
    if breakpoints.is_empty() {
        return Err(Error::NoFirms);
    }
    check_slope(slope)?;
    demand.check_breakpoints(breakpoints)?;

    let mut sorted = breakpoints.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("breakpoints are not NaN"));

    let mut active_sum = T::zero();
    let mut lower = T::zero();
    for (m, &next) in sorted.iter().enumerate() {
        // excess demand at the next breakpoint with the first m firms active
        let supplied = slope * (next * T::lit(m as f64) - active_sum);
        if demand.demand_at(next) - supplied <= T::zero() {
            let price = segment_price(demand, slope, m, active_sum);
            return Ok(price.max(lower).min(next));
        }
        active_sum = active_sum + next;
        lower = next;
    }
    let price = segment_price(demand, slope, sorted.len(), active_sum);
    Ok(price.max(lower).min(demand.price_cap()))
}

fn segment_price<T: Scalar>(demand: &Demand<T>, slope: T, active: usize, active_sum: T) -> T {
    if active == 0 {
        return demand.price_cap();
    }
    (demand.intercept() + slope * active_sum) / (demand.slope() + slope * T::lit(active as f64))
}

/// Clearing price for general supply curves by bisection on the strictly
/// decreasing excess demand `D(p) - sum_i S_i(p)`.
pub fn clear_market_general<T: Scalar>(supplies: &[SupplyCurve<T>], demand: &Demand<T>) -> Result<T> {
    if supplies.is_empty() {
        return Err(Error::NoFirms);
    }
    for curve in supplies {
        curve.check_domain(demand)?;
    }
    let excess = |p: T| {
        supplies
            .iter()
            .fold(demand.demand_at(p), |acc, s| acc - s.value_at(p))
    };

    let mut lo = T::zero();
    let mut hi = demand.price_cap();
    if excess(hi) >= T::zero() {
        return Ok(hi);
    }
    if excess(lo) <= T::zero() {
        return Ok(lo);
    }
    let tol = T::tolerance_at(BISECTION_TOLERANCE, hi);
    for _ in 0..BISECTION_MAX_ITERATIONS {
        if hi - lo <= tol {
            break;
        }
        let mid = (lo + hi) * T::half();
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) * T::half())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_firm_demand() -> Demand<f64> {
        Demand::<f64>::new(100.0, 10.0).unwrap()
    }

    #[test]
    fn demand_vanishes_at_cap() {
        let d = Demand::<f64>::new(7.3, 0.3).unwrap();
        assert_eq!(d.demand_at(d.price_cap()), 0.0);
        assert!(Demand::<f64>::new(-1.0, 1.0).is_err());
        assert!(Demand::<f64>::new(1.0, 0.0).is_err());
    }

    #[test]
    fn firm_rejects_negative_cost() {
        assert!(Firm::<f64>::new(1, -0.1).is_err());
        let f = Firm::<f64>::new(1, 0.25).unwrap();
        assert_eq!(f.cost_at(2.0), 1.0);
    }

    #[test]
    fn paper_k5_clearing() {
        let p = clear_market_kinked(&[5.68, 6.53, 7.09, 7.42], 5.0, &four_firm_demand()).unwrap();
        assert!((p - 7.79).abs() < 0.01, "{p}");
    }

    #[test]
    fn paper_k1000_clearing() {
        let p = clear_market_kinked(&[7.261, 7.269, 7.272, 7.274], 1000.0, &four_firm_demand()).unwrap();
        assert!((p - 7.276).abs() < 0.001, "{p}");
    }

    #[test]
    fn all_at_cap_clears_at_cap() {
        let d = four_firm_demand();
        let p = clear_market_kinked(&[10.0; 3], 5.0, &d).unwrap();
        assert_eq!(p, 10.0);
        let zero = vec![SupplyCurve::zero(10.0); 2];
        assert_eq!(clear_market_general(&zero, &d).unwrap(), 10.0);
    }

    #[test]
    fn kinked_clearing_errors() {
        let d = four_firm_demand();
        assert_eq!(clear_market_kinked::<f64>(&[], 5.0, &d), Err(Error::NoFirms));
        assert!(matches!(
            clear_market_kinked(&[1.0, 10.5], 5.0, &d),
            Err(Error::BreakpointOutOfRange { index: 1, .. })
        ));
        assert!(matches!(
            clear_market_kinked(&[1.0], 0.0, &d),
            Err(Error::InvalidSlope(_))
        ));
    }

    #[test]
    fn identity_supply_clears_at_fifty() {
        let d = Demand::<f64>::new(100.0, 1.0).unwrap();
        let s = SupplyCurve::<f64>::new(vec![(0.0, 0.0), (100.0, 100.0)]).unwrap();
        let p = clear_market_general(&[s], &d).unwrap();
        assert!((p - 50.0).abs() < 1e-9);
    }

    #[test]
    fn general_clearing_of_paper_k10_profile() {
        let d = four_firm_demand();
        let curves: Vec<_> = [6.36, 6.9, 7.22, 7.39]
            .iter()
            .map(|&b| KinkedOffer::<f64>::new(b, 10.0, &d).unwrap().to_supply_curve(10.0))
            .collect();
        let p = clear_market_general(&curves, &d).unwrap();
        assert!((p - 7.57).abs() < 0.01, "{p}");
    }

    #[test]
    fn curve_validation() {
        assert!(SupplyCurve::<f64>::new(vec![(0.0, 0.0)]).is_err());
        assert!(SupplyCurve::<f64>::new(vec![(0.0, 1.0), (1.0, 1.0)]).is_err());
        assert!(SupplyCurve::<f64>::new(vec![(0.0, 0.0), (1.0, 2.0), (1.0, 3.0)]).is_err());
        assert!(SupplyCurve::<f64>::new(vec![(0.0, 0.0), (1.0, 2.0), (2.0, 1.0)]).is_err());
        // within relative slack
        assert!(SupplyCurve::<f64>::new(vec![(0.0, 0.0), (1.0, 2.0), (2.0, 2.0 - 1e-15)]).is_ok());
        let c = SupplyCurve::<f64>::new(vec![(0.0, 0.0), (1.0, 2.0), (3.0, 3.0)]).unwrap();
        assert_eq!(c.lipschitz_constant(), 2.0);
        assert!(c.check_lipschitz(2.0).is_ok());
        assert!(matches!(
            c.check_lipschitz(1.5),
            Err(Error::LipschitzViolation { segment: 0, .. })
        ));
        let d = Demand::<f64>::new(30.0, 10.0).unwrap();
        assert!(c.check_domain(&d).is_ok());
        assert!(c.check_domain(&four_firm_demand()).is_err());
    }

    #[test]
    fn curve_interpolation_and_integral() {
        let c = SupplyCurve::<f64>::new(vec![(0.0, 0.0), (1.0, 2.0), (3.0, 3.0)]).unwrap();
        assert_eq!(c.value_at(0.5), 1.0);
        assert_eq!(c.value_at(2.0), 2.5);
        assert_eq!(c.value_at(5.0), 3.0);
        assert_eq!(c.integral_to(1.0), 1.0);
        assert_eq!(c.integral_to(2.0), 1.0 + 2.25);
        assert_eq!(c.integral_to(3.0), 1.0 + 5.0);
    }

    #[test]
    fn kinked_encoding_matches_offer() {
        let d = four_firm_demand();
        for b in [0.0, 3.3, 10.0] {
            let offer = KinkedOffer::<f64>::new(b, 4.0, &d).unwrap();
            let curve = offer.to_supply_curve(10.0);
            for k in 0..=100 {
                let p = k as f64 * 0.1;
                assert!((curve.value_at(p) - offer.value_at(p)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scenario_requires_firms() {
        let d = four_firm_demand();
        assert_eq!(Scenario::<f64>::new(d, vec![], 5.0), Err(Error::NoFirms));
        assert!(Scenario::from_costs(d, &[1.0], -1.0).is_err());
    }
}
