//! Structural checks on the auction game: the dominance construction for
//! unrestricted supplies, the kinked-offer improvement in the K-Lipschitz
//! space, increasing differences of the restricted game, and comparative
//! statics in `K`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{find_equilibrium, SolverOptions};
use crate::error::{Error, Result};
use crate::market::{check_slope, clear_market_kinked, KinkedOffer, Scenario, SupplyCurve};
use crate::payoff::restricted_utility;
use crate::scalar::Scalar;

/// Uniform refinement nodes added on `[0, p*]` by [`dominance_transform`].
pub const DOMINANCE_EXTRA_NODES: usize = 64;
/// Slack below which a difference is not counted as a violation of
/// increasing differences.
pub const INCREASING_DIFFERENCES_SLACK: f64 = 1e-9;

fn check_clearing_price<T: Scalar>(supply: &SupplyCurve<T>, clearing_price: T) -> Result<()> {
    let cap = supply.domain_end();
    if clearing_price.is_nan() || clearing_price < T::zero() || clearing_price > cap {
        return Err(Error::PriceOutOfRange {
            value: clearing_price.to_f64_lossy(),
            cap: cap.to_f64_lossy(),
        });
    }
    if clearing_price == T::zero() {
        return Err(Error::ZeroClearingPrice);
    }
    Ok(())
}

/// The curve `p -> S(p^2 / p*)`, resampled on the preimages of the original
/// nodes plus a uniform refinement of `[0, p*]`.
///
/// The argument is capped at the end of the domain, so beyond
/// `sqrt(p_hat p*)` the result is constant at `S(p_hat)`. The value at `p*`
/// equals `S(p*)` exactly, which keeps the clearing price unchanged; below
/// `p*` the curve lies under `S`, above `p*` it lies over it.
pub fn dominance_transform<T: Scalar>(supply: &SupplyCurve<T>, clearing_price: T) -> Result<SupplyCurve<T>> {
    check_clearing_price(supply, clearing_price)?;
    let cap = supply.domain_end();
    let p_star = clearing_price;

    let mut prices: Vec<T> = supply
        .nodes()
        .iter()
        .map(|&(x, _)| (x * p_star).sqrt().min(cap))
        .collect();
    let n_extra = T::lit(DOMINANCE_EXTRA_NODES as f64);
    prices.extend((1..=DOMINANCE_EXTRA_NODES).map(|k| p_star * T::lit(k as f64) / n_extra));
    prices.extend([T::zero(), p_star, cap]);
    prices.sort_by(|a, b| a.partial_cmp(b).expect("finite node prices"));
    prices.dedup();

    let nodes = prices
        .into_iter()
        .map(|u| {
            let arg = if u == p_star { p_star } else { (u * u / p_star).min(cap) };
            let q = if u == T::zero() { T::zero() } else { supply.value_at(arg) };
            (u, q)
        })
        .collect();
    SupplyCurve::new(nodes)
}

/// The kinked offer with slope `K` that sells exactly `S(p*)` at `p*`:
/// breakpoint `p* - S(p*) / K`.
///
/// For a K-Lipschitz `S` this offer lies below `S` on `[0, p*]` and above it
/// beyond, so the clearing price is unchanged and the pay-as-bid revenue can
/// only grow.
pub fn kink_improvement<T: Scalar>(supply: &SupplyCurve<T>, clearing_price: T, slope: T) -> Result<KinkedOffer<T>> {
    check_slope(slope)?;
    supply.check_lipschitz(slope)?;
    check_clearing_price(supply, clearing_price)?;
    let breakpoint = (clearing_price - supply.value_at(clearing_price) / slope).max(T::zero());
    Ok(KinkedOffer { breakpoint, slope })
}

/// Two ordered strategy pairs for the increasing-differences test:
/// `own_low <= own_high` and `others_low <= others_high` componentwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quadruple<T> {
    pub own_low: T,
    pub own_high: T,
    pub others_low: Vec<T>,
    pub others_high: Vec<T>,
}

impl<T: Scalar> Quadruple<T> {
    fn validate(&self, n_others: usize) -> Result<()> {
        if self.others_low.len() != n_others || self.others_high.len() != n_others {
            return Err(Error::MalformedQuadruple(format!(
                "expected {n_others} opponent breakpoints, got {} and {}",
                self.others_low.len(),
                self.others_high.len()
            )));
        }
        if !(self.own_low <= self.own_high) {
            return Err(Error::MalformedQuadruple(format!(
                "own breakpoints out of order: {} > {}",
                self.own_low, self.own_high
            )));
        }
        if let Some(j) = self
            .others_low
            .iter()
            .zip(&self.others_high)
            .position(|(lo, hi)| !(lo <= hi))
        {
            return Err(Error::MalformedQuadruple(format!(
                "opponent breakpoint {j} out of order: {} > {}",
                self.others_low[j], self.others_high[j]
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation<T> {
    pub quadruple: Quadruple<T>,
    /// `u(own_high, others_high) - u(own_low, others_high)`
    pub lhs: T,
    /// `u(own_high, others_low) - u(own_low, others_low)`
    pub rhs: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncreasingDifferencesReport<T> {
    pub tested_quadruples: usize,
    pub violations: Vec<Violation<T>>,
    pub is_supermodular_on_sample: bool,
}

/// Both sides of the increasing-differences inequality for one quadruple.
pub fn increasing_differences_sides<T: Scalar>(
    scenario: &Scenario<T>,
    firm_index: usize,
    quadruple: &Quadruple<T>,
) -> Result<(T, T)> {
    let firm = scenario.firm(firm_index)?;
    quadruple.validate(scenario.n_firms() - 1)?;
    let u = |own: T, others: &[T]| restricted_utility(own, others, scenario.lipschitz, &scenario.demand, firm);
    let q = quadruple;
    let lhs = u(q.own_high, &q.others_high)? - u(q.own_low, &q.others_high)?;
    let rhs = u(q.own_high, &q.others_low)? - u(q.own_low, &q.others_low)?;
    Ok((lhs, rhs))
}

/// Evaluates the increasing-differences inequality on every quadruple and
/// records those where it fails by more than the slack.
pub fn increasing_differences_check<T: Scalar>(
    scenario: &Scenario<T>,
    firm_index: usize,
    quadruples: &[Quadruple<T>],
) -> Result<IncreasingDifferencesReport<T>> {
    let slack = T::lit(INCREASING_DIFFERENCES_SLACK);
    let mut violations = Vec::new();
    for q in quadruples {
        let (lhs, rhs) = increasing_differences_sides(scenario, firm_index, q)?;
        if lhs < rhs - slack {
            violations.push(Violation {
                quadruple: q.clone(),
                lhs,
                rhs,
            });
        }
    }
    Ok(IncreasingDifferencesReport {
        tested_quadruples: quadruples.len(),
        is_supermodular_on_sample: violations.is_empty(),
        violations,
    })
}

/// True when firm `firm_index` sells a positive quantity and the number of
/// selling firms is the same at all four profiles of the quadruple.
pub fn same_regime<T: Scalar>(scenario: &Scenario<T>, firm_index: usize, quadruple: &Quadruple<T>) -> Result<bool> {
    scenario.firm(firm_index)?;
    quadruple.validate(scenario.n_firms() - 1)?;
    let q = quadruple;
    let mut counts = Vec::with_capacity(4);
    for (own, others) in [
        (q.own_low, &q.others_low),
        (q.own_high, &q.others_low),
        (q.own_low, &q.others_high),
        (q.own_high, &q.others_high),
    ] {
        let mut profile = vec![own];
        profile.extend_from_slice(others);
        let price = clear_market_kinked(&profile, scenario.lipschitz, &scenario.demand)?;
        if own >= price {
            return Ok(false);
        }
        counts.push(profile.iter().filter(|&&b| b < price).count());
    }
    Ok(counts.windows(2).all(|w| w[0] == w[1]))
}

/// Seeded uniform quadruples on `[0, p_hat]`.
pub fn random_quadruples<T: Scalar>(scenario: &Scenario<T>, count: usize, seed: u64) -> Vec<Quadruple<T>> {
    let cap = scenario.price_cap().to_f64_lossy();
    let n_others = scenario.n_firms() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pair = |rng: &mut ChaCha8Rng| {
        let a: f64 = rng.gen_range(0.0..=cap);
        let b: f64 = rng.gen_range(0.0..=cap);
        (T::lit(a.min(b)), T::lit(a.max(b)))
    };
    (0..count)
        .map(|_| {
            let (own_low, own_high) = pair(&mut rng);
            let (others_low, others_high) = (0..n_others).map(|_| pair(&mut rng)).unzip();
            Quadruple {
                own_low,
                own_high,
                others_low,
                others_high,
            }
        })
        .collect()
}

/// Ordered quadruples over a uniform grid of `points` prices on `[0, p_hat]`;
/// all opponents share one grid value.
pub fn grid_quadruples<T: Scalar>(scenario: &Scenario<T>, points: usize) -> Vec<Quadruple<T>> {
    let cap = scenario.price_cap();
    let n_others = scenario.n_firms() - 1;
    let denom = T::lit(points.saturating_sub(1).max(1) as f64);
    let grid: Vec<T> = (0..points).map(|k| (cap * T::lit(k as f64) / denom).min(cap)).collect();
    let mut out = Vec::new();
    for (a, &own_low) in grid.iter().enumerate() {
        for &own_high in &grid[a..] {
            for (b, &lo) in grid.iter().enumerate() {
                for &hi in &grid[b..] {
                    out.push(Quadruple {
                        own_low,
                        own_high,
                        others_low: vec![lo; n_others],
                        others_high: vec![hi; n_others],
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepRow<T> {
    pub k: T,
    pub breakpoints: Vec<T>,
    pub clearing_price: T,
    pub utilities: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

/// Solves the scenario for each `K` in `k_values`; rows come back in input
/// order.
pub fn k_sweep<T: Scalar>(base: &Scenario<T>, k_values: &[T], options: &SolverOptions<T>) -> Result<Vec<KSweepRow<T>>> {
    for (i, &k) in k_values.iter().enumerate() {
        check_slope(k)?;
        if k_values[..i].contains(&k) {
            return Err(Error::InvalidOption(format!("duplicate K value {k}")));
        }
    }
    k_values
        .par_iter()
        .map(|&k| {
            let scenario = Scenario {
                lipschitz: k,
                ..base.clone()
            };
            let eq = find_equilibrium(&scenario, options)?;
            Ok(KSweepRow {
                k,
                breakpoints: eq.breakpoints,
                clearing_price: eq.clearing_price,
                utilities: eq.utilities,
                iterations: eq.iterations,
                converged: eq.converged,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::Demand;
    use crate::payoff::pab_utility_general;
    use crate::Firm;

    fn example1() -> Scenario<f64> {
        Scenario::from_costs(Demand::<f64>::new(100.0, 1.0).unwrap(), &[0.5, 0.5], 1.0).unwrap()
    }

    #[test]
    fn zero_curve_is_fixed_point() {
        let z = SupplyCurve::zero(10.0);
        let t = dominance_transform(&z, 4.0).unwrap();
        assert!(t.nodes().iter().all(|&(_, q)| q == 0.0));
    }

    #[test]
    fn identity_becomes_square() {
        let s = SupplyCurve::<f64>::new(vec![(0.0, 0.0), (10.0, 10.0)]).unwrap();
        let t = dominance_transform(&s, 1.0).unwrap();
        for &(p, q) in t.nodes() {
            let expected = (p * p).min(10.0);
            assert!((q - expected).abs() < 1e-12, "{p} {q}");
        }
        assert_eq!(t.value_at(1.0), 1.0);
        for k in 0..=100 {
            let p = k as f64 / 100.0;
            assert!(t.value_at(p) <= s.value_at(p) + 1e-12);
        }
    }

    #[test]
    fn dominance_needs_positive_price() {
        let s = SupplyCurve::<f64>::new(vec![(0.0, 0.0), (10.0, 10.0)]).unwrap();
        assert_eq!(dominance_transform(&s, 0.0), Err(Error::ZeroClearingPrice));
        assert!(matches!(dominance_transform(&s, 11.0), Err(Error::PriceOutOfRange { .. })));
    }

    #[test]
    fn dominance_improves_utility() {
        let s = SupplyCurve::<f64>::new(vec![(0.0, 0.0), (2.0, 3.0), (6.0, 4.0), (10.0, 9.0)]).unwrap();
        let firm = Firm::<f64>::new(1, 0.3).unwrap();
        let t = dominance_transform(&s, 5.0).unwrap();
        assert!(t.integral_to(5.0) < s.integral_to(5.0));
        let u0 = pab_utility_general(&s, 5.0, &firm).unwrap().utility;
        let u1 = pab_utility_general(&t, 5.0, &firm).unwrap().utility;
        assert!(u1 > u0);
    }

    #[test]
    fn kink_improvement_formula() {
        let s = SupplyCurve::<f64>::new(vec![(0.0, 0.0), (10.0, 5.0)]).unwrap();
        let offer = kink_improvement(&s, 4.0, 1.0).unwrap();
        assert_eq!(offer.breakpoint, 2.0);
        assert!(matches!(
            kink_improvement(&s, 4.0, 0.25),
            Err(Error::LipschitzViolation { .. })
        ));
    }

    #[test]
    fn kink_improvement_idempotent() {
        let d = Demand::<f64>::new(100.0, 10.0).unwrap();
        let offer = KinkedOffer::<f64>::new(3.5, 4.0, &d).unwrap();
        let back = kink_improvement(&offer.to_supply_curve(10.0), 7.0, 4.0).unwrap();
        assert!((back.breakpoint - 3.5).abs() < 1e-12);
    }

    #[test]
    fn example1_violation() {
        let s = example1();
        let q = Quadruple {
            own_low: 50.0,
            own_high: 50.2,
            others_low: vec![0.0],
            others_high: vec![1.0],
        };
        let report = increasing_differences_check(&s, 0, &[q]).unwrap();
        assert_eq!(report.violations.len(), 1);
        let v = &report.violations[0];
        assert!((v.lhs - (10.04 - 50.0 / 3.0)).abs() < 1e-9);
        assert_eq!(v.rhs, 0.0);
        assert!(!report.is_supermodular_on_sample);
    }

    #[test]
    fn degenerate_quadruples_are_equalities() {
        let s = example1();
        let q = Quadruple {
            own_low: 20.0,
            own_high: 20.0,
            others_low: vec![3.0],
            others_high: vec![9.0],
        };
        let (lhs, rhs) = increasing_differences_sides(&s, 0, &q).unwrap();
        assert_eq!((lhs, rhs), (0.0, 0.0));
        let q = Quadruple {
            own_low: 20.0,
            own_high: 30.0,
            others_low: vec![9.0],
            others_high: vec![9.0],
        };
        let (lhs, rhs) = increasing_differences_sides(&s, 0, &q).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn order_violation_rejected() {
        let s = example1();
        let q = Quadruple {
            own_low: 30.0,
            own_high: 20.0,
            others_low: vec![3.0],
            others_high: vec![9.0],
        };
        assert!(matches!(
            increasing_differences_check(&s, 0, &[q]),
            Err(Error::MalformedQuadruple(_))
        ));
    }

    #[test]
    fn sweep_rejects_duplicates() {
        let s = example1();
        assert!(k_sweep(&s, &[1.0, 2.0, 1.0], &SolverOptions::default()).is_err());
        assert!(k_sweep(&s, &[1.0, -2.0], &SolverOptions::default()).is_err());
    }

    #[test]
    fn grid_quadruples_are_ordered() {
        let s = example1();
        let qs = grid_quadruples(&s, 4);
        assert_eq!(qs.len(), 100);
        assert!(qs.iter().all(|q| q.own_low <= q.own_high && q.others_low[0] <= q.others_high[0]));
    }
}
