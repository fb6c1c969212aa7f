//! Nash equilibria of the restricted game by damped best-response dynamics,
//! and numerical certificates for candidate equilibria.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::best_response::best_response;
use crate::error::{Error, Result};
use crate::market::{clear_market_general, KinkedOffer, MarketOutcome, Scenario, SupplyCurve};
use crate::payoff::{others, pab_utility_general, restricted_utility};
use crate::scalar::Scalar;

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;
pub const DEFAULT_DAMPING: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions<T> {
    /// Stop once every best response is within this distance of the current
    /// breakpoint.
    pub tolerance: T,
    pub max_iterations: usize,
    /// Weight of the best response in `p <- (1 - λ) p + λ BR(p)`.
    pub damping: T,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tolerance: T::lit(DEFAULT_TOLERANCE),
            max_iterations: DEFAULT_MAX_ITERATIONS,
            damping: T::lit(DEFAULT_DAMPING),
        }
    }
}

impl<T: Scalar> SolverOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if !self.tolerance.is_finite() || self.tolerance <= T::zero() {
            return Err(Error::InvalidOption(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if !(self.damping > T::zero() && self.damping <= T::one()) {
            return Err(Error::InvalidOption(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult<T> {
    pub breakpoints: Vec<T>,
    pub clearing_price: T,
    pub quantities: Vec<T>,
    pub utilities: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    /// `max_i |BR_i(p_{-i}) - p_i|` at the last iteration.
    pub residual: T,
}

/// Best responses of every firm to `profile`.
fn best_responses<T: Scalar>(scenario: &Scenario<T>, profile: &[T]) -> Result<Vec<T>> {
    (0..scenario.n_firms())
        .map(|i| scenario.best_response(i, profile).map(|r| r.best_breakpoint))
        .collect()
}

/// Damped simultaneous best-response iteration started with every firm at
/// `p_hat` (zero supply).
pub fn find_equilibrium<T: Scalar>(scenario: &Scenario<T>, options: &SolverOptions<T>) -> Result<EquilibriumResult<T>> {
    let start = vec![scenario.price_cap(); scenario.n_firms()];
    find_equilibrium_from(scenario, options, &start)
}

/// As [`find_equilibrium`] from a given starting profile.
pub fn find_equilibrium_from<T: Scalar>(
    scenario: &Scenario<T>,
    options: &SolverOptions<T>,
    start: &[T],
) -> Result<EquilibriumResult<T>> {
    options.validate()?;
    scenario.check_profile(start)?;
    let cap = scenario.price_cap();
    let lambda = options.damping;
    let mut profile = start.to_vec();
    let mut residual = T::infinity();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < options.max_iterations {
        let responses = best_responses(scenario, &profile)?;
        iterations += 1;
        residual = responses
            .iter()
            .zip(&profile)
            .map(|(&r, &p)| (r - p).abs())
            .fold(T::zero(), T::max);
        for (p, &r) in profile.iter_mut().zip(&responses) {
            *p = ((T::one() - lambda) * *p + lambda * r).max(T::zero()).min(cap);
        }
        if residual <= options.tolerance {
            converged = true;
            break;
        }
    }

    let outcome = MarketOutcome::from_kinked(scenario, &profile)?;
    Ok(EquilibriumResult {
        breakpoints: profile,
        clearing_price: outcome.clearing_price,
        quantities: outcome.quantities,
        utilities: outcome.utilities,
        iterations,
        converged,
        residual,
    })
}

/// Outcome of restarting the dynamics from random profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiStartReport<T> {
    pub seed: u64,
    pub runs: Vec<EquilibriumResult<T>>,
    /// Converged runs whose breakpoints differ from the first converged run by
    /// more than `agreement_tolerance` in some coordinate.
    pub disagreeing_runs: Vec<usize>,
    pub agreement_tolerance: T,
}

impl<T> MultiStartReport<T> {
    pub fn all_agree(&self) -> bool {
        self.disagreeing_runs.is_empty()
    }
}

/// Runs the dynamics from `starts` seeded uniform random profiles in
/// `[0, p_hat]^n`. Runs are independent and executed in parallel; the result
/// does not depend on the thread count.
pub fn multi_start<T: Scalar>(
    scenario: &Scenario<T>,
    options: &SolverOptions<T>,
    starts: usize,
    seed: u64,
) -> Result<MultiStartReport<T>> {
    options.validate()?;
    let cap = scenario.price_cap().to_f64_lossy();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let profiles: Vec<Vec<T>> = (0..starts)
        .map(|_| {
            (0..scenario.n_firms())
                .map(|_| T::lit(rng.gen_range(0.0..=cap)).min(scenario.price_cap()))
                .collect()
        })
        .collect();
    let runs = profiles
        .par_iter()
        .map(|start| find_equilibrium_from(scenario, options, start))
        .collect::<Result<Vec<_>>>()?;

    let agreement_tolerance = options.tolerance.sqrt().max(T::lit(1e-6));
    let reference = runs.iter().find(|r| r.converged).map(|r| r.breakpoints.clone());
    let disagreeing_runs = match reference {
        None => Vec::new(),
        Some(reference) => runs
            .iter()
            .enumerate()
            .filter(|(_, r)| {
                r.converged
                    && r.breakpoints
                        .iter()
                        .zip(&reference)
                        .any(|(a, b)| (*a - *b).abs() > agreement_tolerance)
            })
            .map(|(k, _)| k)
            .collect(),
    };
    Ok(MultiStartReport {
        seed,
        runs,
        disagreeing_runs,
        agreement_tolerance,
    })
}

/// Numerical evidence that no firm gains more than `epsilon` by deviating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashCertificate<T> {
    pub epsilon: T,
    pub per_firm_max_gain: Vec<T>,
    pub deviation_grid_size: usize,
    pub passed: bool,
}

/// Checks each firm's gain from its closed-form best response and from every
/// point of a uniform deviation grid over `[0, p_hat]`.
pub fn verify_nash<T: Scalar>(
    breakpoints: &[T],
    scenario: &Scenario<T>,
    epsilon: T,
    deviation_grid_size: usize,
) -> Result<NashCertificate<T>> {
    scenario.check_profile(breakpoints)?;
    if deviation_grid_size < 2 {
        return Err(Error::InvalidOption(format!(
            "deviation grid needs at least 2 points, got {deviation_grid_size}"
        )));
    }
    let cap = scenario.price_cap();
    let k = scenario.lipschitz;
    let step = cap / T::lit((deviation_grid_size - 1) as f64);

    let mut gains = Vec::with_capacity(scenario.n_firms());
    for (i, firm) in scenario.firms.iter().enumerate() {
        let rest = others(breakpoints, i);
        let stay = restricted_utility(breakpoints[i], &rest, k, &scenario.demand, firm)?;
        let mut best = best_response(&rest, k, &scenario.demand, firm)?.best_utility;
        for g in 0..deviation_grid_size {
            let x = (step * T::lit(g as f64)).min(cap);
            best = best.max(restricted_utility(x, &rest, k, &scenario.demand, firm)?);
        }
        gains.push((best - stay).positive_part());
    }
    let passed = gains.iter().all(|&g| g <= epsilon);
    Ok(NashCertificate {
        epsilon,
        per_firm_max_gain: gains,
        deviation_grid_size,
        passed,
    })
}

/// Utility change for firm `index` when it replaces its kinked offer by an
/// arbitrary supply curve while everyone else keeps their kinked offer.
/// Both sides are evaluated in the functional game (bisection clearing and
/// exact integration).
pub fn general_deviation_gain<T: Scalar>(
    breakpoints: &[T],
    scenario: &Scenario<T>,
    index: usize,
    deviation: &SupplyCurve<T>,
) -> Result<T> {
    scenario.check_profile(breakpoints)?;
    let firm = scenario.firm(index)?;
    deviation.check_lipschitz(scenario.lipschitz)?;
    let cap = scenario.price_cap();
    let mut curves: Vec<SupplyCurve<T>> = breakpoints
        .iter()
        .map(|&b| KinkedOffer { breakpoint: b, slope: scenario.lipschitz }.to_supply_curve(cap))
        .collect();
    let base_price = clear_market_general(&curves, &scenario.demand)?;
    let base = pab_utility_general(&curves[index], base_price, firm)?.utility;
    curves[index] = deviation.clone();
    let price = clear_market_general(&curves, &scenario.demand)?;
    let deviated = pab_utility_general(deviation, price, firm)?.utility;
    Ok(deviated - base)
}
