//! Best responses in the restricted game over breakpoints.
//!
//! Fix the opponents' breakpoints. As the own breakpoint `x` moves through
//! `[0, p_hat]` the clearing price is a continuous, non-decreasing,
//! piecewise-affine function of `x`. It changes slope whenever the clearing
//! price crosses an opponent's breakpoint, and becomes constant once the firm
//! stops selling (`x >= p0`, the clearing price without the firm). On each
//! piece the utility is a concave quadratic in `x`, so the best response is
//! the best of the clamped stationary points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{check_slope, clear_market_kinked, Demand, Firm, Scenario};
use crate::payoff::{others, restricted_utility};
use crate::scalar::Scalar;
use crate::search::golden_section_max;

/// Golden-section iteration budget of the grid oracle.
pub const GOLDEN_MAX_ITERATIONS: usize = 200;
/// Golden-section bracket width, relative to `p_hat`.
pub const GOLDEN_RELATIVE_XTOL: f64 = 1e-12;
/// Noise level for the unimodality audit.
pub const AUDIT_NOISE: f64 = 1e-9;

/// One piece of the own-breakpoint axis on which the opponents' active set is
/// constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentDiagnostic<T> {
    /// Number of opponents selling on this piece.
    pub active_opponents: usize,
    pub interval: (T, T),
    pub optimum_breakpoint: T,
    pub optimum_utility: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponseResult<T> {
    pub best_breakpoint: T,
    pub best_utility: T,
    pub segment_diagnostics: Vec<SegmentDiagnostic<T>>,
}

/// Clearing price when the firm offers nothing.
fn price_without_firm<T: Scalar>(others: &[T], slope: T, demand: &Demand<T>) -> Result<T> {
    if others.is_empty() {
        Ok(demand.price_cap())
    } else {
        clear_market_kinked(others, slope, demand)
    }
}

/// Own breakpoints at which the clearing price passes an opponent breakpoint,
/// together with `0`, `p0` and `p_hat`; sorted and deduplicated.
fn segment_knots<T: Scalar>(others: &[T], slope: T, demand: &Demand<T>, p0: T) -> Vec<T> {
    let mut knots = vec![T::zero(), p0, demand.price_cap()];
    for &x in others {
        if x >= p0 {
            continue;
        }
        // quantity the firm must sell for the market to clear exactly at x
        let residual = others
            .iter()
            .fold(demand.demand_at(x), |acc, &b| acc - slope * (x - b).positive_part());
        let knot = x - residual / slope;
        if knot > T::zero() && knot < p0 {
            knots.push(knot);
        }
    }
    knots.sort_by(|a, b| a.partial_cmp(b).expect("finite knots"));
    knots.dedup();
    knots
}

fn prefer<T: Scalar>(candidate: (T, T), incumbent: (T, T)) -> bool {
    candidate.1 > incumbent.1 || (candidate.1 == incumbent.1 && candidate.0 > incumbent.0)
}

/// Global maximizer of the restricted utility over the own breakpoint.
///
/// Ties go to the largest maximizing breakpoint.
pub fn best_response<T: Scalar>(
    other_breakpoints: &[T],
    slope: T,
    demand: &Demand<T>,
    firm: &Firm<T>,
) -> Result<BestResponseResult<T>> {
    check_slope(slope)?;
    demand.check_breakpoints(other_breakpoints)?;
    let cap = demand.price_cap();
    let utility = |x: T| restricted_utility(x, other_breakpoints, slope, demand, firm);

    let p0 = price_without_firm(other_breakpoints, slope, demand)?;
    let knots = segment_knots(other_breakpoints, slope, demand, p0);

    // staying out of the market
    let mut best = (cap, utility(cap)?);
    let mut diagnostics = Vec::new();
    let w = T::one() / (T::two() * slope) + firm.cost_coeff();

    for pair in knots.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b <= a || a >= p0 {
            continue;
        }
        let mid = (a + b) * T::half();
        let mut profile = vec![mid];
        profile.extend_from_slice(other_breakpoints);
        let price_mid = clear_market_kinked(&profile, slope, demand)?;
        let (active, active_sum) = other_breakpoints
            .iter()
            .filter(|&&x| x < price_mid)
            .fold((0usize, T::zero()), |(m, s), &x| (m + 1, s + x));

        // p*(x) = alpha + beta x and q(x) = K (p* - x) = qa + qb x on this piece
        let denom = demand.slope() + slope * T::lit((active + 1) as f64);
        let alpha = (demand.intercept() + slope * active_sum) / denom;
        let beta = slope / denom;
        let qa = slope * alpha;
        let qb = slope * (beta - T::one());
        // u(x) = p*(x) q(x) - w q(x)^2 = c2 x^2 + c1 x + c0, with c2 < 0
        let c2 = beta * qb - w * qb * qb;
        let c1 = alpha * qb + beta * qa - T::two() * w * qa * qb;
        let stationary = if c2 < T::zero() { -c1 / (T::two() * c2) } else { b };
        let x = stationary.max(a).min(b);
        let ux = utility(x)?;
        diagnostics.push(SegmentDiagnostic {
            active_opponents: active,
            interval: (a, b),
            optimum_breakpoint: x,
            optimum_utility: ux,
        });
        if prefer((x, ux), best) {
            best = (x, ux);
        }
    }

    Ok(BestResponseResult {
        best_breakpoint: best.0,
        best_utility: best.1,
        segment_diagnostics: diagnostics,
    })
}

/// Brute-force best response: uniform grid over `[0, p_hat]` plus the segment
/// knots, refined by golden-section search around the best grid point.
pub fn best_response_grid_oracle<T: Scalar>(
    other_breakpoints: &[T],
    slope: T,
    demand: &Demand<T>,
    firm: &Firm<T>,
    grid_points: usize,
) -> Result<BestResponseResult<T>> {
    if grid_points < 2 {
        return Err(Error::InvalidOption(format!(
            "grid oracle needs at least 2 points, got {grid_points}"
        )));
    }
    check_slope(slope)?;
    demand.check_breakpoints(other_breakpoints)?;
    let cap = demand.price_cap();
    let utility = |x: T| restricted_utility(x, other_breakpoints, slope, demand, firm);

    let p0 = price_without_firm(other_breakpoints, slope, demand)?;
    let step = cap / T::lit((grid_points - 1) as f64);
    let mut xs: Vec<T> = (0..grid_points).map(|k| (step * T::lit(k as f64)).min(cap)).collect();
    xs.extend(segment_knots(other_breakpoints, slope, demand, p0));
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    xs.dedup();

    let values = xs.iter().map(|&x| utility(x)).collect::<Result<Vec<_>>>()?;
    let mut k_best = 0;
    for k in 1..xs.len() {
        if prefer((xs[k], values[k]), (xs[k_best], values[k_best])) {
            k_best = k;
        }
    }
    let mut best = (xs[k_best], values[k_best]);

    let lo = xs[k_best.saturating_sub(1)];
    let hi = xs[(k_best + 1).min(xs.len() - 1)];
    if hi > lo {
        let xtol = T::lit(GOLDEN_RELATIVE_XTOL) * cap;
        let (x, ux) = golden_section_max(
            |x| utility(x).unwrap_or(T::neg_infinity()),
            lo,
            hi,
            GOLDEN_MAX_ITERATIONS,
            xtol,
        );
        if prefer((x, ux), best) {
            best = (x, ux);
        }
    }

    Ok(BestResponseResult {
        best_breakpoint: best.0,
        best_utility: best.1,
        segment_diagnostics: Vec::new(),
    })
}

/// Result of scanning the utility landscape for spurious local maxima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnimodalityAudit<T> {
    pub grid_points: usize,
    pub global_max: (T, T),
    /// Strict interior local maxima below the global maximum.
    pub spurious_maxima: Vec<(T, T)>,
}

impl<T> UnimodalityAudit<T> {
    pub fn is_unimodal(&self) -> bool {
        self.spurious_maxima.is_empty()
    }
}

/// Checks on a uniform grid that the restricted utility has no strict
/// interior local maximum besides the global one. Findings are logged, not
/// treated as errors.
pub fn audit_unimodality<T: Scalar>(
    other_breakpoints: &[T],
    slope: T,
    demand: &Demand<T>,
    firm: &Firm<T>,
    grid_points: usize,
) -> Result<UnimodalityAudit<T>> {
    if grid_points < 3 {
        return Err(Error::InvalidOption(format!(
            "audit needs at least 3 points, got {grid_points}"
        )));
    }
    check_slope(slope)?;
    demand.check_breakpoints(other_breakpoints)?;
    let cap = demand.price_cap();
    let step = cap / T::lit((grid_points - 1) as f64);
    let xs: Vec<T> = (0..grid_points).map(|k| (step * T::lit(k as f64)).min(cap)).collect();
    let us = xs
        .iter()
        .map(|&x| restricted_utility(x, other_breakpoints, slope, demand, firm))
        .collect::<Result<Vec<_>>>()?;

    let noise = T::lit(AUDIT_NOISE);
    let (k_max, _) = us
        .iter()
        .enumerate()
        .fold((0, T::neg_infinity()), |acc, (k, &u)| if u > acc.1 { (k, u) } else { acc });
    let global = us[k_max];
    let mut spurious = Vec::new();
    for k in 1..grid_points - 1 {
        if us[k] > us[k - 1] + noise && us[k] > us[k + 1] + noise && us[k] < global - noise {
            log::warn!(
                "firm {}: strict local maximum {} at breakpoint {} below global {}",
                firm.id,
                us[k],
                xs[k],
                global
            );
            spurious.push((xs[k], us[k]));
        }
    }
    Ok(UnimodalityAudit {
        grid_points,
        global_max: (xs[k_max], global),
        spurious_maxima: spurious,
    })
}

impl<T: Scalar> Scenario<T> {
    /// Best response of firm `index` against the other entries of `profile`.
    /// The firm's own entry is ignored.
    pub fn best_response(&self, index: usize, profile: &[T]) -> Result<BestResponseResult<T>> {
        let firm = self.firm(index)?;
        self.check_profile(profile)?;
        best_response(&others(profile, index), self.lipschitz, &self.demand, firm)
    }
}
