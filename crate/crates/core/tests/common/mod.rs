#![allow(dead_code)]

use pab_core::{Demand, KinkedOffer, Scenario, SupplyCurve};
use rand::Rng;

pub const FOUR_FIRM_COSTS: [f64; 4] = [0.25, 0.5, 1.0, 2.0];

pub fn four_firm_demand() -> Demand<f64> {
    Demand::new(100.0, 10.0).unwrap()
}

pub fn four_firm_scenario(k: f64) -> Scenario<f64> {
    Scenario::from_costs(four_firm_demand(), &FOUR_FIRM_COSTS, k).unwrap()
}

pub fn example1_scenario() -> Scenario<f64> {
    Scenario::from_costs(Demand::new(100.0, 1.0).unwrap(), &[0.5, 0.5], 1.0).unwrap()
}

pub fn random_demand<R: Rng>(rng: &mut R) -> Demand<f64> {
    Demand::new(rng.gen_range(1.0..200.0), rng.gen_range(0.2..20.0)).unwrap()
}

pub fn random_breakpoints<R: Rng>(rng: &mut R, n: usize, cap: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.0..=cap)).collect()
}

pub fn kinked_curves(breakpoints: &[f64], k: f64, cap: f64) -> Vec<SupplyCurve<f64>> {
    breakpoints
        .iter()
        .map(|&b| KinkedOffer { breakpoint: b, slope: k }.to_supply_curve(cap))
        .collect()
}

/// Random non-decreasing piecewise-linear curve on `[0, cap]`. With
/// `max_slope` set, every segment slope stays below it. The first segment
/// always rises.
pub fn random_curve<R: Rng>(rng: &mut R, cap: f64, max_slope: Option<f64>) -> SupplyCurve<f64> {
    let inner = rng.gen_range(1..7);
    let mut prices: Vec<f64> = (0..inner).map(|_| rng.gen_range(0.02 * cap..0.98 * cap)).collect();
    prices.sort_by(|a, b| a.partial_cmp(b).unwrap());
    prices.dedup_by(|a, b| (*a - *b).abs() < 1e-6 * cap);
    prices.insert(0, 0.0);
    prices.push(cap);

    let mut nodes = vec![(0.0, 0.0)];
    let mut q = 0.0;
    for (k, w) in prices.windows(2).enumerate() {
        let run = w[1] - w[0];
        let slope = match max_slope {
            Some(bound) => {
                if k > 0 && rng.gen_bool(0.25) {
                    0.0
                } else {
                    rng.gen_range(0.05..1.0) * bound
                }
            }
            None => {
                if k > 0 && rng.gen_bool(0.25) {
                    0.0
                } else {
                    rng.gen_range(0.1..20.0)
                }
            }
        };
        q += slope * run;
        nodes.push((w[1], q));
    }
    SupplyCurve::new(nodes).unwrap()
}
