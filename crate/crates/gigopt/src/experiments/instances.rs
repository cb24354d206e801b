//! Default instances behind the experiments.

use crate::error::Result;
use crate::market::{
    DepartureFunction, MarketInstance, RevenueFunction, RewardDistribution, RewardSet, WorkerType,
};
use crate::noisy::NoisyInstance;

pub const R_MIN: f64 = 15.0;
pub const R_MAX: f64 = 60.0;
/// Standard deviation of hourly earnings used for the lottery and normal baselines.
pub const EARNINGS_SIGMA: f64 = 11.2;

pub fn reward_grid() -> Result<RewardSet> {
    RewardSet::uniform(R_MIN, R_MAX, 1.0)
}

/// Convex, linear and concave departure curves of the three risk profiles.
pub fn risk_profiles() -> [DepartureFunction; 3] {
    [
        DepartureFunction::ExpFloor {
            alpha: 0.07,
            floor: R_MIN,
        },
        DepartureFunction::Linear {
            alpha: 1.0 / 45.0,
            beta: 4.0 / 3.0,
        },
        DepartureFunction::Quadratic {
            alpha: 1.0 / 2025.0,
            beta: 2.0 / 135.0,
            gamma: 8.0 / 9.0,
        },
    ]
}

/// Risk-profile types with the given arrival rates; zero rates are dropped.
pub fn risk_mix(lambdas: [f64; 3], revenue: RevenueFunction) -> Result<MarketInstance> {
    let types = risk_profiles()
        .into_iter()
        .zip(lambdas)
        .filter(|&(_, lambda)| lambda > 0.0)
        .map(|(departure, lambda)| WorkerType { lambda, departure })
        .collect();
    MarketInstance::new(reward_grid()?, types, revenue, true)
}

pub fn newsvendor_revenue() -> RevenueFunction {
    RevenueFunction::Newsvendor {
        alpha: 100.0,
        cap: 150.0,
    }
}

/// Three equally likely risk profiles with newsvendor revenue.
pub fn three_type_market() -> Result<MarketInstance> {
    risk_mix([10.0 / 3.0; 3], newsvendor_revenue())
}

/// One risk profile alone.
pub fn single_profile(profile: usize, lambda: f64, revenue: RevenueFunction) -> Result<MarketInstance> {
    let mut lambdas = [0.0; 3];
    lambdas[profile] = lambda;
    risk_mix(lambdas, revenue)
}

/// Two types on rewards `{0, r}`: a loyal minority and a majority that
/// always quits when unpaid and half the time when paid.
pub fn wage_slashing_market(lambda: f64, r: f64, alpha: f64) -> Result<MarketInstance> {
    let tab = |at_zero: f64, at_r: f64| DepartureFunction::Tabulated {
        points: vec![(0.0, at_zero), (r, at_r)],
    };
    MarketInstance::new(
        RewardSet::new(vec![0.0, r])?,
        vec![
            WorkerType {
                lambda: 0.1 * lambda,
                departure: tab(0.1, 0.0),
            },
            WorkerType {
                lambda,
                departure: tab(1.0, 0.5),
            },
        ],
        RevenueFunction::Linear { alpha },
        true,
    )
}

/// Pay `r` then pay nothing, repeated.
pub fn wage_slashing_cycle(r: f64) -> Vec<RewardDistribution> {
    vec![RewardDistribution::point(r), RewardDistribution::point(0.0)]
}

pub fn noisy_newsvendor(alpha: f64, demand: f64, lambda: f64, value: f64) -> Result<NoisyInstance> {
    NoisyInstance::new(
        vec![lambda],
        vec![value],
        RevenueFunction::Newsvendor { alpha, cap: demand },
        0.0,
        R_MAX,
    )
}

pub fn noisy_sqrt(c: f64, lambda: f64, value: f64) -> Result<NoisyInstance> {
    NoisyInstance::new(
        vec![lambda],
        vec![value],
        RevenueFunction::Power { c, beta: 0.5 },
        0.0,
        R_MAX,
    )
}

/// Three noisy types valued 25, 30 and 40.
pub fn noisy_three_types(alpha: f64, demand: f64) -> Result<NoisyInstance> {
    NoisyInstance::new(
        vec![10.0 / 3.0; 3],
        vec![25.0, 30.0, 40.0],
        RevenueFunction::Newsvendor { alpha, cap: demand },
        0.0,
        R_MAX,
    )
}

/// Evenly spaced grid `start, start + step, ...` of `n` points.
pub fn linspace_step(start: f64, step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| start + step * k as f64).collect()
}

/// `1, 2, 4, ...` up to and including `max`.
pub fn doubling(max: f64) -> Vec<f64> {
    std::iter::successors(Some(1.0), |t| Some(t * 2.0)).take_while(|&t| t <= max).collect()
}
