//! Market primitives: reward grids, departure functions, revenue curves,
//! reward distributions and the fluid supply/profit they induce.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Expected departure probabilities below this value are treated as zero.
pub const MIN_DEPARTURE_FLOOR: f64 = 1e-12;

const GRID_MATCH_TOL: f64 = 1e-9;
const MONOTONE_SCAN_POINTS: usize = 1000;

fn same_reward(a: f64, b: f64) -> bool {
    (a - b).abs() <= GRID_MATCH_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Finite, strictly increasing set of rewards.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RewardSet(Vec<f64>);

impl RewardSet {
    pub fn new(rewards: Vec<f64>) -> Result<Self> {
        if rewards.is_empty() {
            return Err(Error::InvalidInstance("reward set is empty".into()));
        }
        if rewards.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::InvalidInstance(
                "rewards must be finite and non-negative".into(),
            ));
        }
        if rewards.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInstance(
                "rewards must be strictly increasing".into(),
            ));
        }
        Ok(Self(rewards))
    }

    /// `min, min + step, ..., max`, with `max` included.
    pub fn uniform(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(max >= min) {
            return Err(Error::InvalidInstance(format!(
                "bad reward range {min}..{max} step {step}"
            )));
        }
        let n = ((max - min) / step).round() as usize;
        let mut v: Vec<f64> = (0..=n).map(|k| min + k as f64 * step).collect();
        if let Some(last) = v.last_mut() {
            *last = max;
        }
        Self::new(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0[0]
    }

    pub fn max(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn index_of(&self, r: f64) -> Option<usize> {
        let pos = self.0.partition_point(|&x| x < r);
        [pos.checked_sub(1), Some(pos)]
            .into_iter()
            .flatten()
            .find(|&k| k < self.0.len() && same_reward(self.0[k], r))
    }
}

/// Per-period probability that a worker paid `r` leaves the platform.
#[derive(Clone, Debug, PartialEq)]
pub enum DepartureFunction {
    /// `min{1, exp(alpha (floor - r))}`
    ExpFloor { alpha: f64, floor: f64 },
    /// `-alpha r + beta`, clipped to `[0, 1]`
    Linear { alpha: f64, beta: f64 },
    /// `-alpha r^2 + beta r + gamma`, clipped to `[0, 1]`
    Quadratic { alpha: f64, beta: f64, gamma: f64 },
    /// Outside option uniform on `[value - eps, value + eps]`.
    EpsNoisy { value: f64, eps: f64 },
    /// Values given only at the listed rewards.
    Tabulated { points: Vec<(f64, f64)> },
}

impl DepartureFunction {
    pub fn eval(&self, r: f64) -> Result<f64> {
        let raw = match *self {
            Self::ExpFloor { alpha, floor } => (alpha * (floor - r)).exp().min(1.0),
            Self::Linear { alpha, beta } => -alpha * r + beta,
            Self::Quadratic { alpha, beta, gamma } => -alpha * r * r + beta * r + gamma,
            Self::EpsNoisy { value, eps } => {
                if r < value - eps {
                    1.0
                } else if r > value + eps {
                    0.0
                } else if eps == 0.0 {
                    0.5
                } else {
                    0.5 - (r - value) / (2.0 * eps)
                }
            }
            Self::Tabulated { ref points } => points
                .iter()
                .find(|(x, _)| same_reward(*x, r))
                .map(|&(_, l)| l)
                .ok_or(Error::OffGridReward { reward: r })?,
        };
        Ok(raw.clamp(0.0, 1.0))
    }

    pub fn is_tabulated(&self) -> bool {
        matches!(self, Self::Tabulated { .. })
    }
}

/// Platform revenue as a function of the (scaled) number of active workers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RevenueFunction {
    /// `alpha * min{N, cap}`
    Newsvendor { alpha: f64, cap: f64 },
    /// `c * N^beta`
    Power { c: f64, beta: f64 },
    /// `c * ln(1 + N)`
    Log { c: f64 },
    /// `alpha * N`
    Linear { alpha: f64 },
}

impl RevenueFunction {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Newsvendor { alpha, cap } => alpha >= 0.0 && cap > 0.0,
            Self::Power { c, beta } => c > 0.0 && beta > 0.0 && beta <= 1.0,
            Self::Log { c } => c > 0.0,
            Self::Linear { alpha } => alpha >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInstance(format!(
                "revenue {self:?} is not concave and non-decreasing"
            )))
        }
    }

    pub fn value(&self, n: f64) -> f64 {
        match *self {
            Self::Newsvendor { alpha, cap } => alpha * n.min(cap),
            Self::Power { c, beta } => c * n.max(0.0).powf(beta),
            Self::Log { c } => c * n.max(0.0).ln_1p(),
            Self::Linear { alpha } => alpha * n,
        }
    }

    /// Left derivative at kinks.
    pub fn derivative(&self, n: f64) -> f64 {
        match *self {
            Self::Newsvendor { alpha, cap } => {
                if n <= cap {
                    alpha
                } else {
                    0.0
                }
            }
            Self::Power { c, beta } => c * beta * n.powf(beta - 1.0),
            Self::Log { c } => c / (1.0 + n),
            Self::Linear { alpha } => alpha,
        }
    }

    pub fn second_derivative(&self, n: f64) -> f64 {
        match *self {
            Self::Newsvendor { .. } | Self::Linear { .. } => 0.0,
            Self::Power { c, beta } => c * beta * (beta - 1.0) * n.powf(beta - 2.0),
            Self::Log { c } => -c / ((1.0 + n) * (1.0 + n)),
        }
    }

    pub fn is_smooth_strictly_concave(&self) -> bool {
        match *self {
            Self::Power { beta, .. } => beta < 1.0,
            Self::Log { .. } => true,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkerType {
    pub lambda: f64,
    pub departure: DepartureFunction,
}

/// Probability distribution over rewards, stored as sorted atoms with
/// strictly positive mass.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardDistribution {
    atoms: Vec<(f64, f64)>,
}

impl RewardDistribution {
    pub fn point(r: f64) -> Self {
        Self {
            atoms: vec![(r, 1.0)],
        }
    }

    pub fn from_atoms(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut atoms: Vec<(f64, f64)> = atoms.into_iter().collect();
        if atoms
            .iter()
            .any(|&(r, p)| !r.is_finite() || !p.is_finite() || p < 0.0)
        {
            return Err(Error::Config("distribution has invalid atoms".into()));
        }
        atoms.retain(|&(_, p)| p > 0.0);
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (r, p) in atoms {
            match merged.last_mut() {
                Some(last) if same_reward(last.0, r) => last.1 += p,
                _ => merged.push((r, p)),
            }
        }
        let total: f64 = merged.iter().map(|a| a.1).sum();
        if merged.is_empty() || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "distribution mass sums to {total}, expected 1"
            )));
        }
        for a in &mut merged {
            a.1 /= total;
        }
        Ok(Self { atoms: merged })
    }

    pub fn from_weights(rewards: &RewardSet, weights: &[f64]) -> Result<Self> {
        if weights.len() != rewards.len() {
            return Err(Error::Config(format!(
                "{} weights for {} rewards",
                weights.len(),
                rewards.len()
            )));
        }
        Self::from_atoms(rewards.as_slice().iter().copied().zip(weights.iter().copied()))
    }

    /// Mass `1 - p_high` on `low` and `p_high` on `high`.
    pub fn two_point(low: f64, high: f64, p_high: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_high) {
            return Err(Error::Config(format!("mixing weight {p_high} outside [0, 1]")));
        }
        Self::from_atoms([(low, 1.0 - p_high), (high, p_high)])
    }

    /// Normal law with mean `mu` and standard deviation `sigma`, binned onto
    /// the grid by nearest reward; the outer cells absorb both tails.
    pub fn discretized_normal(rewards: &RewardSet, mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidMoments(format!("mu = {mu}, sigma = {sigma}")));
        }
        let grid = rewards.as_slice();
        if sigma == 0.0 || grid.len() == 1 {
            let k = grid
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - mu).abs().total_cmp(&(b.1 - mu).abs()))
                .map(|(k, _)| k)
                .unwrap_or(0);
            return Ok(Self::point(grid[k]));
        }
        let normal = Normal::new(mu, sigma)
            .map_err(|e| Error::InvalidMoments(e.to_string()))?;
        let mut prev = 0.0;
        let mut atoms = Vec::with_capacity(grid.len());
        for (k, &r) in grid.iter().enumerate() {
            let upper = if k + 1 == grid.len() {
                1.0
            } else {
                normal.cdf(0.5 * (r + grid[k + 1]))
            };
            atoms.push((r, (upper - prev).max(0.0)));
            prev = upper;
        }
        Self::from_atoms(atoms)
    }

    /// Convex combination of distributions with non-negative weights.
    pub fn mixture(parts: &[(f64, &RewardDistribution)]) -> Result<Self> {
        let total: f64 = parts.iter().map(|p| p.0).sum();
        if parts.is_empty() || !(total > 0.0) {
            return Err(Error::Config("mixture needs positive total weight".into()));
        }
        if parts.iter().all(|p| p.1 == parts[0].1) {
            return Ok(parts[0].1.clone());
        }
        Self::from_atoms(
            parts
                .iter()
                .flat_map(|&(w, d)| d.atoms.iter().map(move |&(r, p)| (r, w * p / total))),
        )
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn support(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.0).collect()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(r, p)| r * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.atoms.iter().map(|(r, p)| p * (r - m) * (r - m)).sum()
    }

    pub fn weights_on(&self, rewards: &RewardSet) -> Result<Vec<f64>> {
        let mut w = vec![0.0; rewards.len()];
        for &(r, p) in &self.atoms {
            let k = rewards.index_of(r).ok_or(Error::OffGridReward { reward: r })?;
            w[k] += p;
        }
        Ok(w)
    }

    pub fn l1_distance(&self, other: &Self) -> f64 {
        let (mut i, mut j, mut d) = (0, 0, 0.0);
        let (a, b) = (&self.atoms, &other.atoms);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i].0 < b[j].0 && !same_reward(a[i].0, b[j].0)) {
                d += a[i].1;
                i += 1;
            } else if i == a.len() || (!same_reward(a[i].0, b[j].0) && b[j].0 < a[i].0) {
                d += b[j].1;
                j += 1;
            } else {
                d += (a[i].1 - b[j].1).abs();
                i += 1;
                j += 1;
            }
        }
        d
    }
}

/// Fluid quantities of a stationary policy.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FluidEval {
    pub supply_by_type: Vec<f64>,
    pub supply: f64,
    pub expected_reward: f64,
    pub profit: f64,
}

#[derive(Clone, Debug)]
pub struct MarketInstance {
    rewards: RewardSet,
    types: Vec<WorkerType>,
    revenue: RevenueFunction,
    allow_vanishing_departure: bool,
    table: Vec<Vec<f64>>,
}

impl MarketInstance {
    pub fn new(
        rewards: RewardSet,
        types: Vec<WorkerType>,
        revenue: RevenueFunction,
        allow_vanishing_departure: bool,
    ) -> Result<Self> {
        if types.is_empty() {
            return Err(Error::InvalidInstance("no worker types".into()));
        }
        revenue.validate()?;
        let mut table = Vec::with_capacity(types.len());
        for (i, t) in types.iter().enumerate() {
            if !(t.lambda > 0.0) || !t.lambda.is_finite() {
                return Err(Error::InvalidInstance(format!(
                    "type {i}: arrival rate {} must be positive",
                    t.lambda
                )));
            }
            let row = rewards
                .as_slice()
                .iter()
                .map(|&r| t.departure.eval(r))
                .collect::<Result<Vec<_>>>()?;
            check_monotone(i, &t.departure, &rewards, &row)?;
            if !allow_vanishing_departure && row[row.len() - 1] <= 0.0 {
                return Err(Error::InvalidInstance(format!(
                    "type {i}: departure probability vanishes at the largest reward"
                )));
            }
            table.push(row);
        }
        Ok(Self {
            rewards,
            types,
            revenue,
            allow_vanishing_departure,
            table,
        })
    }

    pub fn rewards(&self) -> &RewardSet {
        &self.rewards
    }

    pub fn types(&self) -> &[WorkerType] {
        &self.types
    }

    pub fn revenue(&self) -> &RevenueFunction {
        &self.revenue
    }

    pub fn allows_vanishing_departure(&self) -> bool {
        self.allow_vanishing_departure
    }

    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.types.iter().map(|t| t.lambda).collect()
    }

    pub fn total_arrival(&self) -> f64 {
        self.types.iter().map(|t| t.lambda).sum()
    }

    /// `table()[i][j]` is the departure probability of type `i` at grid reward `j`.
    pub fn table(&self) -> &[Vec<f64>] {
        &self.table
    }

    pub fn has_tabulated(&self) -> bool {
        self.types.iter().any(|t| t.departure.is_tabulated())
    }

    pub fn with_revenue(&self, revenue: RevenueFunction) -> Result<Self> {
        Self::new(
            self.rewards.clone(),
            self.types.clone(),
            revenue,
            self.allow_vanishing_departure,
        )
    }

    pub fn departure(&self, i: usize, r: f64) -> Result<f64> {
        match self.rewards.index_of(r) {
            Some(k) => Ok(self.table[i][k]),
            None => self.types[i].departure.eval(r),
        }
    }

    pub fn expected_departure(&self, i: usize, x: &RewardDistribution) -> Result<f64> {
        x.atoms()
            .iter()
            .map(|&(r, p)| Ok(p * self.departure(i, r)?))
            .sum()
    }

    pub fn expected_departures(&self, x: &RewardDistribution) -> Result<Vec<f64>> {
        (0..self.num_types())
            .map(|i| self.expected_departure(i, x))
            .collect()
    }

    pub fn fluid_supply(&self, x: &RewardDistribution) -> Result<Vec<f64>> {
        self.expected_departures(x)?
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                if l < MIN_DEPARTURE_FLOOR {
                    Err(Error::DegenerateSupply {
                        type_index: i,
                        departure: l,
                    })
                } else {
                    Ok(self.types[i].lambda / l)
                }
            })
            .collect()
    }

    pub fn profit_at(&self, supply: f64, expected_reward: f64) -> f64 {
        self.revenue.value(supply) - expected_reward * supply
    }

    pub fn evaluate(&self, x: &RewardDistribution) -> Result<FluidEval> {
        let supply_by_type = self.fluid_supply(x)?;
        let supply = supply_by_type.iter().sum();
        let expected_reward = x.mean();
        Ok(FluidEval {
            profit: self.profit_at(supply, expected_reward),
            supply_by_type,
            supply,
            expected_reward,
        })
    }

    pub fn fluid_profit(&self, x: &RewardDistribution) -> Result<f64> {
        Ok(self.evaluate(x)?.profit)
    }
}

fn check_monotone(
    i: usize,
    f: &DepartureFunction,
    rewards: &RewardSet,
    grid_values: &[f64],
) -> Result<()> {
    let values: Vec<f64> = if f.is_tabulated() || rewards.len() == 1 {
        grid_values.to_vec()
    } else {
        let (lo, hi) = (rewards.min(), rewards.max());
        (0..MONOTONE_SCAN_POINTS)
            .map(|k| f.eval(lo + (hi - lo) * k as f64 / (MONOTONE_SCAN_POINTS - 1) as f64))
            .collect::<Result<_>>()?
    };
    if values.windows(2).any(|w| w[1] > w[0] + 1e-12) {
        return Err(Error::InvalidInstance(format!(
            "type {i}: departure function is not non-increasing"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn single(departure: DepartureFunction, rewards: Vec<f64>) -> MarketInstance {
        MarketInstance::new(
            RewardSet::new(rewards).unwrap(),
            vec![WorkerType {
                lambda: 10.0,
                departure,
            }],
            RevenueFunction::Newsvendor {
                alpha: 100.0,
                cap: 150.0,
            },
            false,
        )
        .unwrap()
    }

    #[test]
    fn uniform_grid_includes_endpoints() {
        let g = RewardSet::uniform(15.0, 60.0, 1.0).unwrap();
        assert_eq!(g.len(), 46);
        assert_eq!(g.max(), 60.0);
        assert_eq!(g.index_of(37.0), Some(22));
        assert_eq!(g.index_of(37.5), None);
    }

    #[test]
    fn rejects_unsorted_rewards() {
        assert!(RewardSet::new(vec![1.0, 1.0]).is_err());
        assert!(RewardSet::new(vec![]).is_err());
    }

    #[test]
    fn point_mass_supply() {
        let inst = single(DepartureFunction::Linear { alpha: 0.01, beta: 0.6 }, vec![10.0, 20.0]);
        let s = inst.fluid_supply(&RewardDistribution::point(10.0)).unwrap();
        assert_relative_eq!(s[0], 20.0, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_supply_is_an_error() {
        let inst = MarketInstance::new(
            RewardSet::new(vec![0.0, 1.0]).unwrap(),
            vec![WorkerType {
                lambda: 1.0,
                departure: DepartureFunction::Tabulated {
                    points: vec![(0.0, 1.0), (1.0, 0.0)],
                },
            }],
            RevenueFunction::Linear { alpha: 1.0 },
            true,
        )
        .unwrap();
        let err = inst.fluid_supply(&RewardDistribution::point(1.0)).unwrap_err();
        assert!(matches!(err, Error::DegenerateSupply { type_index: 0, .. }));
    }

    #[test]
    fn vanishing_departure_needs_flag() {
        let rewards = RewardSet::new(vec![15.0, 60.0]).unwrap();
        let t = WorkerType {
            lambda: 1.0,
            departure: DepartureFunction::Linear {
                alpha: 1.0 / 45.0,
                beta: 4.0 / 3.0,
            },
        };
        let rev = RevenueFunction::Linear { alpha: 1.0 };
        assert!(MarketInstance::new(rewards.clone(), vec![t.clone()], rev, false).is_err());
        assert!(MarketInstance::new(rewards, vec![t], rev, true).is_ok());
    }

    #[test]
    fn increasing_departure_rejected() {
        let r = MarketInstance::new(
            RewardSet::new(vec![0.0, 1.0]).unwrap(),
            vec![WorkerType {
                lambda: 1.0,
                departure: DepartureFunction::Linear { alpha: -0.1, beta: 0.5 },
            }],
            RevenueFunction::Linear { alpha: 1.0 },
            false,
        );
        assert!(r.is_err());
    }

    #[test]
    fn eps_noisy_shape() {
        let f = DepartureFunction::EpsNoisy { value: 25.0, eps: 5.0 };
        assert_eq!(f.eval(19.0).unwrap(), 1.0);
        assert_eq!(f.eval(25.0).unwrap(), 0.5);
        assert_eq!(f.eval(30.0).unwrap(), 0.0);
        assert_relative_eq!(f.eval(27.5).unwrap(), 0.25);
    }

    #[test]
    fn tabulated_off_grid_fails() {
        let f = DepartureFunction::Tabulated {
            points: vec![(1.0, 0.5)],
        };
        assert!(matches!(f.eval(2.0), Err(Error::OffGridReward { .. })));
    }

    #[test]
    fn discretized_normal_keeps_mass() {
        let g = RewardSet::uniform(15.0, 60.0, 1.0).unwrap();
        let d = RewardDistribution::discretized_normal(&g, 20.0, 8.0).unwrap();
        let total: f64 = d.atoms().iter().map(|a| a.1).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
        assert!(d.mean() > 20.0);
        let narrow = RewardDistribution::discretized_normal(&g, 37.0, 1e-3).unwrap();
        assert_relative_eq!(narrow.mean(), 37.0, epsilon = 1e-9);
    }

    #[test]
    fn l1_distance_handles_disjoint_support() {
        let a = RewardDistribution::point(1.0);
        let b = RewardDistribution::two_point(1.0, 2.0, 0.25).unwrap();
        assert_relative_eq!(a.l1_distance(&b), 0.5);
        assert_relative_eq!(b.l1_distance(&a), 0.5);
        assert_eq!(a.l1_distance(&RewardDistribution::point(3.0)), 2.0);
    }

    #[test]
    fn mixture_of_identical_is_exact() {
        let x = RewardDistribution::two_point(0.3, 0.7, 0.37).unwrap();
        let m = RewardDistribution::mixture(&[(0.3, &x), (1.7, &x)]).unwrap();
        assert_eq!(m, x);
    }

    #[test]
    fn revenue_derivatives() {
        let p = RevenueFunction::Power { c: 250.0, beta: 0.5 };
        assert_relative_eq!(p.derivative(25.0), 25.0);
        assert_relative_eq!(p.second_derivative(25.0), -0.5, epsilon = 1e-12);
        let nv = RevenueFunction::Newsvendor { alpha: 3.0, cap: 10.0 };
        assert_eq!(nv.value(12.0), 30.0);
        assert_eq!(nv.derivative(11.0), 0.0);
    }
}
