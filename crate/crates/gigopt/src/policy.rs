//! Time-varying policies: cyclic steady states, fairness audits, the
//! static policy built from a cyclic one, and the belief-based policy that
//! labels workers by their past behaviour.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fluid::{solve_fluid, FluidSolution};
use crate::market::{
    DepartureFunction, MarketInstance, RevenueFunction, RewardDistribution, RewardSet, WorkerType,
    MIN_DEPARTURE_FLOOR,
};

/// Explicit prefix followed by a cycle repeated forever.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    prefix: Vec<RewardDistribution>,
    cycle: Vec<RewardDistribution>,
}

impl Trajectory {
    pub fn new(prefix: Vec<RewardDistribution>, cycle: Vec<RewardDistribution>) -> Result<Self> {
        if cycle.is_empty() {
            return Err(Error::Config("trajectory needs a non-empty repeating tail".into()));
        }
        Ok(Self { prefix, cycle })
    }

    pub fn at(&self, t: usize) -> &RewardDistribution {
        if t < self.prefix.len() {
            &self.prefix[t]
        } else {
            &self.cycle[(t - self.prefix.len()) % self.cycle.len()]
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BeliefBasedParams {
    pub alpha: f64,
    pub v1: f64,
    pub v2: f64,
    pub demand: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Policy {
    Static(RewardDistribution),
    Cyclic(Vec<RewardDistribution>),
    Trajectory(Trajectory),
    BeliefBased(BeliefBasedParams),
}

impl Policy {
    pub fn cyclic(xs: Vec<RewardDistribution>) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::Config("cyclic policy needs at least one period".into()));
        }
        Ok(Self::Cyclic(xs))
    }

    /// Reward distribution offered to every worker in period `t`, for
    /// policies that do not discriminate between workers.
    pub fn distribution_at(&self, t: usize) -> Option<&RewardDistribution> {
        match self {
            Self::Static(x) => Some(x),
            Self::Cyclic(xs) => Some(&xs[t % xs.len()]),
            Self::Trajectory(tr) => Some(tr.at(t)),
            Self::BeliefBased(_) => None,
        }
    }

    pub fn period(&self) -> usize {
        match self {
            Self::Cyclic(xs) => xs.len(),
            Self::Trajectory(tr) => tr.cycle.len(),
            _ => 1,
        }
    }

    pub fn transient(&self) -> usize {
        match self {
            Self::Trajectory(tr) => tr.prefix.len(),
            _ => 0,
        }
    }
}

/// Deterministic supply path of a policy.
#[derive(Clone, Debug, PartialEq)]
pub struct FluidPath {
    /// `supply_by_type[t][i]`
    pub supply_by_type: Vec<Vec<f64>>,
    pub supply: Vec<f64>,
    pub profit: Vec<f64>,
    /// `paid[t][i]`: rewards received by the active type-`i` workers in period `t`.
    pub paid: Vec<Vec<RewardDistribution>>,
    pub long_run_profit: f64,
}

/// Average over the largest whole number of periods fitting in the second
/// half of the horizon.
fn trailing_average(values: &[f64], period: usize) -> f64 {
    let period = period.max(1);
    let window = ((values.len() / 2) / period).max(1) * period;
    let window = window.min(values.len());
    let tail = &values[values.len() - window..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Runs the fluid recursion `N(t+1) = N(t) (1 - l(x(t))) + lambda` for
/// `horizon` periods from the active masses `n0`. For belief-based policies
/// `n0[0]` is the labelled type-1 mass carried into period 0.
pub fn fluid_trajectory(
    inst: &MarketInstance,
    policy: &Policy,
    horizon: usize,
    n0: &[f64],
) -> Result<FluidPath> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be positive".into()));
    }
    if let Policy::BeliefBased(p) = policy {
        return belief_trajectory(inst, p, horizon, n0.first().copied().unwrap_or(0.0));
    }
    let k = inst.num_types();
    if n0.len() != k {
        return Err(Error::Config(format!("{} initial masses for {k} types", n0.len())));
    }
    let lambdas = inst.lambdas();
    let mut n = n0.to_vec();
    let mut path = FluidPath {
        supply_by_type: Vec::with_capacity(horizon),
        supply: Vec::with_capacity(horizon),
        profit: Vec::with_capacity(horizon),
        paid: Vec::with_capacity(horizon),
        long_run_profit: 0.0,
    };
    for t in 0..horizon {
        let x = policy.distribution_at(t).expect("non-discriminating policy");
        let l = inst.expected_departures(x)?;
        let total: f64 = n.iter().sum();
        path.profit.push(inst.profit_at(total, x.mean()));
        path.supply.push(total);
        path.supply_by_type.push(n.clone());
        path.paid.push(vec![x.clone(); k]);
        for i in 0..k {
            n[i] = n[i] * (1.0 - l[i]) + lambdas[i];
        }
    }
    path.long_run_profit = trailing_average(&path.profit, policy.period());
    Ok(path)
}

fn belief_trajectory(
    inst: &MarketInstance,
    p: &BeliefBasedParams,
    horizon: usize,
    labelled0: f64,
) -> Result<FluidPath> {
    if inst.num_types() != 2 {
        return Err(Error::Config("belief-based policies need exactly two types".into()));
    }
    let (l1, l2) = (inst.types()[0].lambda, inst.types()[1].lambda);
    let fresh = l1 + l2;
    let target = p.demand - fresh;
    let mut labelled = labelled0;
    let mut filled = false;
    let mut path = FluidPath {
        supply_by_type: Vec::with_capacity(horizon),
        supply: Vec::with_capacity(horizon),
        profit: Vec::with_capacity(horizon),
        paid: Vec::with_capacity(horizon),
        long_run_profit: 0.0,
    };
    for _ in 0..horizon {
        let total = labelled + fresh;
        filled = filled || total >= p.demand * (1.0 - 1e-12);
        let (n1, n2) = (labelled + l1, l2);
        if filled {
            let paid = labelled.min(target.max(0.0));
            path.profit.push(inst.revenue().value(total) - p.v1 * paid);
            path.paid.push(vec![
                RewardDistribution::two_point(0.0, p.v1, paid / n1)?,
                RewardDistribution::point(0.0),
            ]);
            labelled = paid;
        } else {
            path.profit.push(inst.revenue().value(total) - p.v1 * total);
            path.paid
                .push(vec![RewardDistribution::point(p.v1), RewardDistribution::point(p.v1)]);
            labelled += l1;
        }
        path.supply_by_type.push(vec![n1, n2]);
        path.supply.push(total);
    }
    path.long_run_profit = trailing_average(&path.profit, 1);
    Ok(path)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CyclicSteadyState {
    /// `supply_by_type[t][i]` for cycle positions `t = 0..tau`.
    pub supply_by_type: Vec<Vec<f64>>,
    pub supply: Vec<f64>,
    pub profit: Vec<f64>,
    pub average_profit: f64,
}

/// Periodic fixed point of the fluid recursion under the cycle `xs`.
pub fn cyclic_steady_state(
    inst: &MarketInstance,
    xs: &[RewardDistribution],
) -> Result<CyclicSteadyState> {
    let tau = xs.len();
    if tau == 0 {
        return Err(Error::Config("empty cycle".into()));
    }
    let k = inst.num_types();
    let stay: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| Ok(inst.expected_departures(x)?.into_iter().map(|l| 1.0 - l).collect()))
        .collect::<Result<_>>()?;
    let mut by_type = vec![vec![0.0; k]; tau];
    for i in 0..k {
        let cycle_stay: f64 = stay.iter().map(|z| z[i]).product();
        if 1.0 - cycle_stay < MIN_DEPARTURE_FLOOR {
            return Err(Error::NonMixing { type_index: i });
        }
        let lambda = inst.types()[i].lambda;
        for (t, row) in by_type.iter_mut().enumerate() {
            let mut sum = 1.0;
            let mut prod = 1.0;
            for back in 1..tau {
                prod *= stay[(t + tau - back) % tau][i];
                sum += prod;
            }
            row[i] = lambda * sum / (1.0 - cycle_stay);
        }
    }
    let supply: Vec<f64> = by_type.iter().map(|r| r.iter().sum()).collect();
    let profit: Vec<f64> = supply
        .iter()
        .zip(xs)
        .map(|(&n, x)| inst.profit_at(n, x.mean()))
        .collect();
    let average_profit = profit.iter().sum::<f64>() / tau as f64;
    Ok(CyclicSteadyState {
        supply_by_type: by_type,
        supply,
        profit,
        average_profit,
    })
}

pub fn cyclic_profit(inst: &MarketInstance, xs: &[RewardDistribution]) -> Result<f64> {
    Ok(cyclic_steady_state(inst, xs)?.average_profit)
}

/// Rewards received by type `i` over one cycle at steady state, weighted by
/// the type's active mass in each period.
pub fn experienced_distribution(
    inst: &MarketInstance,
    xs: &[RewardDistribution],
    i: usize,
) -> Result<RewardDistribution> {
    if i >= inst.num_types() {
        return Err(Error::Config(format!("no type {i}")));
    }
    let ss = cyclic_steady_state(inst, xs)?;
    let parts: Vec<(f64, &RewardDistribution)> =
        ss.supply_by_type.iter().map(|r| r[i]).zip(xs).collect();
    RewardDistribution::mixture(&parts)
}

fn max_pairwise_gap(dists: &[RewardDistribution]) -> (f64, Vec<Vec<f64>>) {
    let k = dists.len();
    let mut m = vec![vec![0.0; k]; k];
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            let d = dists[i].l1_distance(&dists[j]);
            m[i][j] = d;
            m[j][i] = d;
            worst = worst.max(d);
        }
    }
    (worst, m)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FairnessReport {
    pub tau: usize,
    pub delta: f64,
    pub max_gap: f64,
    /// Largest gap between each pair of types over all windows.
    pub gap_matrix: Vec<Vec<f64>>,
    pub worst_window_start: usize,
    pub fair: bool,
}

/// Checks that, over every window of `tau` consecutive periods, the reward
/// distributions experienced by any two types are within `delta` in L1.
pub fn fairness_audit(
    inst: &MarketInstance,
    policy: &Policy,
    tau: usize,
    horizon: usize,
    n0: &[f64],
    delta: f64,
) -> Result<FairnessReport> {
    if tau == 0 || tau > horizon {
        return Err(Error::Config(format!("window {tau} does not fit horizon {horizon}")));
    }
    let path = fluid_trajectory(inst, policy, horizon, n0)?;
    let k = inst.num_types();
    let mut matrix = vec![vec![0.0; k]; k];
    let mut max_gap: f64 = 0.0;
    let mut worst = 0;
    for start in 0..=horizon - tau {
        let dists = (0..k)
            .map(|i| {
                let parts: Vec<(f64, &RewardDistribution)> = (start..start + tau)
                    .map(|t| (path.supply_by_type[t][i], &path.paid[t][i]))
                    .collect();
                RewardDistribution::mixture(&parts)
            })
            .collect::<Result<Vec<_>>>()?;
        let (gap, m) = max_pairwise_gap(&dists);
        for i in 0..k {
            for j in 0..k {
                matrix[i][j] = f64::max(matrix[i][j], m[i][j]);
            }
        }
        if gap > max_gap {
            max_gap = gap;
            worst = start;
        }
    }
    Ok(FairnessReport {
        tau,
        delta,
        max_gap,
        gap_matrix: matrix,
        worst_window_start: worst,
        fair: max_gap <= delta,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StaticFromCyclic {
    pub distribution: RewardDistribution,
    pub static_profit: f64,
    pub cyclic_profit: f64,
    /// Largest L1 gap between experienced distributions of any two types.
    pub fairness_gap: f64,
    /// Estimated constant of the profit-loss bound `C0 * fairness_gap`.
    pub c0_estimate: f64,
    pub bound_holds: bool,
}

/// The stationary policy that pays, each period, the distribution that type
/// `anchor` experiences over one cycle.
pub fn static_from_cyclic(
    inst: &MarketInstance,
    xs: &[RewardDistribution],
    anchor: usize,
) -> Result<StaticFromCyclic> {
    let k = inst.num_types();
    let experienced = (0..k)
        .map(|i| experienced_distribution(inst, xs, i))
        .collect::<Result<Vec<_>>>()?;
    let distribution = experienced
        .get(anchor)
        .cloned()
        .ok_or_else(|| Error::Config(format!("no type {anchor}")))?;
    let ss = cyclic_steady_state(inst, xs)?;
    let static_eval = inst.evaluate(&distribution)?;
    let (gap, _) = max_pairwise_gap(&experienced);

    let r_max = inst.rewards().max();
    let n_max = ss.supply.iter().copied().fold(static_eval.supply, f64::max);
    let c_r = inst.revenue().derivative(inst.total_arrival());
    let mut lip: f64 = 0.0;
    for j in 0..k {
        let lo = experienced
            .iter()
            .map(|x| inst.expected_departure(j, x))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        lip = lip.max(inst.types()[j].lambda / (lo * lo));
    }
    let kf = k as f64;
    let c0 = r_max * n_max * kf + c_r * lip * kf + r_max * lip * kf;
    Ok(StaticFromCyclic {
        static_profit: static_eval.profit,
        cyclic_profit: ss.average_profit,
        fairness_gap: gap,
        c0_estimate: c0,
        bound_holds: static_eval.profit >= ss.average_profit - c0 * gap - 1e-9,
        distribution,
    })
}

/// Two-type instance on which labelling workers beats every static policy:
/// type 1 stays for any positive reward, type 2 only for `v2`.
pub fn belief_instance(
    alpha: f64,
    v1: f64,
    v2: f64,
    lambda1: f64,
    lambda2: f64,
    demand: f64,
) -> Result<MarketInstance> {
    let (rewards, l1, l2) = if v1 == v2 {
        (vec![0.0, v1], vec![1.0, 0.0], vec![1.0, 0.0])
    } else {
        (vec![0.0, v1, v2], vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0])
    };
    let tab = |vals: Vec<f64>| DepartureFunction::Tabulated {
        points: rewards.iter().copied().zip(vals).collect(),
    };
    MarketInstance::new(
        RewardSet::new(rewards.clone())?,
        vec![
            WorkerType {
                lambda: lambda1,
                departure: tab(l1),
            },
            WorkerType {
                lambda: lambda2,
                departure: tab(l2),
            },
        ],
        RevenueFunction::Newsvendor { alpha, cap: demand },
        true,
    )
}

#[derive(Clone, Debug)]
pub struct BeliefBasedReport {
    pub instance: MarketInstance,
    pub policy: Policy,
    pub path: FluidPath,
    pub profit: f64,
    pub best_static: FluidSolution,
    pub gap: f64,
}

pub const BELIEF_HORIZON: usize = 64;

pub fn belief_based_policy(
    alpha: f64,
    v1: f64,
    v2: f64,
    lambda1: f64,
    lambda2: f64,
    demand: f64,
) -> Result<BeliefBasedReport> {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
    if !(demand > 0.0) || !(v1 > 0.0) || !(v2 >= v1) {
        return Err(Error::PreconditionViolated(format!(
            "need D > 0 and 0 < v1 <= v2, got D = {demand}, v1 = {v1}, v2 = {v2}"
        )));
    }
    if !(alpha > 2.0 * v2) {
        return Err(Error::PreconditionViolated(format!(
            "need alpha > 2 v2, got alpha = {alpha}, v2 = {v2}"
        )));
    }
    if !close(lambda1, demand / 4.0) || !close(lambda2, demand / 2.0) {
        return Err(Error::PreconditionViolated(format!(
            "need lambda1 = D/4 and lambda2 = D/2, got {lambda1} and {lambda2}"
        )));
    }
    let instance = belief_instance(alpha, v1, v2, lambda1, lambda2, demand)?;
    let policy = Policy::BeliefBased(BeliefBasedParams {
        alpha,
        v1,
        v2,
        demand,
    });
    let path = fluid_trajectory(&instance, &policy, BELIEF_HORIZON, &[0.0, 0.0])?;
    let best_static = solve_fluid(&instance, 1e-14)?;
    let profit = path.long_run_profit;
    Ok(BeliefBasedReport {
        gap: profit - best_static.profit,
        profit,
        best_static,
        path,
        policy,
        instance,
    })
}
