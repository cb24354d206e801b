//! Optimal stationary policies of the fluid relaxation.
//!
//! An optimal policy never needs more than two rewards, so the solver
//! enumerates every singleton and every pair of grid rewards and optimizes
//! the mixing weight of each pair by one-dimensional search.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{MarketInstance, RewardDistribution, RewardSet, MIN_DEPARTURE_FLOOR};
use crate::par::{self, Execution};
use crate::scalar::{bisect, grid_golden_max};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const PAIR_GRID_POINTS: usize = 1025;
pub const MAX_ORACLE_REWARDS: usize = 5;
pub const MAX_ORACLE_RESOLUTION: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Dispersion {
    Minimal,
    Maximal,
    Neither,
}

/// Best mix of two rewards; `weight_high` is the mass on `high`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairSolution {
    pub low: f64,
    pub high: f64,
    pub weight_high: f64,
    pub profit: f64,
    pub supply: f64,
}

impl PairSolution {
    pub fn expected_reward(&self) -> f64 {
        (1.0 - self.weight_high) * self.low + self.weight_high * self.high
    }

    pub fn distribution(&self) -> RewardDistribution {
        if self.low == self.high {
            RewardDistribution::point(self.low)
        } else {
            RewardDistribution::two_point(self.low, self.high, self.weight_high)
                .expect("weight lies in [0, 1]")
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FluidSolution {
    pub distribution: RewardDistribution,
    pub profit: f64,
    pub supply: f64,
    pub supply_by_type: Vec<f64>,
    pub expected_reward: f64,
    pub dispersion: Dispersion,
}

/// Departure probabilities of every type at the two endpoints of a pair.
struct PairTable {
    lambdas: Vec<f64>,
    at_low: Vec<f64>,
    at_high: Vec<f64>,
}

impl PairTable {
    fn new(inst: &MarketInstance, low: f64, high: f64) -> Result<Self> {
        let k = inst.num_types();
        Ok(Self {
            lambdas: inst.lambdas(),
            at_low: (0..k).map(|i| inst.departure(i, low)).collect::<Result<_>>()?,
            at_high: (0..k).map(|i| inst.departure(i, high)).collect::<Result<_>>()?,
        })
    }

    /// Fluid supply at mixing weight `w`, or `None` if some type is degenerate.
    fn supply(&self, w: f64) -> Option<f64> {
        let mut n = 0.0;
        for ((lam, a), b) in self.lambdas.iter().zip(&self.at_low).zip(&self.at_high) {
            let l = (1.0 - w) * a + w * b;
            if l < MIN_DEPARTURE_FLOOR {
                return None;
            }
            n += lam / l;
        }
        Some(n)
    }

    /// Interval of weights where every type stays above the departure floor.
    fn admissible(&self) -> Option<(f64, f64)> {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for (&a, &b) in self.at_low.iter().zip(&self.at_high) {
            if a < MIN_DEPARTURE_FLOOR && b < MIN_DEPARTURE_FLOOR {
                return None;
            }
            if b < MIN_DEPARTURE_FLOOR {
                hi = hi.min((a - MIN_DEPARTURE_FLOOR) / (a - b));
            } else if a < MIN_DEPARTURE_FLOOR {
                lo = lo.max((MIN_DEPARTURE_FLOOR - a) / (b - a));
            }
        }
        while self.supply(lo).is_none() && lo < hi {
            lo = lo.next_up();
        }
        while self.supply(hi).is_none() && hi > lo {
            hi = hi.next_down();
        }
        (lo <= hi && self.supply(lo).is_some()).then_some((lo, hi))
    }
}

/// Maximizes fluid profit over mixtures of `low` and `high`, to within `tol`
/// in the mixing weight. Weights where some type's expected departure falls
/// below the floor are skipped; `None` means no weight is admissible.
pub fn optimize_pair(
    inst: &MarketInstance,
    low: f64,
    high: f64,
    tol: f64,
) -> Result<Option<PairSolution>> {
    let table = PairTable::new(inst, low, high)?;
    let Some((w_lo, w_hi)) = table.admissible() else {
        return Ok(None);
    };
    let profit = |w: f64| match table.supply(w) {
        Some(n) => inst.profit_at(n, (1.0 - w) * low + w * high),
        None => f64::NEG_INFINITY,
    };
    let best = if low == high || w_lo == w_hi {
        Some(crate::scalar::ScalarMax {
            x: w_lo,
            value: profit(w_lo),
        })
    } else {
        grid_golden_max(profit, w_lo, w_hi, PAIR_GRID_POINTS, tol)
    };
    Ok(best.and_then(|m| {
        table.supply(m.x).map(|supply| PairSolution {
            low,
            high,
            weight_high: if low == high { 0.0 } else { m.x },
            profit: m.value,
            supply,
        })
    }))
}

fn tie_tol(p: f64) -> f64 {
    1e-12 * p.abs().max(1.0)
}

/// Ordering used to pick among candidates: higher profit, then lower
/// expected reward, then lower high reward, then lower low reward.
fn better(a: &PairSolution, b: &PairSolution) -> bool {
    if (a.profit - b.profit).abs() > tie_tol(a.profit.max(b.profit)) {
        return a.profit > b.profit;
    }
    let (ra, rb) = (a.expected_reward(), b.expected_reward());
    if (ra - rb).abs() > 1e-12 * ra.abs().max(1.0) {
        return ra < rb;
    }
    (a.high, a.low) < (b.high, b.low)
}

pub fn solve_fluid(inst: &MarketInstance, tol: f64) -> Result<FluidSolution> {
    solve_fluid_with(inst, tol, Execution::default())
}

pub fn solve_fluid_with(inst: &MarketInstance, tol: f64, exec: Execution) -> Result<FluidSolution> {
    let grid = inst.rewards().as_slice();
    let n = grid.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).collect();
    let results = par::map_slice(exec, &pairs, |&(a, b)| optimize_pair(inst, grid[a], grid[b], tol));
    let mut best: Option<PairSolution> = None;
    for r in results {
        if let Some(cand) = r? {
            if best.as_ref().is_none_or(|b| better(&cand, b)) {
                best = Some(cand);
            }
        }
    }
    let best = best.ok_or_else(|| Error::InfeasibleInput("no admissible policy".into()))?;
    let distribution = best.distribution();
    let eval = inst.evaluate(&distribution)?;
    Ok(FluidSolution {
        dispersion: classify_dispersion(&distribution, inst.rewards())?,
        distribution,
        profit: eval.profit,
        supply: eval.supply,
        supply_by_type: eval.supply_by_type,
        expected_reward: eval.expected_reward,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub distribution: RewardDistribution,
    pub profit: f64,
    /// Largest profit change per unit L1 distance between neighbouring grid
    /// points, an empirical Lipschitz constant of the objective.
    pub lipschitz: f64,
}

fn compositions(total: usize, parts: usize, visit: &mut impl FnMut(&[usize])) {
    fn rec(rest: usize, k: usize, cur: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
        if k == 1 {
            cur.push(rest);
            visit(cur);
            cur.pop();
            return;
        }
        for v in 0..=rest {
            cur.push(v);
            rec(rest - v, k - 1, cur, visit);
            cur.pop();
        }
    }
    rec(total, parts, &mut Vec::with_capacity(parts), visit);
}

/// Exhaustive search over distributions whose weights are multiples of `1/g`.
pub fn brute_force_oracle(inst: &MarketInstance, g: usize) -> Result<OracleResult> {
    let n = inst.rewards().len();
    if n > MAX_ORACLE_REWARDS || g > MAX_ORACLE_RESOLUTION || g == 0 {
        return Err(Error::TooLarge(format!(
            "{n} rewards at resolution {g}; limits are {MAX_ORACLE_REWARDS} and {MAX_ORACLE_RESOLUTION}"
        )));
    }
    let grid = inst.rewards().as_slice();
    let lambdas = inst.lambdas();
    let table = inst.table();
    let profit_of = |counts: &[usize]| -> Option<f64> {
        let mut supply = 0.0;
        for (i, lam) in lambdas.iter().enumerate() {
            let l: f64 = counts
                .iter()
                .zip(&table[i])
                .map(|(&c, l)| c as f64 * l)
                .sum::<f64>()
                / g as f64;
            if l < MIN_DEPARTURE_FLOOR {
                return None;
            }
            supply += lam / l;
        }
        let mean: f64 = counts.iter().zip(grid).map(|(&c, r)| c as f64 * r).sum::<f64>() / g as f64;
        Some(inst.profit_at(supply, mean))
    };

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut lipschitz: f64 = 0.0;
    let step = 2.0 / g as f64;
    compositions(g, n, &mut |counts| {
        let Some(p) = profit_of(counts) else { return };
        if best.as_ref().is_none_or(|(bp, _)| p > *bp + tie_tol(*bp)) {
            best = Some((p, counts.to_vec()));
        }
        let mut nb = counts.to_vec();
        for from in 0..n {
            if counts[from] == 0 {
                continue;
            }
            for to in from + 1..n {
                nb[from] -= 1;
                nb[to] += 1;
                if let Some(q) = profit_of(&nb) {
                    lipschitz = lipschitz.max((q - p).abs() / step);
                }
                nb[from] += 1;
                nb[to] -= 1;
            }
        }
    });
    let (profit, counts) =
        best.ok_or_else(|| Error::InfeasibleInput("no admissible grid point".into()))?;
    let distribution = RewardDistribution::from_atoms(
        grid.iter().zip(&counts).map(|(&r, &c)| (r, c as f64 / g as f64)),
    )?;
    Ok(OracleResult {
        distribution,
        profit,
        lipschitz,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SupplySolution {
    pub distribution: RewardDistribution,
    pub supply: f64,
    pub cost: f64,
}

fn cost_of(inst: &MarketInstance, x: &RewardDistribution) -> Result<(f64, f64)> {
    let e = inst.evaluate(x)?;
    Ok((e.supply, e.expected_reward * e.supply))
}

/// Maximizes fluid supply subject to a payroll budget `budget`.
pub fn supply_opt(inst: &MarketInstance, budget: f64) -> Result<SupplySolution> {
    let grid = inst.rewards().as_slice();
    let n = grid.len();
    let mut best: Option<(f64, f64, RewardDistribution)> = None;
    let mut offer = |supply: f64, mean: f64, d: RewardDistribution| {
        let replace = match &best {
            None => true,
            Some((s, m, _)) => {
                if (supply - s).abs() > tie_tol(*s) {
                    supply > *s
                } else {
                    mean < *m
                }
            }
        };
        if replace {
            best = Some((supply, mean, d));
        }
    };
    for a in 0..n {
        for b in a..n {
            let (low, high) = (grid[a], grid[b]);
            let table = PairTable::new(inst, low, high)?;
            let Some((w_lo, w_hi)) = table.admissible() else { continue };
            let cost = |w: f64| table.supply(w).map_or(f64::INFINITY, |s| s * ((1.0 - w) * low + w * high));
            if cost(w_lo) > budget {
                continue;
            }
            let w = if a == b {
                0.0
            } else if cost(w_hi) <= budget {
                w_hi
            } else {
                bisect(|w| cost(w) - budget, w_lo, w_hi).min(w_hi)
            };
            let w = if cost(w) > budget { w.next_down().max(w_lo) } else { w };
            let Some(s) = table.supply(w) else { continue };
            let d = if a == b {
                RewardDistribution::point(low)
            } else {
                RewardDistribution::two_point(low, high, w)?
            };
            offer(s, (1.0 - w) * low + w * high, d);
        }
    }
    let (supply, mean, distribution) =
        best.ok_or_else(|| Error::InfeasibleInput(format!("budget {budget} admits no policy")))?;
    Ok(SupplySolution {
        distribution,
        supply,
        cost: supply * mean,
    })
}

/// Two support rewards whose single-reward payrolls straddle the budget.
#[derive(Clone, Debug, PartialEq)]
pub struct Interlacing {
    /// Largest support reward with payroll at most the budget.
    pub below: f64,
    /// Smallest support reward with payroll above the budget.
    pub above: f64,
    pub third: Option<f64>,
    pub pairs: Vec<(f64, f64)>,
}

fn single_reward_payroll(inst: &MarketInstance, r: f64) -> Result<f64> {
    match inst.fluid_supply(&RewardDistribution::point(r)) {
        Ok(s) => Ok(r * s.iter().sum::<f64>()),
        Err(Error::DegenerateSupply { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

pub fn find_interlacing(inst: &MarketInstance, budget: f64, support: &[f64]) -> Result<Interlacing> {
    let mut support = support.to_vec();
    support.sort_by(f64::total_cmp);
    let costs = support
        .iter()
        .map(|&r| single_reward_payroll(inst, r))
        .collect::<Result<Vec<_>>>()?;
    let below = support
        .iter()
        .zip(&costs)
        .filter(|(_, &c)| c <= budget)
        .map(|(&r, _)| r)
        .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))));
    let above = support
        .iter()
        .zip(&costs)
        .filter(|(_, &c)| c > budget)
        .map(|(&r, _)| r)
        .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.min(r))));
    let (Some(below), Some(above)) = (below, above) else {
        return Err(Error::NotFound);
    };
    let third = support
        .iter()
        .zip(&costs)
        .find(|(&r, _)| r != below && r != above)
        .map(|(&r, &c)| (r, c));
    let mut pairs = vec![(below, above)];
    if let Some((r, c)) = third {
        pairs.push(if c <= budget { (r, above) } else { (below, r) });
    }
    Ok(Interlacing {
        below,
        above,
        third: third.map(|t| t.0),
        pairs,
    })
}

/// Shrinks the support of a budget-tight distribution to at most two rewards
/// without lowering fluid supply.
pub fn support_reduce(
    inst: &MarketInstance,
    budget: f64,
    x: &RewardDistribution,
    tol: f64,
) -> Result<RewardDistribution> {
    let slack = tol * budget.abs().max(1.0);
    let (supply0, cost0) = cost_of(inst, x)?;
    if (cost0 - budget).abs() > slack {
        return Err(Error::InfeasibleInput(format!(
            "payroll {cost0} does not meet budget {budget}"
        )));
    }
    let mut cur = x.clone();
    let mut supply = supply0;
    for _ in 0..4 * x.atoms().len() + 4 {
        if cur.atoms().len() <= 2 {
            break;
        }
        let il = find_interlacing(inst, budget, &cur.support()).map_err(|_| {
            Error::InfeasibleInput("support has no interlacing pair".into())
        })?;
        let mut tri = [il.below, il.above, il.third.expect("support has three points")];
        tri.sort_by(|a, b| b.total_cmp(a));
        let next = reallocate(inst, &cur, tri, supply).and_then(|y| rebalance(inst, budget, y));
        let (s, c) = match &next {
            Ok(y) => cost_of(inst, y)?,
            Err(_) => (0.0, f64::INFINITY),
        };
        cur = if c <= budget + slack && s >= supply * (1.0 - 1e-12) {
            next?
        } else {
            binding_pair(inst, budget, &cur, tri, supply)?
        };
        supply = cost_of(inst, &cur)?.0;
    }
    if supply < supply0 * (1.0 - 1e-12) {
        return Err(Error::InfeasibleInput("reduction lowered supply".into()));
    }
    Ok(cur)
}

/// Removes one of three support rewards `a > b > c`, keeping the expected
/// reward fixed, and returns the feasible candidate with the largest supply.
fn reallocate(
    inst: &MarketInstance,
    x: &RewardDistribution,
    [a, b, c]: [f64; 3],
    supply: f64,
) -> Result<RewardDistribution> {
    let mass = |r: f64| x.atoms().iter().find(|t| t.0 == r).map_or(0.0, |t| t.1);
    let (xa, xb, xc) = (mass(a), mass(b), mass(c));
    let rest = || x.atoms().iter().filter(|t| t.0 != a && t.0 != b && t.0 != c).copied();
    let mut cands: Vec<Vec<(f64, f64)>> = Vec::new();
    cands.push(
        rest()
            .chain([(a, xa + xb * (b - c) / (a - c)), (c, xc + xb * (a - b) / (a - c))])
            .collect(),
    );
    let d = xa * (a - b) / (b - c);
    if d <= xc {
        cands.push(rest().chain([(b, xb + xa + d), (c, (xc - d).max(0.0))]).collect());
    }
    let d = xc * (b - c) / (a - b);
    if d <= xa {
        cands.push(rest().chain([(a, (xa - d).max(0.0)), (b, xb + xc + d)]).collect());
    }
    let mut best: Option<(f64, RewardDistribution)> = None;
    for atoms in cands {
        let Ok(y) = RewardDistribution::from_atoms(atoms) else { continue };
        let Ok((s, _)) = cost_of(inst, &y) else { continue };
        if s >= supply * (1.0 - 1e-12) && best.as_ref().is_none_or(|(bs, _)| s > *bs) {
            best = Some((s, y));
        }
    }
    best.map(|b| b.1)
        .ok_or_else(|| Error::InfeasibleInput("no supply-preserving reallocation".into()))
}

/// Best budget-binding mix over each pair of the three rewards `tri`, with
/// the other atoms held fixed.
fn binding_pair(
    inst: &MarketInstance,
    budget: f64,
    x: &RewardDistribution,
    tri: [f64; 3],
    supply: f64,
) -> Result<RewardDistribution> {
    let mass: f64 = x.atoms().iter().filter(|t| tri.contains(&t.0)).map(|t| t.1).sum();
    let rest: Vec<(f64, f64)> = x.atoms().iter().filter(|t| !tri.contains(&t.0)).copied().collect();
    let mut best: Option<(f64, RewardDistribution)> = None;
    for (p, q) in [(tri[2], tri[1]), (tri[2], tri[0]), (tri[1], tri[0])] {
        let mix = |t: f64| {
            RewardDistribution::from_atoms(rest.iter().copied().chain([(p, mass - t), (q, t)]))
        };
        let cost_at = |t: f64| mix(t).and_then(|d| cost_of(inst, &d)).map_or(f64::INFINITY, |c| c.1);
        if cost_at(0.0) > budget {
            continue;
        }
        let t = if cost_at(mass) <= budget {
            mass
        } else {
            let t = bisect(|t| cost_at(t) - budget, 0.0, mass);
            if cost_at(t) > budget { t.next_down().max(0.0) } else { t }
        };
        let y = mix(t)?;
        let (s, _) = cost_of(inst, &y)?;
        if s >= supply * (1.0 - 1e-12) && best.as_ref().is_none_or(|(bs, _)| s > *bs) {
            best = Some((s, y));
        }
    }
    best.map(|b| b.1)
        .ok_or_else(|| Error::InfeasibleInput("no budget-binding pair keeps supply".into()))
}

/// Moves mass from the largest support reward to the smallest until the
/// payroll is back within budget.
fn rebalance(inst: &MarketInstance, budget: f64, mut y: RewardDistribution) -> Result<RewardDistribution> {
    loop {
        let (_, cost) = cost_of(inst, &y)?;
        if cost <= budget || y.atoms().len() < 2 {
            return Ok(y);
        }
        let atoms = y.atoms().to_vec();
        let (lo, hi) = (atoms[0], atoms[atoms.len() - 1]);
        let shifted = |t: f64| {
            let moved = atoms[1..atoms.len() - 1]
                .iter()
                .copied()
                .chain([(lo.0, lo.1 + t), (hi.0, hi.1 - t)]);
            RewardDistribution::from_atoms(moved)
        };
        let full = shifted(hi.1)?;
        if cost_of(inst, &full)?.1 > budget {
            y = full;
            continue;
        }
        let cost_at = |t: f64| {
            shifted(t)
                .and_then(|d| cost_of(inst, &d))
                .map_or(f64::INFINITY, |c| c.1)
        };
        let t = bisect(|t| cost_at(t) - budget, 0.0, hi.1);
        let t = if cost_at(t) > budget { t.next_up().min(hi.1) } else { t };
        return shifted(t);
    }
}

pub fn classify_dispersion(x: &RewardDistribution, rewards: &RewardSet) -> Result<Dispersion> {
    let support = x.support();
    match support.len() {
        1 => Ok(Dispersion::Minimal),
        2 => {
            let (lo, hi) = (support[0], support[1]);
            let extremes = rewards.index_of(lo) == Some(0)
                && rewards.index_of(hi) == Some(rewards.len() - 1);
            if extremes {
                return Ok(Dispersion::Maximal);
            }
            match (rewards.index_of(lo), rewards.index_of(hi)) {
                (Some(i), Some(j)) if j == i + 1 => Ok(Dispersion::Minimal),
                _ => Ok(Dispersion::Neither),
            }
        }
        k => Err(Error::UnsupportedSupport(k)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedWage {
    pub reward: f64,
    pub profit: f64,
    pub supply: f64,
}

/// Best policy that pays every worker the same grid reward.
pub fn optimal_fixed_wage(inst: &MarketInstance) -> Result<FixedWage> {
    let mut best: Option<FixedWage> = None;
    for &r in inst.rewards().as_slice() {
        let Ok(e) = inst.evaluate(&RewardDistribution::point(r)) else { continue };
        if best.is_none_or(|b| e.profit > b.profit + tie_tol(b.profit)) {
            best = Some(FixedWage {
                reward: r,
                profit: e.profit,
                supply: e.supply,
            });
        }
    }
    best.ok_or_else(|| Error::InfeasibleInput("no admissible fixed wage".into()))
}

/// The most dispersed two-point law on `[r_min, inf)` with mean `mu` and
/// standard deviation `sigma`.
pub fn lottery_distribution(r_min: f64, mu: f64, sigma: f64) -> Result<RewardDistribution> {
    if !(mu > r_min) || !(sigma >= 0.0) || !mu.is_finite() || !sigma.is_finite() {
        return Err(Error::InvalidMoments(format!(
            "need mu > r_min and sigma >= 0, got mu = {mu}, r_min = {r_min}, sigma = {sigma}"
        )));
    }
    let gap = mu - r_min;
    let high = mu + sigma * sigma / gap;
    let p = gap * gap / (gap * gap + sigma * sigma);
    if p >= 1.0 {
        return Ok(RewardDistribution::point(mu));
    }
    RewardDistribution::two_point(r_min, high, p)
}

/// Lottery usable on `inst`: with tabulated departures the high reward is
/// snapped to the nearest grid reward above the mean and the weight is
/// re-solved to keep the mean. Returns the snap distance alongside.
pub fn lottery_for_instance(
    inst: &MarketInstance,
    mu: f64,
    sigma: f64,
) -> Result<(RewardDistribution, f64)> {
    let r_min = inst.rewards().min();
    let lottery = lottery_distribution(r_min, mu, sigma)?;
    if !inst.has_tabulated() {
        return Ok((lottery, 0.0));
    }
    let high = lottery.support().last().copied().unwrap_or(mu);
    let grid = inst.rewards().as_slice();
    let snapped = grid
        .iter()
        .copied()
        .filter(|&r| r >= mu)
        .min_by(|a, b| (a - high).abs().total_cmp(&(b - high).abs()))
        .ok_or_else(|| Error::InvalidMoments(format!("mean {mu} exceeds the largest reward")))?;
    let p = (mu - r_min) / (snapped - r_min);
    Ok((
        RewardDistribution::two_point(r_min, snapped, p)?,
        (snapped - high).abs(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{DepartureFunction, RevenueFunction, WorkerType};
    use approx::assert_abs_diff_eq;

    fn tab(rewards: &[f64], lambda: f64, values: &[f64], revenue: RevenueFunction) -> MarketInstance {
        MarketInstance::new(
            RewardSet::new(rewards.to_vec()).unwrap(),
            vec![WorkerType {
                lambda,
                departure: DepartureFunction::Tabulated {
                    points: rewards.iter().copied().zip(values.iter().copied()).collect(),
                },
            }],
            revenue,
            true,
        )
        .unwrap()
    }

    #[test]
    fn nonconvex_pair_optimum() {
        // g(x) = (1 - 0.1x) / (1 - 0.5x) peaks at the endpoint x = 1.
        let inst = tab(&[0.0, 0.1], 1.0, &[1.0, 0.5], RevenueFunction::Linear { alpha: 1.0 });
        let s = solve_fluid(&inst, DEFAULT_TOL).unwrap();
        assert_abs_diff_eq!(s.profit, 1.8, epsilon = 1e-12);
        assert_eq!(s.distribution, RewardDistribution::point(0.1));
    }

    #[test]
    fn pair_outside_admissible_region_is_skipped() {
        let inst = tab(&[0.0, 1.0], 1.0, &[0.0, 0.0], RevenueFunction::Linear { alpha: 1.0 });
        assert!(optimize_pair(&inst, 0.0, 1.0, 1e-10).unwrap().is_none());
        assert!(solve_fluid(&inst, 1e-10).is_err());
    }

    #[test]
    fn supply_opt_two_reward_budget() {
        let inst = tab(&[15.0, 60.0], 10.0, &[1.0, 0.2], RevenueFunction::Linear { alpha: 1.0 });
        let s = supply_opt(&inst, 1000.0).unwrap();
        // (15 + 45x) 10 = 1000 (1 - 0.8x)
        let x = 850.0 / 1250.0;
        assert_abs_diff_eq!(s.distribution.atoms()[1].1, x, epsilon = 1e-9);
        assert_abs_diff_eq!(s.supply, 10.0 / (1.0 - 0.8 * x), epsilon = 1e-7);
    }

    #[test]
    fn supply_opt_budget_extremes() {
        let inst = tab(&[15.0, 60.0], 10.0, &[1.0, 0.2], RevenueFunction::Linear { alpha: 1.0 });
        let s = supply_opt(&inst, 1e9).unwrap();
        assert_eq!(s.distribution, RewardDistribution::point(60.0));
        let s = supply_opt(&inst, 150.0).unwrap();
        assert_eq!(s.distribution, RewardDistribution::point(15.0));
        assert!(supply_opt(&inst, 100.0).is_err());
    }

    #[test]
    fn interlacing_pairs_of_three_point_support() {
        let inst = tab(
            &[15.0, 30.0, 60.0],
            10.0,
            &[1.0, 0.5, 0.2],
            RevenueFunction::Linear { alpha: 1.0 },
        );
        // payrolls: 150, 600, 3000
        let il = find_interlacing(&inst, 400.0, &[15.0, 30.0, 60.0]).unwrap();
        assert_eq!(il.pairs, vec![(15.0, 30.0), (15.0, 60.0)]);
        assert!(matches!(find_interlacing(&inst, 1e5, &[15.0, 30.0]), Err(Error::NotFound)));
    }

    #[test]
    fn support_reduce_shrinks_and_keeps_budget() {
        let inst = tab(
            &[15.0, 30.0, 45.0, 60.0],
            10.0,
            &[1.0, 0.6, 0.25, 0.2],
            RevenueFunction::Linear { alpha: 1.0 },
        );
        let mut x = RewardDistribution::from_atoms([(15.0, 0.4), (30.0, 0.2), (45.0, 0.2), (60.0, 0.2)]).unwrap();
        let (supply, budget) = cost_of(&inst, &x).unwrap();
        let y = support_reduce(&inst, budget, &x, 1e-9).unwrap();
        assert!(y.atoms().len() <= 2);
        let (s2, c2) = cost_of(&inst, &y).unwrap();
        assert!(s2 >= supply * (1.0 - 1e-12));
        assert_abs_diff_eq!(c2, budget, epsilon = 1e-6 * budget);
        x = RewardDistribution::point(30.0);
        assert!(support_reduce(&inst, budget, &x, 1e-9).is_err());
    }

    #[test]
    fn dispersion_classes() {
        let g = RewardSet::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let d = |a, b| RewardDistribution::two_point(a, b, 0.5).unwrap();
        assert_eq!(classify_dispersion(&d(1.0, 4.0), &g).unwrap(), Dispersion::Maximal);
        assert_eq!(classify_dispersion(&d(2.0, 3.0), &g).unwrap(), Dispersion::Minimal);
        assert_eq!(classify_dispersion(&d(1.0, 3.0), &g).unwrap(), Dispersion::Neither);
        assert_eq!(
            classify_dispersion(&RewardDistribution::point(2.0), &g).unwrap(),
            Dispersion::Minimal
        );
        let g2 = RewardSet::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(classify_dispersion(&d(1.0, 2.0), &g2).unwrap(), Dispersion::Maximal);
        let three = RewardDistribution::from_atoms([(1.0, 0.2), (2.0, 0.3), (3.0, 0.5)]).unwrap();
        assert!(matches!(
            classify_dispersion(&three, &g),
            Err(Error::UnsupportedSupport(3))
        ));
    }

    #[test]
    fn lottery_moments() {
        let l = lottery_distribution(15.0, 35.0, 11.2).unwrap();
        let atoms = l.atoms();
        assert_abs_diff_eq!(atoms[1].0, 41.272, epsilon = 1e-12);
        assert_abs_diff_eq!(atoms[1].1, 400.0 / 525.44, epsilon = 1e-12);
        assert_abs_diff_eq!(l.mean(), 35.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l.variance().sqrt(), 11.2, epsilon = 1e-9);
        assert!(lottery_distribution(15.0, 15.0, 1.0).is_err());
        let narrow = lottery_distribution(15.0, 35.0, 1e-6).unwrap();
        assert_abs_diff_eq!(*narrow.support().last().unwrap(), 35.0, epsilon = 1e-9);
    }

    #[test]
    fn lottery_snaps_on_tabulated_grid() {
        let inst = tab(
            &[15.0, 30.0, 45.0, 60.0],
            10.0,
            &[1.0, 0.6, 0.25, 0.2],
            RevenueFunction::Linear { alpha: 1.0 },
        );
        let (d, snap) = lottery_for_instance(&inst, 35.0, 11.2).unwrap();
        assert_eq!(d.support(), vec![15.0, 45.0]);
        assert_abs_diff_eq!(snap, 45.0 - 41.272, epsilon = 1e-12);
        assert_abs_diff_eq!(d.mean(), 35.0, epsilon = 1e-12);
    }
}
