//! Finite-market simulation with Poisson arrivals scaled by `theta`.
//!
//! Each period, `Poisson(theta * lambda_i)` new type-`i` workers join the
//! retained pool, every active worker draws a reward, and each one leaves
//! independently with the departure probability of that reward. Because
//! the per-worker departure probability after integrating out the reward
//! is `l_i(x)`, departures can be drawn as one `Binomial(N_i, l_i(x))`;
//! reward-level draws are only needed when the realized payroll is asked for.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fluid::{solve_fluid_with, DEFAULT_TOL};
use crate::market::{MarketInstance, RewardDistribution};
use crate::par::{self, Execution};
use crate::policy::{cyclic_steady_state, fluid_trajectory, Policy};

const BURN_IN_DEPARTURES: f64 = 10.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    #[default]
    Empty,
    /// Independent Poisson counts around the fluid steady state, which is
    /// the exact stationary law for static and cyclic policies.
    Stationary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub theta: f64,
    pub periods: usize,
    /// Defaults to ten expected sojourns of the slowest type.
    pub burn_in: Option<usize>,
    pub replications: usize,
    pub seed: u64,
    pub realized_cost: bool,
    pub initial: InitialCondition,
    /// Subtract a zero-mean linear correction built from the known mean
    /// occupancy, which removes most of the first-order noise in profit.
    pub control_variate: bool,
    pub keep_trace: bool,
    pub execution: Execution,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            theta: 1.0,
            periods: 5000,
            burn_in: None,
            replications: 200,
            seed: 0,
            realized_cost: false,
            initial: InitialCondition::Empty,
            control_variate: false,
            keep_trace: false,
            execution: Execution::default(),
        }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0) || !self.theta.is_finite() {
            return Err(Error::Config(format!("theta must be positive, got {}", self.theta)));
        }
        if self.periods == 0 {
            return Err(Error::Config("periods must be positive".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be positive".into()));
        }
        Ok(())
    }
}

/// Per-period flows, occupancy and profit of the first replication after
/// burn-in. `supply_by_type[t]` counts workers active in period `t`, after
/// `arrivals[t]` joined and before `departures[t]` left.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trace {
    pub supply_by_type: Vec<Vec<u64>>,
    pub arrivals: Vec<Vec<u64>>,
    pub departures: Vec<Vec<u64>>,
    pub profit: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimResult {
    /// Profit per period, in fluid units (revenue and payroll divided by `theta`).
    pub mean_profit: f64,
    pub std_error: f64,
    /// Average number of active workers of each type.
    pub mean_supply_by_type: Vec<f64>,
    pub mean_supply: f64,
    pub supply_std_error: f64,
    pub replications: usize,
    pub burn_in: usize,
    pub periods: usize,
    pub trace: Option<Trace>,
}

struct Step {
    atoms: Vec<(f64, f64)>,
    /// `atom_departure[i][k]`
    atom_departure: Vec<Vec<f64>>,
    departure: Vec<f64>,
    mean: f64,
}

struct Schedule {
    steps: Vec<Step>,
    prefix: usize,
}

impl Schedule {
    fn new(inst: &MarketInstance, policy: &Policy) -> Result<Self> {
        let (prefix, len) = (policy.transient(), policy.period());
        let steps = (0..prefix + len)
            .map(|t| {
                let x = policy.distribution_at(t).ok_or_else(|| {
                    Error::Config(
                        "belief-based policies pay workers individually and are only evaluated in the fluid model"
                            .into(),
                    )
                })?;
                let atom_departure = (0..inst.num_types())
                    .map(|i| x.atoms().iter().map(|&(r, _)| inst.departure(i, r)).collect())
                    .collect::<Result<Vec<Vec<f64>>>>()?;
                Ok(Step {
                    atoms: x.atoms().to_vec(),
                    atom_departure,
                    departure: inst.expected_departures(x)?,
                    mean: x.mean(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { steps, prefix })
    }

    fn at(&self, t: usize) -> &Step {
        if t < self.prefix {
            &self.steps[t]
        } else {
            let len = self.steps.len() - self.prefix;
            &self.steps[self.prefix + (t - self.prefix) % len]
        }
    }

    fn slowest_departure(&self) -> f64 {
        let cycle = &self.steps[self.prefix..];
        let k = cycle[0].departure.len();
        (0..k)
            .map(|i| cycle.iter().map(|s| s.departure[i]).sum::<f64>() / cycle.len() as f64)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Period-0 mean active mass per type (in fluid units).
fn initial_mean(inst: &MarketInstance, policy: &Policy, initial: InitialCondition) -> Result<Vec<f64>> {
    match initial {
        InitialCondition::Empty => Ok(inst.lambdas()),
        InitialCondition::Stationary => match policy {
            Policy::Static(x) => inst.fluid_supply(x),
            Policy::Cyclic(xs) => Ok(cyclic_steady_state(inst, xs)?.supply_by_type[0].clone()),
            Policy::Trajectory(_) if policy.transient() == 0 => {
                let xs: Vec<RewardDistribution> = (0..policy.period())
                    .map(|t| policy.distribution_at(t).cloned().expect("non-discriminating"))
                    .collect();
                Ok(cyclic_steady_state(inst, &xs)?.supply_by_type[0].clone())
            }
            _ => Err(Error::Config(
                "stationary start needs a static or cyclic policy".into(),
            )),
        },
    }
}

fn poisson(mean: f64) -> Result<Option<Poisson<f64>>> {
    if mean == 0.0 {
        return Ok(None);
    }
    Poisson::new(mean)
        .map(Some)
        .map_err(|e| Error::Config(format!("Poisson({mean}): {e}")))
}

fn binomial<R: Rng>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        0
    } else if p >= 1.0 {
        n
    } else {
        Binomial::new(n, p).expect("valid binomial").sample(rng)
    }
}

struct RepOutput {
    mean_profit: f64,
    mean_supply_by_type: Vec<f64>,
    trace: Option<Trace>,
}

struct Plan<'a> {
    inst: &'a MarketInstance,
    schedule: Schedule,
    cfg: &'a SimConfig,
    burn_in: usize,
    start_mean: Vec<f64>,
    /// Mean occupancy path (fluid units) for the control variate.
    mean_path: Option<Vec<f64>>,
}

impl Plan<'_> {
    fn run(&self, rep: usize) -> Result<RepOutput> {
        let cfg = self.cfg;
        let theta = cfg.theta;
        let k = self.inst.num_types();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(rep as u64);
        let arrivals = self
            .inst
            .lambdas()
            .iter()
            .map(|l| poisson(theta * l))
            .collect::<Result<Vec<_>>>()?;
        let draw = |d: &Option<Poisson<f64>>, rng: &mut ChaCha8Rng| d.as_ref().map_or(0, |p| p.sample(rng) as u64);

        let mut retained: Vec<u64> = match cfg.initial {
            InitialCondition::Empty => vec![0; k],
            InitialCondition::Stationary => {
                let mut v = Vec::with_capacity(k);
                for (mean, lam) in self.start_mean.iter().zip(self.inst.lambdas()) {
                    v.push(draw(&poisson(theta * (mean - lam).max(0.0))?, &mut rng));
                }
                v
            }
        };
        let total_periods = self.burn_in + cfg.periods;
        let keep_trace = cfg.keep_trace && rep == 0;
        let mut trace = keep_trace.then(|| Trace {
            supply_by_type: Vec::with_capacity(cfg.periods),
            arrivals: Vec::with_capacity(cfg.periods),
            departures: Vec::with_capacity(cfg.periods),
            profit: Vec::with_capacity(cfg.periods),
        });
        let mut profit_sum = 0.0;
        let mut supply_sum = vec![0.0; k];
        let mut active = vec![0u64; k];
        let mut joined = vec![0u64; k];
        let mut cells: Vec<u64> = Vec::new();
        for t in 0..total_periods {
            let step = self.schedule.at(t);
            for i in 0..k {
                joined[i] = draw(&arrivals[i], &mut rng);
                active[i] = retained[i] + joined[i];
            }
            let n_total: u64 = active.iter().sum();
            let scaled = n_total as f64 / theta;
            let mut payroll = scaled * step.mean;
            if cfg.realized_cost {
                payroll = 0.0;
                for i in 0..k {
                    split_cells(&mut rng, active[i], &step.atoms, &mut cells);
                    let mut leaving = 0;
                    for (c, (&count, &(r, _))) in cells.iter().zip(&step.atoms).enumerate() {
                        payroll += count as f64 * r;
                        leaving += binomial(&mut rng, count, step.atom_departure[i][c]);
                    }
                    retained[i] = active[i] - leaving;
                }
                payroll /= theta;
            } else {
                for i in 0..k {
                    retained[i] = active[i] - binomial(&mut rng, active[i], step.departure[i]);
                }
            }
            if t < self.burn_in {
                continue;
            }
            let mut profit = self.inst.revenue().value(scaled) - payroll;
            if let Some(m) = &self.mean_path {
                let mt = m[t];
                let slope = self.inst.revenue().derivative(mt) - step.mean;
                profit -= slope * (scaled - mt);
            }
            profit_sum += profit;
            for i in 0..k {
                supply_sum[i] += active[i] as f64;
            }
            if let Some(tr) = trace.as_mut() {
                tr.supply_by_type.push(active.clone());
                tr.arrivals.push(joined.clone());
                tr.departures.push(active.iter().zip(&retained).map(|(a, r)| a - r).collect());
                tr.profit.push(profit);
            }
        }
        let n = cfg.periods as f64;
        Ok(RepOutput {
            mean_profit: profit_sum / n,
            mean_supply_by_type: supply_sum.into_iter().map(|s| s / n).collect(),
            trace,
        })
    }
}

/// Multinomial split of `n` workers over the atoms by sequential binomials.
fn split_cells<R: Rng>(rng: &mut R, n: u64, atoms: &[(f64, f64)], out: &mut Vec<u64>) {
    out.clear();
    let mut left = n;
    let mut mass = 1.0;
    for (c, &(_, p)) in atoms.iter().enumerate() {
        let count = if c + 1 == atoms.len() {
            left
        } else {
            binomial(rng, left, (p / mass).min(1.0))
        };
        out.push(count);
        left -= count;
        mass -= p;
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn default_burn_in(inst: &MarketInstance, policy: &Policy) -> Result<usize> {
    let schedule = Schedule::new(inst, policy)?;
    burn_in_for(&schedule)
}

fn burn_in_for(schedule: &Schedule) -> Result<usize> {
    let slowest = schedule.slowest_departure();
    if !(slowest > 0.0) {
        return Err(Error::Config(
            "some type never leaves under this policy; set the burn-in explicitly".into(),
        ));
    }
    Ok(schedule.prefix + (BURN_IN_DEPARTURES / slowest).ceil() as usize)
}

pub fn simulate(inst: &MarketInstance, policy: &Policy, cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let schedule = Schedule::new(inst, policy)?;
    let burn_in = match cfg.burn_in {
        Some(b) => b,
        None => burn_in_for(&schedule)?,
    };
    let start_mean = initial_mean(inst, policy, cfg.initial)?;
    let mean_path = if cfg.control_variate {
        let horizon = burn_in + cfg.periods;
        Some(fluid_trajectory(inst, policy, horizon, &start_mean)?.supply)
    } else {
        None
    };
    let plan = Plan {
        inst,
        schedule,
        cfg,
        burn_in,
        start_mean,
        mean_path,
    };
    let reps = par::map_range(cfg.execution, cfg.replications, |r| plan.run(r))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let profits: Vec<f64> = reps.iter().map(|r| r.mean_profit).collect();
    let supplies: Vec<f64> = reps.iter().map(|r| r.mean_supply_by_type.iter().sum()).collect();
    let (mean_profit, std_error) = mean_and_se(&profits);
    let (mean_supply, supply_std_error) = mean_and_se(&supplies);
    let k = inst.num_types();
    let mean_supply_by_type = (0..k)
        .map(|i| reps.iter().map(|r| r.mean_supply_by_type[i]).sum::<f64>() / reps.len() as f64)
        .collect();
    let trace = reps.into_iter().next().and_then(|r| r.trace);
    Ok(SimResult {
        mean_profit,
        std_error,
        mean_supply_by_type,
        mean_supply,
        supply_std_error,
        replications: cfg.replications,
        burn_in,
        periods: cfg.periods,
        trace,
    })
}

/// Expected active workers of each type at stationarity.
pub fn steady_state_mean(inst: &MarketInstance, x: &RewardDistribution, theta: f64) -> Result<Vec<f64>> {
    Ok(inst.fluid_supply(x)?.into_iter().map(|n| n * theta).collect())
}

/// Long-run fluid profit of a non-discriminating policy.
pub fn fluid_benchmark(inst: &MarketInstance, policy: &Policy) -> Result<f64> {
    match policy {
        Policy::Static(x) => inst.fluid_profit(x),
        Policy::BeliefBased(_) => Err(Error::Config(
            "belief-based policies have no finite-market counterpart".into(),
        )),
        _ => {
            let xs: Vec<RewardDistribution> = (0..policy.period())
                .map(|t| policy.distribution_at(policy.transient() + t).cloned().expect("non-discriminating"))
                .collect();
            Ok(cyclic_steady_state(inst, &xs)?.average_profit)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossPoint {
    pub policy: String,
    pub theta: f64,
    pub loss: f64,
    pub se: f64,
    pub reps: usize,
}

/// Optimal fluid profit minus simulated profit for each policy and market
/// size. Each (policy, theta) cell gets its own seed derived from `cfg.seed`.
pub fn additive_loss_sweep(
    inst: &MarketInstance,
    policies: &[(String, Policy)],
    thetas: &[f64],
    cfg: &SimConfig,
) -> Result<Vec<LossPoint>> {
    let fluid = solve_fluid_with(inst, DEFAULT_TOL, cfg.execution)?.profit;
    let mut out = Vec::with_capacity(policies.len() * thetas.len());
    for (pi, (name, policy)) in policies.iter().enumerate() {
        for (ti, &theta) in thetas.iter().enumerate() {
            let cell = SimConfig {
                theta,
                seed: cell_seed(cfg.seed, pi, ti),
                keep_trace: false,
                ..cfg.clone()
            };
            let res = simulate(inst, policy, &cell)?;
            out.push(LossPoint {
                policy: name.clone(),
                theta,
                loss: fluid - res.mean_profit,
                se: res.std_error,
                reps: res.replications,
            });
        }
    }
    Ok(out)
}

fn cell_seed(seed: u64, policy: usize, theta: usize) -> u64 {
    let mut z = seed ^ ((policy as u64) << 32 | theta as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
