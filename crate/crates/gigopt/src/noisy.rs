//! Workers whose outside option is `v_i` plus uniform noise on `[-eps, eps]`.
//!
//! Departure functions are piecewise linear with kinks at `v_i - eps` and
//! `v_i + eps`, so on `[r_min, r_max]` every distribution can be replaced by
//! one on the kink set with the same mean reward and departure probabilities.
//! Optimizing over that finite set is therefore exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluid::solve_fluid;
use crate::market::{
    DepartureFunction, MarketInstance, RevenueFunction, RewardDistribution, RewardSet, WorkerType,
    MIN_DEPARTURE_FLOOR,
};
use crate::scalar::bisect;

const DEGENERATE_SHARE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyInstance {
    #[serde(rename = "lambda")]
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    pub revenue: RevenueFunction,
    #[serde(default)]
    pub r_min: f64,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
}

fn default_r_max() -> f64 {
    60.0
}

impl NoisyInstance {
    pub fn new(
        lambdas: Vec<f64>,
        values: Vec<f64>,
        revenue: RevenueFunction,
        r_min: f64,
        r_max: f64,
    ) -> Result<Self> {
        let inst = Self {
            lambdas,
            values,
            revenue,
            r_min,
            r_max,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() || self.lambdas.len() != self.values.len() {
            return Err(Error::InvalidInstance(format!(
                "{} arrival rates for {} values",
                self.lambdas.len(),
                self.values.len()
            )));
        }
        if self.lambdas.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::InvalidInstance("arrival rates must be positive".into()));
        }
        if !(self.r_min < self.r_max) || self.r_min < 0.0 {
            return Err(Error::InvalidInstance(format!(
                "bad reward range [{}, {}]",
                self.r_min, self.r_max
            )));
        }
        self.revenue.validate()
    }

    pub fn num_types(&self) -> usize {
        self.lambdas.len()
    }

    pub fn total_arrival(&self) -> f64 {
        self.lambdas.iter().sum()
    }

    /// `{r_min, r_max}` together with every `v_i +- eps` inside the range.
    pub fn kink_rewards(&self, eps: f64) -> Result<RewardSet> {
        let mut r = vec![self.r_min, self.r_max];
        for &v in &self.values {
            for k in [v - eps, v + eps] {
                if k > self.r_min && k < self.r_max {
                    r.push(k);
                }
            }
        }
        r.sort_by(f64::total_cmp);
        r.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
        RewardSet::new(r)
    }

    pub fn market(&self, eps: f64) -> Result<MarketInstance> {
        if !(eps >= 0.0) {
            return Err(Error::InvalidInstance(format!("noise level {eps} must be non-negative")));
        }
        let types = self
            .lambdas
            .iter()
            .zip(&self.values)
            .map(|(&lambda, &value)| WorkerType {
                lambda,
                departure: DepartureFunction::EpsNoisy { value, eps },
            })
            .collect();
        MarketInstance::new(self.kink_rewards(eps)?, types, self.revenue, true)
    }

    fn single(&self) -> Result<(f64, f64)> {
        if self.num_types() != 1 {
            return Err(Error::PreconditionViolated(format!(
                "closed form needs one type, got {}",
                self.num_types()
            )));
        }
        Ok((self.lambdas[0], self.values[0]))
    }

    fn check_noise_range(&self, v: f64, eps: f64) -> Result<()> {
        let room = (v - self.r_min).min(self.r_max - v);
        if eps > room {
            return Err(Error::AssumptionViolated(format!(
                "noise {eps} exceeds the distance {room} from v to the reward range"
            )));
        }
        Ok(())
    }
}

/// Smallest noise level at which paying above `r_min` stops being profitable.
pub fn noise_threshold(inst: &NoisyInstance) -> Result<f64> {
    let (lambda, v) = inst.single()?;
    Ok(match inst.revenue {
        RevenueFunction::Newsvendor { alpha, .. } => alpha - v,
        r => r.derivative(lambda) - v,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoisyOptimum {
    /// Mass on `v + eps`; the rest is on `r_min`.
    pub x_star: f64,
    pub eps0: f64,
    pub distribution: RewardDistribution,
}

fn retention_policy(r_min: f64, high: f64, x: f64) -> Result<RewardDistribution> {
    if x <= 0.0 {
        Ok(RewardDistribution::point(r_min))
    } else {
        RewardDistribution::two_point(r_min, high, x)
    }
}

/// Optimal single-type policy for smooth strictly concave revenue: mix
/// `r_min` with `v + eps` so that `R'(lambda / (1 - x)) = v + eps`.
pub fn optimal_noisy(inst: &NoisyInstance, eps: f64) -> Result<NoisyOptimum> {
    let (lambda, v) = inst.single()?;
    if !inst.revenue.is_smooth_strictly_concave() {
        return Err(Error::AssumptionViolated(
            "revenue must be smooth and strictly concave".into(),
        ));
    }
    let eps0 = noise_threshold(inst)?;
    if eps0 > (v - inst.r_min).min(inst.r_max - v) {
        return Err(Error::AssumptionViolated(format!(
            "R'(lambda) - v = {eps0} exceeds the distance from v to the reward range"
        )));
    }
    inst.check_noise_range(v, eps)?;
    let target = v + eps;
    let x_star = if inst.revenue.derivative(lambda) <= target * (1.0 + 1e-12) {
        0.0
    } else {
        let f = |x: f64| inst.revenue.derivative(lambda / (1.0 - x)) - target;
        let mut hi = 0.5;
        while f(hi) > 0.0 && hi < 1.0 - 1e-15 {
            hi = 1.0 - (1.0 - hi) / 16.0;
        }
        bisect(f, 0.0, hi)
    };
    Ok(NoisyOptimum {
        x_star,
        eps0,
        distribution: retention_policy(inst.r_min, target, x_star)?,
    })
}

/// Optimal mass on `v + eps` for revenue `alpha * min{N, D}` with one type.
pub fn newsvendor_optimal(alpha: f64, demand: f64, lambda: f64, v: f64, eps: f64) -> Result<f64> {
    if !(demand > lambda) {
        return Err(Error::InvalidRegime(format!(
            "demand {demand} must exceed the arrival rate {lambda}"
        )));
    }
    Ok(if eps <= alpha - v { 1.0 - lambda / demand } else { 0.0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NoisyMetrics {
    pub supply: f64,
    pub profit: f64,
    pub surplus: f64,
    pub welfare: f64,
}

/// Profit, worker surplus and welfare of `x` at noise level `eps`.
pub fn noisy_metrics(inst: &NoisyInstance, eps: f64, x: &RewardDistribution) -> Result<NoisyMetrics> {
    let market = inst.market(eps)?;
    let by_type = market.fluid_supply(x)?;
    let supply: f64 = by_type.iter().sum();
    let mean = x.mean();
    let revenue = inst.revenue.value(supply);
    let surplus = by_type.iter().zip(&inst.values).map(|(n, v)| n * (mean - v)).sum();
    let welfare = revenue - by_type.iter().zip(&inst.values).map(|(n, v)| n * v).sum::<f64>();
    Ok(NoisyMetrics {
        supply,
        profit: revenue - mean * supply,
        surplus,
        welfare,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScaledSurplus {
    pub value: f64,
    /// Set when the defining average has (near) zero weight and the value
    /// was replaced by zero.
    pub degenerate: bool,
}

/// Surplus seen by a planner who assumes a worker stays exactly when the
/// mean reward covers their value.
pub fn rational_scaled_surplus(inst: &NoisyInstance, eps: f64, x: &RewardDistribution) -> Result<ScaledSurplus> {
    let supply: f64 = inst.market(eps)?.fluid_supply(x)?.iter().sum();
    let mean = x.mean();
    let (mut num, mut den) = (0.0, 0.0);
    for (&l, &v) in inst.lambdas.iter().zip(&inst.values) {
        if mean >= v {
            num += l * (mean - v);
            den += l;
        }
    }
    Ok(if den == 0.0 {
        ScaledSurplus { value: 0.0, degenerate: true }
    } else {
        ScaledSurplus { value: supply * num / den, degenerate: false }
    })
}

/// Surplus averaged over the workers actually retained beyond one period.
pub fn myopic_scaled_surplus(inst: &NoisyInstance, eps: f64, x: &RewardDistribution) -> Result<ScaledSurplus> {
    let by_type = inst.market(eps)?.fluid_supply(x)?;
    let supply: f64 = by_type.iter().sum();
    let mean = x.mean();
    let (mut num, mut den) = (0.0, 0.0);
    for ((n, &l), &v) in by_type.iter().zip(&inst.lambdas).zip(&inst.values) {
        num += (n - l) * (mean - v);
        den += n - l;
    }
    Ok(if den < DEGENERATE_SHARE * inst.total_arrival() {
        ScaledSurplus { value: 0.0, degenerate: true }
    } else {
        ScaledSurplus { value: supply * num / den, degenerate: false }
    })
}

/// `R'(u) - v`
pub fn marginal_surplus(revenue: &RevenueFunction, v: f64, u: f64) -> f64 {
    revenue.derivative(u) - v
}

/// Whether `S / S'` is non-decreasing on `grid`, with `S(u) = R'(u) - v`.
pub fn mhr_like_check(revenue: &RevenueFunction, v: f64, grid: &[f64]) -> Result<bool> {
    let mut ratios = Vec::with_capacity(grid.len());
    for &u in grid {
        let d = revenue.second_derivative(u);
        if d == 0.0 {
            return Err(Error::DerivativeVanishes { u });
        }
        ratios.push(marginal_surplus(revenue, v, u) / d);
    }
    Ok(ratios.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub eps: f64,
    /// Share of workers paid above `r_min`.
    pub x_star: f64,
    pub profit: f64,
    pub surplus: f64,
    pub welfare: f64,
    pub rational_surplus: f64,
    pub myopic_surplus: f64,
    pub myopic_degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricCurve {
    pub points: Vec<CurvePoint>,
    /// Noise level beyond which nobody is paid above `r_min`.
    pub eps0: Option<f64>,
    /// Last grid point up to which surplus is non-decreasing.
    pub eps1: Option<f64>,
}

fn optimal_policy(inst: &NoisyInstance, eps: f64) -> Result<RewardDistribution> {
    if inst.num_types() == 1 {
        let (lambda, v) = inst.single()?;
        if let RevenueFunction::Newsvendor { alpha, cap } = inst.revenue {
            inst.check_noise_range(v, eps)?;
            let x = newsvendor_optimal(alpha, cap, lambda, v, eps)?;
            return retention_policy(inst.r_min, v + eps, x);
        }
        if inst.revenue.is_smooth_strictly_concave() {
            return Ok(optimal_noisy(inst, eps)?.distribution);
        }
    }
    Ok(solve_fluid(&inst.market(eps)?, 1e-12)?.distribution)
}

pub fn surplus_curve(inst: &NoisyInstance, eps_grid: &[f64]) -> Result<MetricCurve> {
    inst.validate()?;
    let mut points = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let x = optimal_policy(inst, eps)?;
        let m = noisy_metrics(inst, eps, &x)?;
        let rational = rational_scaled_surplus(inst, eps, &x)?;
        let myopic = myopic_scaled_surplus(inst, eps, &x)?;
        let above: f64 = x.atoms().iter().filter(|a| a.0 > inst.r_min).map(|a| a.1).sum();
        points.push(CurvePoint {
            eps,
            x_star: above,
            profit: m.profit,
            surplus: m.surplus,
            welfare: m.welfare,
            rational_surplus: rational.value,
            myopic_surplus: myopic.value,
            myopic_degenerate: myopic.degenerate,
        });
    }
    let eps0 = if inst.num_types() == 1 {
        Some(noise_threshold(inst)?)
    } else {
        let last = points.iter().rposition(|p| p.x_star > 0.0);
        match last {
            Some(k) if k + 1 < points.len() => Some(points[k + 1].eps),
            Some(_) => None,
            None => points.first().map(|p| p.eps),
        }
    };
    let eps1 = {
        let mut k = 0;
        while k + 1 < points.len()
            && eps0.is_none_or(|e| points[k + 1].eps <= e)
            && points[k + 1].surplus >= points[k].surplus - 1e-9 * points[k].surplus.abs().max(1.0)
        {
            k += 1;
        }
        points.get(k).map(|p| p.eps)
    };
    Ok(MetricCurve { points, eps0, eps1 })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossoverReport {
    pub count: usize,
    /// Grid index at which each crossover completes.
    pub indices: Vec<usize>,
}

/// Counts regime changes of `myopic - rational` along a grid. Each point is
/// below, tied (within `rel_tol` of the larger magnitude) or above. Tied
/// stretches between two signed stretches are merged away, so a crossing
/// counts once however long the curves stay close; a final tied stretch,
/// where both curves settle together, counts as a change of its own.
pub fn detect_double_threshold(
    rational: &[f64],
    myopic: &[f64],
    rel_tol: f64,
) -> Result<CrossoverReport> {
    if rational.len() != myopic.len() {
        return Err(Error::GridMismatch {
            left: rational.len(),
            right: myopic.len(),
        });
    }
    let sign = |k: usize| {
        let (r, m) = (rational[k], myopic[k]);
        let scale = r.abs().max(m.abs());
        if scale < MIN_DEPARTURE_FLOOR || (m - r).abs() <= rel_tol * scale {
            0
        } else if m > r {
            1
        } else {
            -1
        }
    };
    let mut runs: Vec<(i8, usize)> = Vec::new();
    for k in 0..rational.len() {
        let s = sign(k);
        if runs.last().is_none_or(|r| r.0 != s) {
            runs.push((s, k));
        }
    }
    let last_signed = runs.iter().rposition(|r| r.0 != 0);
    let kept: Vec<(i8, usize)> = runs
        .iter()
        .enumerate()
        .filter(|&(j, r)| r.0 != 0 || last_signed.is_some_and(|l| j > l))
        .map(|(_, &r)| r)
        .collect();
    let mut indices = Vec::new();
    for w in kept.windows(2) {
        if w[1].0 != w[0].0 {
            indices.push(w[1].1);
        }
    }
    Ok(CrossoverReport {
        count: indices.len(),
        indices,
    })
}
