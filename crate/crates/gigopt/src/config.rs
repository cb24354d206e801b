//! JSON input formats for instances and policies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{
    DepartureFunction, MarketInstance, RevenueFunction, RewardDistribution, RewardSet, WorkerType,
};
use crate::policy::{BeliefBasedParams, Policy, Trajectory};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RewardsConfig {
    Range { min: f64, max: f64, step: f64 },
    List(Vec<f64>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DepartureConfig {
    ExpFloor { alpha: f64, floor: f64 },
    Linear { alpha: f64, beta: f64 },
    Quadratic { alpha: f64, beta: f64, gamma: f64 },
    EpsNoisy { value: f64, eps: f64 },
    Tabulated { values: Vec<f64> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TypeConfig {
    pub lambda: f64,
    pub departure: DepartureConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceConfig {
    pub rewards: RewardsConfig,
    pub types: Vec<TypeConfig>,
    pub revenue: RevenueFunction,
    #[serde(default, alias = "eps_noisy_mode")]
    pub allow_vanishing_departure: bool,
}

impl InstanceConfig {
    pub fn build(&self) -> Result<MarketInstance> {
        let rewards = match self.rewards {
            RewardsConfig::Range { min, max, step } => RewardSet::uniform(min, max, step)?,
            RewardsConfig::List(ref v) => RewardSet::new(v.clone())?,
        };
        let types = self
            .types
            .iter()
            .map(|t| {
                let departure = match t.departure {
                    DepartureConfig::ExpFloor { alpha, floor } => {
                        DepartureFunction::ExpFloor { alpha, floor }
                    }
                    DepartureConfig::Linear { alpha, beta } => {
                        DepartureFunction::Linear { alpha, beta }
                    }
                    DepartureConfig::Quadratic { alpha, beta, gamma } => {
                        DepartureFunction::Quadratic { alpha, beta, gamma }
                    }
                    DepartureConfig::EpsNoisy { value, eps } => {
                        DepartureFunction::EpsNoisy { value, eps }
                    }
                    DepartureConfig::Tabulated { ref values } => {
                        if values.len() != rewards.len() {
                            return Err(Error::InvalidInstance(format!(
                                "tabulated departure has {} values for {} rewards",
                                values.len(),
                                rewards.len()
                            )));
                        }
                        DepartureFunction::Tabulated {
                            points: rewards.as_slice().iter().copied().zip(values.iter().copied()).collect(),
                        }
                    }
                };
                Ok(WorkerType {
                    lambda: t.lambda,
                    departure,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        MarketInstance::new(rewards, types, self.revenue, self.allow_vanishing_departure)
    }

    pub fn from_json(s: &str) -> Result<MarketInstance> {
        serde_json::from_str::<Self>(s)?.build()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtomConfig {
    pub r: f64,
    pub p: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistributionConfig {
    Weights(Vec<f64>),
    Atoms(Vec<AtomConfig>),
}

impl DistributionConfig {
    pub fn build(&self, rewards: &RewardSet) -> Result<RewardDistribution> {
        match self {
            Self::Weights(w) => RewardDistribution::from_weights(rewards, w),
            Self::Atoms(a) => RewardDistribution::from_atoms(a.iter().map(|a| (a.r, a.p))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyConfig {
    Static {
        x: DistributionConfig,
    },
    Cyclic {
        xs: Vec<DistributionConfig>,
    },
    Trajectory {
        #[serde(default)]
        prefix: Vec<DistributionConfig>,
        cycle: Vec<DistributionConfig>,
    },
    BeliefBased {
        alpha: f64,
        v1: f64,
        v2: f64,
        #[serde(rename = "D")]
        demand: f64,
    },
}

impl PolicyConfig {
    pub fn build(&self, rewards: &RewardSet) -> Result<Policy> {
        let all = |v: &[DistributionConfig]| {
            v.iter().map(|d| d.build(rewards)).collect::<Result<Vec<_>>>()
        };
        match self {
            Self::Static { x } => Ok(Policy::Static(x.build(rewards)?)),
            Self::Cyclic { xs } => Policy::cyclic(all(xs)?),
            Self::Trajectory { prefix, cycle } => Ok(Policy::Trajectory(Trajectory::new(
                all(prefix)?,
                all(cycle)?,
            )?)),
            Self::BeliefBased {
                alpha,
                v1,
                v2,
                demand,
            } => Ok(Policy::BeliefBased(BeliefBasedParams {
                alpha: *alpha,
                v1: *v1,
                v2: *v2,
                demand: *demand,
            })),
        }
    }

    pub fn from_json(s: &str, rewards: &RewardSet) -> Result<Policy> {
        serde_json::from_str::<Self>(s)?.build(rewards)
    }
}
