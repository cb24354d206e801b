//! Compensation design for platforms whose workers leave when underpaid.
//!
//! * [`market`] holds the primitives and fluid supply/profit.
//! * [`fluid`] solves for optimal stationary policies.
//! * [`sim`] simulates finite markets.
//! * [`policy`] covers cyclic, fairness and belief-based policies.
//! * [`noisy`] specializes to outside options with uniform noise.
//! * [`experiments`] regenerates the figures and tables.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod fluid;
pub mod market;
pub mod noisy;
pub mod par;
pub mod policy;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use market::{MarketInstance, RewardDistribution, RewardSet};
pub use policy::Policy;
