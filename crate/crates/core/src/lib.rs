//! Write-back cache overload control: a tick-based storage simulator, a
//! tabular Q-learning bandwidth controller with prioritized replay, the
//! CoTo and bypass baselines, and an experiment harness.
//!
//! The controller, learner, baselines and metric formulas are generic over
//! [`Scalar`] (`f32` or `f64`); the aliases below fix the precision.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod collector;
pub mod controller;
pub mod error;
pub mod executor;
pub mod harness;
pub mod metrics;
pub mod rl;
pub mod scalar;
pub mod seed;
pub mod sim_env;
mod textio;
pub mod workload;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type QTableF64 = rl::QTable<f64>;
pub type QTableF32 = rl::QTable<f32>;
pub type PerLearnerF64 = rl::PerLearner<f64>;
pub type PerLearnerF32 = rl::PerLearner<f32>;
pub type LQoCoF64 = controller::LQoCo<f64>;
pub type LQoCoF32 = controller::LQoCo<f32>;
pub type AdaptiveBoundF64 = controller::AdaptiveBound<f64>;
pub type AdaptiveBoundF32 = controller::AdaptiveBound<f32>;
pub type CoToF64 = baselines::CoTo<f64>;
pub type CoToF32 = baselines::CoTo<f32>;
pub type StateCollectorF64 = collector::StateCollector<f64>;
pub type StateCollectorF32 = collector::StateCollector<f32>;
