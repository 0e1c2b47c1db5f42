//! Multi-sensor remote state estimation over MIMO fading channels with
//! semantic over-the-air (SemOTA) scheduling.
//!
//! The crate simulates a linear plant observed by distributed sensors that
//! transmit analog measurements over shared fading channels. Active
//! transmissions superpose at the receiver, where a Kalman filter fuses
//! them. Scheduling policies decide, slot by slot, which sensors are worth
//! their transmit power:
//!
//! - an exact finite-horizon dynamic-programming oracle (small instances),
//! - the SemOTA policy, which minimizes a closed-form upper bound on the
//!   DP Q-function obtained from a PSD cone decomposition of the
//!   aggregated channel Gram matrix,
//! - threshold/ALOHA, covariance-threshold/TDMA, and always-on OTA
//!   baselines.
//!
//! Everything is deterministic given named seeds; the [`experiments`]
//! module provides the Monte-Carlo harness, sweeps, and CSV export used by
//! the `semota` command-line tool.

pub mod baselines;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod scheduler;
pub mod validate;

pub use error::{Error, Result};
pub use estimator::EstimatorState;
pub use model::{ChannelDraw, NoiseMode, PlantModel, ScheduleDecision, SensorSuite, SimState};
pub use rng::RngStream;
pub use scheduler::{ChannelStats, GramDecomposition, HorizonContext, MonteCarloConfig, ScheduleMode};
