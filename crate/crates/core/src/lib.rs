//! Energy-efficient data collection by a rotary-wing UAV from ground IoT
//! devices, assisted by an intelligent reflecting surface (IRS), under a
//! known-position jammer.
//!
//! The crate holds the world model ([`scenario`], [`channel`], [`energy`],
//! [`metrics`]), one solver per optimization block ([`power`], [`schedule`],
//! [`irs`], [`trajectory`]), a small barrier-method convex solver used by the
//! trajectory block ([`convex`], [`fractional`]) and the alternating
//! optimization driver ([`orchestrator`]).

pub mod channel;
pub mod convex;
pub mod energy;
pub mod error;
pub mod fractional;
pub mod irs;
pub mod metrics;
pub mod orchestrator;
pub mod power;
pub mod scenario;
pub mod schedule;
pub mod trajectory;

pub use error::{Error, Result};
pub use scenario::{Scenario, Setup, Trajectory, Vec3};
