//! A laboratory for information-seeking agents in partially observable
//! gridworlds.
//!
//! The crate wires together five pieces:
//!
//! * [`env`] — deterministic, seedable local-view gridworlds (`five_rooms`,
//!   `maze`) with five object types and a 5x5 multi-channel observation.
//! * [`world_model`] — a from-scratch recurrent belief encoder (CNN + GRU)
//!   with K future-frame predictor heads trained by cross entropy.
//! * [`rewards`] — intrinsic reward generators: NDIGO (differential
//!   information gain), prediction error, prediction gain, and a
//!   partially-observable ICM variant.
//! * [`oracle`] — an exact tabular POMDP engine used as ground truth for
//!   open-loop predictions, predictive information gain, and the
//!   NDIGO/information-gain identity.
//! * [`agent`] + [`eval`] + [`harness`] — a desk-scale recurrent Q-learner,
//!   glass-box discovery-loss evaluation, and the experiment driver.
//!
//! All numeric code is generic over the scalar type through [`Scalar`];
//! `f64` is the default used by the harness.

pub mod agent;
pub mod checkpoint;
pub mod config;
pub mod env;
pub mod eval;
pub mod harness;
pub mod nn;
pub mod oracle;
pub mod rewards;
pub mod rng;
pub mod scalar;
pub mod world_model;

pub use scalar::Scalar;

/// Concrete aliases for the main generic types.
pub type WorldModel32 = world_model::WorldModel<f32>;
pub type WorldModel64 = world_model::WorldModel<f64>;
pub type QNet32 = agent::QNet<f32>;
pub type QNet64 = agent::QNet<f64>;
pub type TabularPomdp32 = oracle::TabularPomdp<f32>;
pub type TabularPomdp64 = oracle::TabularPomdp<f64>;
pub type Probe32 = eval::Probe<f32>;
pub type Probe64 = eval::Probe<f64>;
