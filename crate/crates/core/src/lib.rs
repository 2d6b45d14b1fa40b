//! Context-aware rate adaptation for predictive flying networks.
//!
//! The crate couples a link-level simulator (free-space path loss, one
//! obstacle blockage event, Rician block fading, per-MCS frame error model)
//! with five rate-adaptation policies: LinUCB over `[distance, obstacle]`
//! context (LinRA), discounted Thompson sampling, uniform random, and two
//! genie baselines. The [`experiment`] module runs seed sweeps and produces
//! the convergence and throughput statistics computed in [`metrics`].

pub mod channel;
pub mod config;
pub mod error;
pub mod error_model;
pub mod experiment;
pub mod metrics;
pub mod policy;
pub mod rate_model;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod units;

pub use error::{Error, Result};
pub use policy::PolicyKind;
pub use rate_model::McsIndex;
