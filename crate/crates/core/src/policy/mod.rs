//! Rate-adaptation policies behind one select/observe interface.
//!
//! | name          | knowledge used                                      |
//! |---------------|-----------------------------------------------------|
//! | `linra`       | link distance + obstacle flag, past rewards (LinUCB) |
//! | `ts`          | past outcomes only (discounted Thompson sampling)    |
//! | `random`      | nothing                                              |
//! | `oracle`      | instantaneous SNR incl. fading, error model          |
//! | `semi-oracle` | large-scale SNR (no fading), error model             |
//!
//! Every argmax in this module breaks ties toward the highest data rate.

mod linra;
mod oracle;
mod random;
mod thompson;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use linra::{LinRa, LinRaConfig};
pub use oracle::{oracle_choice, Oracle, OracleConfig};
pub use random::RandomPolicy;
pub use thompson::{ThompsonConfig, ThompsonSampling, COUNT_FLOOR};

use crate::error::{Error, Result};
use crate::error_model::ErrorModel;
use crate::rate_model::{McsIndex, McsTable};
use crate::rng::{stream_rng, Stream};
use crate::scenario::Context;

/// Everything a policy may look at before a transmission. Policies without
/// channel knowledge ignore the SNR fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionInput {
    pub time_s: f64,
    pub context: Context,
    /// Instantaneous SNR (linear), including small-scale fading.
    pub snr: f64,
    /// SNR (linear) from path loss and obstacles only.
    pub snr_large_scale: f64,
}

/// Result of the transmission chosen by the last `select`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feedback {
    pub mcs: McsIndex,
    pub success: bool,
    /// End of the transmission, seconds.
    pub now_s: f64,
}

pub trait RatePolicy: Send {
    fn kind(&self) -> PolicyKind;

    /// Chooses the MCS for the next frame; always an index in the table.
    fn select(&mut self, input: &DecisionInput) -> Result<McsIndex>;

    fn observe(&mut self, feedback: &Feedback) -> Result<()>;

    /// Back to the initial state.
    fn reset(&mut self);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "linra")]
    LinRa,
    #[serde(rename = "ts")]
    Ts,
    #[serde(rename = "random")]
    Random,
    #[serde(rename = "oracle")]
    Oracle,
    #[serde(rename = "semi-oracle")]
    SemiOracle,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::LinRa,
        PolicyKind::Ts,
        PolicyKind::Random,
        PolicyKind::Oracle,
        PolicyKind::SemiOracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::LinRa => "linra",
            PolicyKind::Ts => "ts",
            PolicyKind::Random => "random",
            PolicyKind::Oracle => "oracle",
            PolicyKind::SemiOracle => "semi-oracle",
        }
    }

    /// Policies that adapt from observed outcomes and so have a convergence
    /// time.
    pub fn is_learning(self) -> bool {
        matches!(self, PolicyKind::LinRa | PolicyKind::Ts)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| {
                Error::config(
                    "run.policies",
                    format!("unknown policy `{s}` (expected linra|ts|random|oracle|semi-oracle)"),
                )
            })
    }
}

/// Hyperparameters for every policy.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub linra: LinRaConfig,
    pub ts: ThompsonConfig,
    pub oracle: OracleConfig,
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        let eps = self.linra.epsilon;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::config("linra.epsilon", "must lie in (0, 1)"));
        }
        if !(self.ts.window_s.is_finite() && self.ts.window_s > 0.0) {
            return Err(Error::config("ts.window", "must be positive"));
        }
        let fe = self.oracle.fer_epsilon;
        if !(fe > 0.0 && fe < 1.0) {
            return Err(Error::config("oracle.fer_epsilon", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Builds a fresh policy instance for one episode.
pub fn build_policy(
    kind: PolicyKind,
    config: &PolicyConfig,
    table: Arc<McsTable>,
    error_model: Arc<ErrorModel>,
    seed: u64,
) -> Box<dyn RatePolicy> {
    match kind {
        PolicyKind::LinRa => Box::new(LinRa::new(config.linra, table)),
        PolicyKind::Ts => Box::new(ThompsonSampling::new(
            config.ts,
            table,
            stream_rng(seed, Stream::Policy),
        )),
        PolicyKind::Random => {
            Box::new(RandomPolicy::new(table.len(), stream_rng(seed, Stream::Policy)))
        }
        PolicyKind::Oracle => Box::new(Oracle::full(config.oracle, table, error_model)),
        PolicyKind::SemiOracle => Box::new(Oracle::semi(config.oracle, table, error_model)),
    }
}

/// Index of the largest score; ties go to the later (higher-rate) arm.
pub(crate) fn argmax_high(scores: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, s) in scores.into_iter().enumerate() {
        if s >= best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in PolicyKind::ALL {
            assert_eq!(k.name().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("minstrel".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn argmax_prefers_later_on_ties() {
        assert_eq!(argmax_high([1.0, 1.0, 0.5]), 1);
        assert_eq!(argmax_high([0.0, 2.0, 1.0]), 1);
        assert_eq!(argmax_high([3.0]), 0);
    }
}
