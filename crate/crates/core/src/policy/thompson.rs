//! Thompson sampling with exponentially discounted Beta posteriors.
//!
//! Arm `i` keeps pseudo-counts `(a_i, b_i)`. On each feedback the counts of
//! the transmitted arm are discounted by `exp(-Δt / w)`, where `Δt` is the
//! time since that arm was last updated, and the outcome is added. Selection
//! samples `X_i ~ Beta(a_i, b_i)` and transmits at `argmax r(i) X_i`.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use super::{argmax_high, DecisionInput, Feedback, PolicyKind, RatePolicy};
use crate::error::{Error, Result};
use crate::rate_model::{McsIndex, McsTable};

/// Pseudo-counts never decay below this.
pub const COUNT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThompsonConfig {
    /// Exponential window `w`, seconds.
    pub window_s: f64,
}

impl Default for ThompsonConfig {
    fn default() -> Self {
        ThompsonConfig { window_s: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct ThompsonSampling {
    config: ThompsonConfig,
    table: Arc<McsTable>,
    successes: Vec<f64>,
    failures: Vec<f64>,
    last_update: Vec<f64>,
    pending: Option<McsIndex>,
    rng: ChaCha8Rng,
    initial_rng: ChaCha8Rng,
}

fn sample_beta<R: Rng>(a: f64, b: f64, rng: &mut R) -> f64 {
    match Beta::new(a, b) {
        Ok(d) => {
            let x: f64 = d.sample(rng);
            if x.is_nan() {
                a / (a + b)
            } else {
                x
            }
        }
        Err(_) => a / (a + b),
    }
}

impl ThompsonSampling {
    pub fn new(config: ThompsonConfig, table: Arc<McsTable>, rng: ChaCha8Rng) -> Self {
        let n = table.len();
        ThompsonSampling {
            config,
            table,
            successes: vec![1.0; n],
            failures: vec![1.0; n],
            last_update: vec![0.0; n],
            pending: None,
            initial_rng: rng.clone(),
            rng,
        }
    }

    /// `(a_i, b_i)` for `mcs`.
    pub fn counts(&self, mcs: McsIndex) -> (f64, f64) {
        (self.successes[mcs.position()], self.failures[mcs.position()])
    }

    /// Replaces the pseudo-counts of one arm.
    pub fn set_counts(&mut self, mcs: McsIndex, a: f64, b: f64) {
        self.successes[mcs.position()] = a.max(COUNT_FLOOR);
        self.failures[mcs.position()] = b.max(COUNT_FLOOR);
    }

    pub fn last_update(&self, mcs: McsIndex) -> f64 {
        self.last_update[mcs.position()]
    }

    /// One Beta draw per arm, then the arm maximizing `r(i) X_i`.
    pub fn sample_arm(&mut self) -> McsIndex {
        let table = &self.table;
        let rng = &mut self.rng;
        let scores = self
            .successes
            .iter()
            .zip(&self.failures)
            .zip(table.entries())
            .map(|((&a, &b), e)| e.phy_rate * sample_beta(a, b, rng));
        let scores: Vec<f64> = scores.collect();
        McsIndex::from_position(argmax_high(scores))
    }

    /// Discounted posterior update for the arm `mcs` at time `now_s`.
    pub fn update(&mut self, mcs: McsIndex, success: bool, now_s: f64) -> Result<()> {
        let i = mcs.position();
        if i >= self.successes.len() {
            return Err(Error::Domain(format!("unknown MCS index {mcs}")));
        }
        let dt = now_s - self.last_update[i];
        if dt < 0.0 {
            return Err(Error::Usage(format!(
                "TS update at {now_s} s precedes last update of MCS {mcs} at {} s",
                self.last_update[i]
            )));
        }
        let discount = (-dt / self.config.window_s).exp();
        let (y, not_y) = if success { (1.0, 0.0) } else { (0.0, 1.0) };
        self.successes[i] = (self.successes[i] * discount + y).max(COUNT_FLOOR);
        self.failures[i] = (self.failures[i] * discount + not_y).max(COUNT_FLOOR);
        self.last_update[i] = now_s;
        Ok(())
    }
}

impl RatePolicy for ThompsonSampling {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Ts
    }

    fn select(&mut self, _input: &DecisionInput) -> Result<McsIndex> {
        let mcs = self.sample_arm();
        self.pending = Some(mcs);
        Ok(mcs)
    }

    fn observe(&mut self, feedback: &Feedback) -> Result<()> {
        match self.pending.take() {
            Some(m) if m == feedback.mcs => self.update(m, feedback.success, feedback.now_s),
            Some(m) => Err(Error::Usage(format!(
                "TS observed MCS {} but selected {m}",
                feedback.mcs
            ))),
            None => Err(Error::Usage("TS observe called without a prior select".into())),
        }
    }

    fn reset(&mut self) {
        let rng = self.initial_rng.clone();
        *self = ThompsonSampling::new(self.config, Arc::clone(&self.table), rng);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate_model::{build_mcs_table, PhyConfig};
    use crate::rng::{stream_rng, Stream};

    fn ts(seed: u64) -> ThompsonSampling {
        let t = Arc::new(build_mcs_table(&PhyConfig::default()).unwrap());
        ThompsonSampling::new(ThompsonConfig::default(), t, stream_rng(seed, Stream::Policy))
    }

    fn idx(i: usize) -> McsIndex {
        McsIndex::new(i).unwrap()
    }

    #[test]
    fn zero_elapsed_success_adds_one() {
        let mut p = ts(1);
        p.set_counts(idx(3), 2.5, 4.0);
        p.last_update[2] = 0.7;
        p.update(idx(3), true, 0.7).unwrap();
        assert_eq!(p.counts(idx(3)), (3.5, 4.0));
    }

    #[test]
    fn one_window_failure() {
        let mut p = ts(1);
        p.set_counts(idx(2), 3.0, 2.0);
        p.update(idx(2), false, 1.0).unwrap();
        let (a, b) = p.counts(idx(2));
        let e = std::f64::consts::E;
        assert!((a - 3.0 / e).abs() < 1e-12);
        assert!((b - (2.0 / e + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn periodic_successes_reach_fixed_point() {
        let mut p = ts(1);
        for k in 1..=200 {
            p.update(idx(5), true, k as f64).unwrap();
        }
        let fixed = 1.0 / (1.0 - (-1.0f64).exp());
        assert!((p.counts(idx(5)).0 - fixed).abs() < 1e-9);
        assert!((fixed - 1.582).abs() < 1e-3);
    }

    #[test]
    fn counts_stay_positive() {
        let mut p = ts(2);
        for k in 0..10_000 {
            p.update(idx(1), k % 7 == 0, k as f64 * 50.0).unwrap();
            let (a, b) = p.counts(idx(1));
            assert!(a > 0.0 && b > 0.0);
        }
    }

    #[test]
    fn rejects_time_going_backwards() {
        let mut p = ts(3);
        p.update(idx(4), true, 2.0).unwrap();
        assert!(matches!(p.update(idx(4), true, 1.0), Err(Error::Usage(_))));
    }

    #[test]
    fn uniform_priors_favour_top_rate() {
        let mut p = ts(4);
        let mut hist = [0usize; 8];
        for _ in 0..100_000 {
            hist[p.sample_arm().position()] += 1;
        }
        let top = hist[7];
        assert!(hist[..7].iter().all(|&h| h < top), "{hist:?}");
    }

    #[test]
    fn concentrated_posterior_wins() {
        let mut p = ts(5);
        for i in 1..=8 {
            p.set_counts(idx(i), 1.0, 500.0);
        }
        p.set_counts(idx(3), 500.0, 1.0);
        let n = 10_000;
        let hits = (0..n).filter(|_| p.sample_arm() == idx(3)).count();
        assert!(hits as f64 / n as f64 > 0.99);
    }

    #[test]
    fn single_arm_table() {
        let mut t = build_mcs_table(&PhyConfig::default()).unwrap();
        let json = serde_json::to_value(&t).unwrap();
        let mut v = json.clone();
        v["entries"] = serde_json::Value::Array(vec![json["entries"][0].clone()]);
        t = serde_json::from_value(v).unwrap();
        let mut p = ThompsonSampling::new(
            ThompsonConfig::default(),
            Arc::new(t),
            stream_rng(6, Stream::Policy),
        );
        assert!((0..100).all(|_| p.sample_arm() == idx(1)));
    }
}
