use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{DecisionInput, Feedback, PolicyKind, RatePolicy};
use crate::error::Result;
use crate::rate_model::McsIndex;

/// Uniform choice over all MCS indices.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    n_arms: usize,
    rng: ChaCha8Rng,
    initial_rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(n_arms: usize, rng: ChaCha8Rng) -> Self {
        assert!(n_arms > 0);
        RandomPolicy {
            n_arms,
            initial_rng: rng.clone(),
            rng,
        }
    }

    pub fn draw(&mut self) -> McsIndex {
        McsIndex::from_position(self.rng.random_range(0..self.n_arms))
    }
}

impl RatePolicy for RandomPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Random
    }

    fn select(&mut self, _input: &DecisionInput) -> Result<McsIndex> {
        Ok(self.draw())
    }

    fn observe(&mut self, _feedback: &Feedback) -> Result<()> {
        Ok(())
    }

    fn reset(&mut self) {
        self.rng = self.initial_rng.clone();
    }
}
