//! LinUCB rate adaptation over the context `x = [d / d_max, F]`.
//!
//! Each MCS keeps ridge-regression statistics `A` (2x2, starts at identity)
//! and `b` (starts at zero). The score of arm `i` is
//! `(A_i⁻¹ b_i)·x + α sqrt(xᵀ A_i⁻¹ x)`. The exploration weight `α` is reset
//! to 1 whenever the obstacle flag flips and decays after every transmission.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{argmax_high, DecisionInput, Feedback, PolicyKind, RatePolicy};
use crate::error::{Error, Result};
use crate::rate_model::{McsIndex, McsTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinRaConfig {
    /// Exploration decay rate.
    pub epsilon: f64,
    /// Use `α ← α ε` instead of `α ← α (1 - ε)`.
    pub literal_decay: bool,
}

impl Default for LinRaConfig {
    fn default() -> Self {
        LinRaConfig {
            epsilon: 1e-3,
            literal_decay: false,
        }
    }
}

impl LinRaConfig {
    fn decay_factor(&self) -> f64 {
        if self.literal_decay {
            self.epsilon
        } else {
            1.0 - self.epsilon
        }
    }
}

type Mat2 = [[f64; 2]; 2];

fn inverse(a: &Mat2) -> Mat2 {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [
        [a[1][1] / det, -a[0][1] / det],
        [-a[1][0] / det, a[0][0] / det],
    ]
}

fn mat_vec(m: &Mat2, x: &[f64; 2]) -> [f64; 2] {
    [
        m[0][0] * x[0] + m[0][1] * x[1],
        m[1][0] * x[0] + m[1][1] * x[1],
    ]
}

fn dot(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[derive(Debug, Clone, PartialEq)]
struct ArmStats {
    a: Mat2,
    a_inv: Mat2,
    b: [f64; 2],
    // A⁻¹ b, refreshed on every update.
    weights: [f64; 2],
}

impl ArmStats {
    fn new() -> Self {
        let identity = [[1.0, 0.0], [0.0, 1.0]];
        ArmStats {
            a: identity,
            a_inv: identity,
            b: [0.0; 2],
            weights: [0.0; 2],
        }
    }

    fn score(&self, x: &[f64; 2], alpha: f64) -> f64 {
        let var = dot(x, &mat_vec(&self.a_inv, x)).max(0.0);
        dot(&self.weights, x) + alpha * var.sqrt()
    }

    fn update(&mut self, x: &[f64; 2], reward: f64) {
        for r in 0..2 {
            for c in 0..2 {
                self.a[r][c] += x[r] * x[c];
            }
            self.b[r] += reward * x[r];
        }
        self.a_inv = inverse(&self.a);
        self.weights = mat_vec(&self.a_inv, &self.b);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pending {
    mcs: McsIndex,
    x: [f64; 2],
    flag: bool,
}

#[derive(Debug, Clone)]
pub struct LinRa {
    config: LinRaConfig,
    table: Arc<McsTable>,
    arms: Vec<ArmStats>,
    alpha: f64,
    d_max: f64,
    prev_flag: Option<bool>,
    pending: Option<Pending>,
}

impl LinRa {
    pub fn new(config: LinRaConfig, table: Arc<McsTable>) -> Self {
        let arms = vec![ArmStats::new(); table.len()];
        LinRa {
            config,
            table,
            arms,
            alpha: 1.0,
            d_max: 0.0,
            prev_flag: None,
            pending: None,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    /// Overrides the exploration weight (α = 0 gives pure exploitation).
    pub fn set_alpha(&mut self, alpha: f64) {
        self.alpha = alpha;
    }

    /// `A_i` for the arm at `mcs`.
    pub fn design_matrix(&self, mcs: McsIndex) -> [[f64; 2]; 2] {
        self.arms[mcs.position()].a
    }

    pub fn maintained_inverse(&self, mcs: McsIndex) -> [[f64; 2]; 2] {
        self.arms[mcs.position()].a_inv
    }

    pub fn reward_vector(&self, mcs: McsIndex) -> [f64; 2] {
        self.arms[mcs.position()].b
    }

    /// UCB scores of every arm for context `x` at the current `α`.
    pub fn scores(&self, x: &[f64; 2]) -> Vec<f64> {
        self.arms.iter().map(|a| a.score(x, self.alpha)).collect()
    }

    /// Normalizes the context, handles obstacle transitions and returns the
    /// arm with the highest upper confidence bound.
    pub fn select_for(&mut self, distance_m: f64, obstacle: bool) -> Result<McsIndex> {
        if !(distance_m.is_finite() && distance_m > 0.0) {
            return Err(Error::Domain(format!("distance must be positive, got {distance_m}")));
        }
        self.d_max = self.d_max.max(distance_m);
        let x = [distance_m / self.d_max, if obstacle { 1.0 } else { 0.0 }];
        if self.prev_flag.is_some_and(|prev| prev != obstacle) {
            self.alpha = 1.0;
        }
        let best = argmax_high(self.arms.iter().map(|a| a.score(&x, self.alpha)));
        let mcs = McsIndex::from_position(best);
        self.pending = Some(Pending {
            mcs,
            x,
            flag: obstacle,
        });
        Ok(mcs)
    }

    /// Applies the normalized reward `r(i) y / r(I)` for the pending
    /// selection and decays `α`.
    pub fn observe_outcome(
        &mut self,
        chosen: McsIndex,
        rate_chosen: f64,
        rate_max: f64,
        success: bool,
    ) -> Result<f64> {
        let pending = self
            .pending
            .take()
            .ok_or_else(|| Error::Usage("LinRA observe called without a prior select".into()))?;
        if pending.mcs != chosen {
            return Err(Error::Usage(format!(
                "LinRA observed MCS {chosen} but selected {}",
                pending.mcs
            )));
        }
        let reward = if success { rate_chosen / rate_max } else { 0.0 };
        self.arms[chosen.position()].update(&pending.x, reward);
        self.alpha *= self.config.decay_factor();
        self.prev_flag = Some(pending.flag);
        Ok(reward)
    }
}

impl RatePolicy for LinRa {
    fn kind(&self) -> PolicyKind {
        PolicyKind::LinRa
    }

    fn select(&mut self, input: &DecisionInput) -> Result<McsIndex> {
        self.select_for(input.context.distance_m, input.context.obstacle)
    }

    fn observe(&mut self, feedback: &Feedback) -> Result<()> {
        let rate = self.table.rate(feedback.mcs);
        let max = self.table.max_rate();
        self.observe_outcome(feedback.mcs, rate, max, feedback.success)
            .map(|_| ())
    }

    fn reset(&mut self) {
        *self = LinRa::new(self.config, Arc::clone(&self.table));
    }
}
