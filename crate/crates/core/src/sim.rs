//! Frame-by-frame episode loop, traces and regret.
//!
//! Transmission is saturated and back-to-back: at time `t` the policy picks
//! an MCS, the frame occupies `S / r(i)` seconds, and the loop stops at the
//! first selection whose frame would end after the episode horizon. Failed
//! frames are not retried.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, ChannelParams};
use crate::error::{Error, Result};
use crate::error_model::{ErrorModel, OutcomeMode};
use crate::policy::oracle_choice;
use crate::policy::{build_policy, DecisionInput, Feedback, PolicyConfig, PolicyKind, RatePolicy};
use crate::rate_model::{McsIndex, McsTable};
use crate::rng::{keyed_rng, Stream};
use crate::scenario::{BlockageSchedule, Context, Scenario, ScenarioConfig};
use crate::units::linear_to_db;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub start_time: f64,
    pub duration: f64,
    pub mcs: McsIndex,
    /// Linear SNR seen by the frame.
    pub snr: f64,
    pub success_prob: f64,
    pub outcome: bool,
    pub reward: f64,
    pub context: Context,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub policy: PolicyKind,
    pub seed: u64,
    pub duration_s: f64,
    pub frame_bits: f64,
    pub blockage: BlockageSchedule,
    pub frames: Vec<FrameRecord>,
    /// The selection that ended the episode because its frame did not fit.
    pub final_selection: Option<McsIndex>,
}

impl EpisodeTrace {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// End of the last frame (the sum of all airtimes).
    pub fn busy_until(&self) -> f64 {
        self.frames.last().map_or(0.0, |f| f.start_time + f.duration)
    }

    pub fn success_ratio(&self) -> f64 {
        if self.frames.is_empty() {
            return 0.0;
        }
        self.frames.iter().filter(|f| f.outcome).count() as f64 / self.frames.len() as f64
    }

    pub fn delivered_bits(&self) -> f64 {
        self.frames.iter().filter(|f| f.outcome).count() as f64 * self.frame_bits
    }

    /// Writes the per-frame CSV
    /// `start_time,duration,mcs,snr_db,theta,outcome,reward,distance,obstacle_flag`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "start_time,duration,mcs,snr_db,theta,outcome,reward,distance,obstacle_flag"
        )?;
        for f in &self.frames {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                f.start_time,
                f.duration,
                f.mcs,
                linear_to_db(f.snr),
                f.success_prob,
                u8::from(f.outcome),
                f.reward,
                f.context.distance_m,
                u8::from(f.context.obstacle)
            )?;
        }
        Ok(())
    }
}

/// Uniform variate driving the outcome of frame `frame` of episode `seed`.
pub fn outcome_uniform(seed: u64, frame: u64) -> f64 {
    keyed_rng(seed, Stream::Outcome, frame).random()
}

fn check_components(table: &McsTable, error_model: &ErrorModel) -> Result<()> {
    if table.len() != error_model.len() {
        return Err(Error::config(
            "error_model",
            format!(
                "error model covers {} MCS entries but the rate table has {}",
                error_model.len(),
                table.len()
            ),
        ));
    }
    Ok(())
}

/// Runs one episode of `policy` over `scenario`.
pub fn run_episode(
    scenario: &Scenario,
    policy: &mut dyn RatePolicy,
    table: &McsTable,
    channel_params: &ChannelParams,
    error_model: &ErrorModel,
    outcome_mode: OutcomeMode,
) -> Result<EpisodeTrace> {
    check_components(table, error_model)?;
    let channel = ChannelModel::new(channel_params, scenario);
    let horizon = scenario.duration_s;
    let frame_bits = table.phy().frame_bits();
    let max_rate = table.max_rate();
    let mut frames = Vec::new();
    let mut t = 0.0;
    let final_selection = loop {
        let context = scenario.context_at(t)?;
        let state = channel.state_at(t)?;
        let input = DecisionInput {
            time_s: t,
            context,
            snr: state.snr,
            snr_large_scale: state.large_scale_snr(channel_params),
        };
        let mcs = policy.select(&input)?;
        if !table.contains(mcs) {
            return Err(Error::Usage(format!(
                "{} selected MCS {mcs} outside the table",
                policy.kind()
            )));
        }
        let rate = table.rate(mcs);
        let duration = frame_bits / rate;
        if t + duration > horizon {
            break Some(mcs);
        }
        let theta = error_model.theta(mcs, state.snr);
        let outcome = outcome_mode.realize(theta, outcome_uniform(scenario.seed, frames.len() as u64));
        frames.push(FrameRecord {
            start_time: t,
            duration,
            mcs,
            snr: state.snr,
            success_prob: theta,
            outcome,
            reward: if outcome { rate / max_rate } else { 0.0 },
            context,
        });
        t += duration;
        policy.observe(&Feedback {
            mcs,
            success: outcome,
            now_s: t,
        })?;
    };
    Ok(EpisodeTrace {
        policy: policy.kind(),
        seed: scenario.seed,
        duration_s: horizon,
        frame_bits,
        blockage: scenario.blockage,
        frames,
        final_selection,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretSeries {
    pub per_frame: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub total: f64,
}

/// Everything shared by the episodes of one experiment.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub table: Arc<McsTable>,
    pub channel: ChannelParams,
    pub scenario: ScenarioConfig,
    pub error_model: Arc<ErrorModel>,
    pub outcome: OutcomeMode,
    pub policy: PolicyConfig,
}

impl Simulator {
    pub fn new(
        table: McsTable,
        channel: ChannelParams,
        scenario: ScenarioConfig,
        error_model: ErrorModel,
        outcome: OutcomeMode,
        policy: PolicyConfig,
    ) -> Result<Self> {
        channel.validate()?;
        scenario.validate()?;
        policy.validate()?;
        check_components(&table, &error_model)?;
        Ok(Simulator {
            table: Arc::new(table),
            channel,
            scenario,
            error_model: Arc::new(error_model),
            outcome,
            policy,
        })
    }

    pub fn scenario_for(&self, seed: u64) -> Result<Scenario> {
        Scenario::generate(&self.scenario, self.channel.obstacle_bounds(), seed)
    }

    pub fn policy(&self, kind: PolicyKind, seed: u64) -> Box<dyn RatePolicy> {
        build_policy(
            kind,
            &self.policy,
            Arc::clone(&self.table),
            Arc::clone(&self.error_model),
            seed,
        )
    }

    pub fn run(&self, scenario: &Scenario, kind: PolicyKind) -> Result<EpisodeTrace> {
        let mut policy = self.policy(kind, scenario.seed);
        run_episode(
            scenario,
            policy.as_mut(),
            &self.table,
            &self.channel,
            &self.error_model,
            self.outcome,
        )
    }

    pub fn run_seed(&self, seed: u64, kind: PolicyKind) -> Result<EpisodeTrace> {
        self.run(&self.scenario_for(seed)?, kind)
    }

    /// Every `(seed, policy)` pair, in parallel, sorted by seed then policy.
    pub fn run_batch(&self, seeds: &[u64], policies: &[PolicyKind]) -> Result<Vec<EpisodeTrace>> {
        let pairs: Vec<(u64, PolicyKind)> = seeds
            .iter()
            .flat_map(|&s| policies.iter().map(move |&p| (s, p)))
            .collect();
        let mut traces = pairs
            .par_iter()
            .map(|&(seed, kind)| self.run_seed(seed, kind))
            .collect::<Result<Vec<_>>>()?;
        traces.sort_by_key(|t| (t.seed, t.policy));
        Ok(traces)
    }

    /// Per-frame regret against the genie `reference` evaluated at the
    /// trace's own frame boundaries.
    ///
    /// At frame `t` the genie's choice `i*` is realized with the same outcome
    /// variate as the frame itself, and the comparator is the better of the
    /// genie's and the learner's delivered rate, so every term is
    /// non-negative and a genie compared against itself has zero regret.
    pub fn regret(
        &self,
        trace: &EpisodeTrace,
        scenario: &Scenario,
        reference: PolicyKind,
    ) -> Result<RegretSeries> {
        if trace.seed != scenario.seed {
            return Err(Error::Usage(format!(
                "trace seed {} does not match scenario seed {}",
                trace.seed, scenario.seed
            )));
        }
        let large_scale = match reference {
            PolicyKind::Oracle => false,
            PolicyKind::SemiOracle => true,
            other => {
                return Err(Error::config(
                    "regret.reference",
                    format!("`{other}` is not a genie policy"),
                ))
            }
        };
        let channel = ChannelModel::new(&self.channel, scenario);
        let mut per_frame = Vec::with_capacity(trace.frames.len());
        let mut cumulative = Vec::with_capacity(trace.frames.len());
        let mut total = 0.0;
        for (n, f) in trace.frames.iter().enumerate() {
            let state = channel.state_at(f.start_time)?;
            let genie_snr = if large_scale {
                state.large_scale_snr(&self.channel)
            } else {
                state.snr
            };
            let best = oracle_choice(
                &self.table,
                &self.error_model,
                self.policy.oracle.fer_epsilon,
                genie_snr,
            );
            let theta = self.error_model.theta(best, state.snr);
            let genie_ok = self.outcome.realize(theta, outcome_uniform(trace.seed, n as u64));
            let genie = if genie_ok { self.table.rate(best) } else { 0.0 };
            let achieved = if f.outcome { self.table.rate(f.mcs) } else { 0.0 };
            let term = genie.max(achieved) - achieved;
            total += term;
            per_frame.push(term);
            cumulative.push(total);
        }
        Ok(RegretSeries {
            per_frame,
            cumulative,
            total,
        })
    }
}
