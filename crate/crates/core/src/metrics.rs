//! Convergence time and windowed throughput around the two channel
//! transitions of an episode (LoS→NLoS and NLoS→LoS), plus cross-seed
//! aggregation.
//!
//! Frames count toward the window that contains their start time. A learner
//! has converged at the start of the first 1 s window (sliding in 100 ms
//! steps) from which it and every later window up to the end of the period
//! delivers at least 95 % of the reference genie's throughput in the same
//! window.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::PolicyKind;
use crate::sim::EpisodeTrace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub window_s: f64,
    pub stride_s: f64,
    /// Fraction of the reference throughput a converged learner must keep.
    pub ratio: f64,
    /// Genie used for the convergence test (`oracle` or `semi-oracle`).
    pub reference: PolicyKind,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            window_s: 1.0,
            stride_s: 0.1,
            ratio: 0.95,
            reference: PolicyKind::Oracle,
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_s.is_finite() && self.window_s > 0.0) {
            return Err(Error::config("metrics.window_s", "must be positive"));
        }
        if !(self.stride_s.is_finite() && self.stride_s > 0.0) {
            return Err(Error::config("metrics.stride_s", "must be positive"));
        }
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(Error::config("metrics.ratio", "must lie in (0, 1]"));
        }
        if !matches!(self.reference, PolicyKind::Oracle | PolicyKind::SemiOracle) {
            return Err(Error::config(
                "metrics.reference",
                "must be `oracle` or `semi-oracle`",
            ));
        }
        Ok(())
    }
}

/// Prefix counts of delivered frames, for O(log n) window queries.
#[derive(Debug, Clone)]
pub struct DeliveryIndex {
    starts: Vec<f64>,
    // delivered[k] = successes among frames[..k]
    delivered: Vec<u64>,
    frame_bits: f64,
}

impl DeliveryIndex {
    pub fn new(trace: &EpisodeTrace) -> Self {
        let mut delivered = Vec::with_capacity(trace.frames.len() + 1);
        delivered.push(0);
        let mut acc = 0;
        for f in &trace.frames {
            acc += u64::from(f.outcome);
            delivered.push(acc);
        }
        DeliveryIndex {
            starts: trace.frames.iter().map(|f| f.start_time).collect(),
            delivered,
            frame_bits: trace.frame_bits,
        }
    }

    /// Bits delivered by frames starting in `[from, to)`.
    pub fn bits_between(&self, from: f64, to: f64) -> f64 {
        let lo = self.starts.partition_point(|&s| s < from);
        let hi = self.starts.partition_point(|&s| s < to);
        if hi <= lo {
            return 0.0;
        }
        (self.delivered[hi] - self.delivered[lo]) as f64 * self.frame_bits
    }

    pub fn window(&self, start: f64, length: f64) -> WindowedThroughput {
        let bits = self.bits_between(start, start + length);
        WindowedThroughput {
            window_start: start,
            window_length: length,
            bits_delivered: bits,
            throughput: bits / length,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowedThroughput {
    pub window_start: f64,
    pub window_length: f64,
    pub bits_delivered: f64,
    pub throughput: f64,
}

pub fn window_throughput(trace: &EpisodeTrace, start: f64, length: f64) -> WindowedThroughput {
    DeliveryIndex::new(trace).window(start, length)
}

fn window_count(event_time: f64, period_end: f64, cfg: &MetricsConfig) -> Result<usize> {
    let span = period_end - event_time;
    if !(span >= cfg.window_s) {
        return Err(Error::Domain(format!(
            "period [{event_time}, {period_end}] shorter than the {} s window; metric undefined",
            cfg.window_s
        )));
    }
    Ok(((span - cfg.window_s) / cfg.stride_s + 1e-9).floor() as usize + 1)
}

fn convergence_from_index(
    trace: &DeliveryIndex,
    reference: &DeliveryIndex,
    event_time: f64,
    period_end: f64,
    cfg: &MetricsConfig,
) -> Result<Option<f64>> {
    let n = window_count(event_time, period_end, cfg)?;
    // Scan backwards for the last window that misses the target.
    let mut first_good = 0;
    for k in (0..n).rev() {
        let start = event_time + k as f64 * cfg.stride_s;
        let own = trace.bits_between(start, start + cfg.window_s);
        let target = reference.bits_between(start, start + cfg.window_s);
        if own < cfg.ratio * target {
            first_good = k + 1;
            break;
        }
    }
    Ok((first_good < n).then_some(first_good as f64 * cfg.stride_s))
}

/// Delay after `event_time` until `trace` stays within `cfg.ratio` of
/// `reference`, or `None` if it never does before `period_end`.
pub fn convergence_time(
    trace: &EpisodeTrace,
    reference: &EpisodeTrace,
    event_time: f64,
    period_end: f64,
    cfg: &MetricsConfig,
) -> Result<Option<f64>> {
    convergence_from_index(
        &DeliveryIndex::new(trace),
        &DeliveryIndex::new(reference),
        event_time,
        period_end,
        cfg,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transition {
    /// LoS → NLoS; the period is the NLoS interval.
    Nlos,
    /// NLoS → LoS; the period runs to the end of the episode.
    SecondLos,
}

impl Transition {
    pub const ALL: [Transition; 2] = [Transition::Nlos, Transition::SecondLos];

    pub fn name(self) -> &'static str {
        match self {
            Transition::Nlos => "nlos",
            Transition::SecondLos => "second_los",
        }
    }

    /// `(event_time, period_end)` for this transition in `trace`.
    pub fn period(self, trace: &EpisodeTrace) -> (f64, f64) {
        let b = &trace.blockage;
        match self {
            Transition::Nlos => (b.nlos_start, b.nlos_end),
            Transition::SecondLos => (b.nlos_end, trace.duration_s),
        }
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    pub seed: u64,
    pub policy: PolicyKind,
    pub transition: Transition,
    pub event_time: f64,
    pub period_end: f64,
    /// `None` for non-learning policies.
    pub converged: Option<bool>,
    pub convergence_time: Option<f64>,
    /// End of the convergence-throughput interval.
    pub convergence_end: f64,
    pub reaction_tput: f64,
    pub convergence_tput: f64,
    pub stability_tput: f64,
    pub oracle_reaction_tput: f64,
    pub oracle_convergence_tput: f64,
    pub oracle_stability_tput: f64,
}

fn ratio(value: f64, oracle: f64) -> f64 {
    if oracle > 0.0 {
        value / oracle
    } else {
        // The genie delivered nothing in this window; treat as parity.
        1.0
    }
}

impl TransitionReport {
    pub fn reaction_norm(&self) -> f64 {
        ratio(self.reaction_tput, self.oracle_reaction_tput)
    }

    pub fn convergence_norm(&self) -> f64 {
        ratio(self.convergence_tput, self.oracle_convergence_tput)
    }

    pub fn stability_norm(&self) -> f64 {
        ratio(self.stability_tput, self.oracle_stability_tput)
    }
}

struct Throughputs {
    reaction: f64,
    convergence: f64,
    stability: f64,
}

fn throughputs(idx: &DeliveryIndex, event: f64, end: f64, conv_end: f64, w: f64) -> Throughputs {
    Throughputs {
        reaction: idx.window(event, w).throughput,
        convergence: idx.bits_between(event, conv_end) / (conv_end - event),
        stability: idx.window(end - w, w).throughput,
    }
}

/// Report for one trace at one transition.
///
/// `convergence_end` closes the convergence-throughput interval; normally
/// the latest convergence instant among the learners on this seed (see
/// [`seed_reports`]).
pub fn transition_report(
    trace: &EpisodeTrace,
    oracle: &EpisodeTrace,
    reference: &EpisodeTrace,
    which: Transition,
    convergence_end: f64,
    cfg: &MetricsConfig,
) -> Result<TransitionReport> {
    let (event, end) = which.period(trace);
    let idx = DeliveryIndex::new(trace);
    let (converged, convergence_time) = if trace.policy.is_learning() {
        let c = convergence_from_index(&idx, &DeliveryIndex::new(reference), event, end, cfg)?;
        (Some(c.is_some()), c)
    } else {
        (None, None)
    };
    let own = throughputs(&idx, event, end, convergence_end, cfg.window_s);
    let genie = throughputs(&DeliveryIndex::new(oracle), event, end, convergence_end, cfg.window_s);
    Ok(TransitionReport {
        seed: trace.seed,
        policy: trace.policy,
        transition: which,
        event_time: event,
        period_end: end,
        converged,
        convergence_time,
        convergence_end,
        reaction_tput: own.reaction,
        convergence_tput: own.convergence,
        stability_tput: own.stability,
        oracle_reaction_tput: genie.reaction,
        oracle_convergence_tput: genie.convergence,
        oracle_stability_tput: genie.stability,
    })
}

/// Reports for every trace of one seed at both transitions.
///
/// `traces` must all share a seed and include the oracle and the
/// configured reference genie.
pub fn seed_reports(traces: &[EpisodeTrace], cfg: &MetricsConfig) -> Result<Vec<TransitionReport>> {
    let find = |kind: PolicyKind| {
        traces.iter().find(|t| t.policy == kind).ok_or_else(|| {
            Error::Usage(format!("metrics need a `{kind}` trace for every seed"))
        })
    };
    let oracle = find(PolicyKind::Oracle)?;
    let reference = find(cfg.reference)?;
    if traces.iter().any(|t| t.seed != oracle.seed) {
        return Err(Error::Usage("seed_reports called with mixed seeds".into()));
    }
    let mut out = Vec::new();
    for which in Transition::ALL {
        let (event, end) = which.period(oracle);
        let mut slowest = event;
        for t in traces.iter().filter(|t| t.policy.is_learning()) {
            match convergence_time(t, reference, event, end, cfg)? {
                Some(c) => slowest = slowest.max(event + c),
                None => slowest = end,
            }
        }
        if !traces.iter().any(|t| t.policy.is_learning()) {
            slowest = end;
        }
        let conv_end = slowest.max(event + cfg.stride_s).min(end);
        for t in traces {
            out.push(transition_report(t, oracle, reference, which, conv_end, cfg)?);
        }
    }
    Ok(out)
}

/// Five-number summary with 1.5 IQR whiskers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Lowest value not below `q1 - 1.5 IQR`.
    pub whisker_low: f64,
    /// Highest value not above `q3 + 1.5 IQR`.
    pub whisker_high: f64,
    pub min: f64,
    pub max: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::Domain("cannot summarize an empty sample".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q1 = quantile(&v, 0.25);
    let q3 = quantile(&v, 0.75);
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    Ok(Summary {
        count: v.len(),
        mean: v.iter().sum::<f64>() / v.len() as f64,
        median: quantile(&v, 0.5),
        q1,
        q3,
        whisker_low: *v.iter().find(|&&x| x >= lo_fence).unwrap_or(&v[0]),
        whisker_high: *v.iter().rev().find(|&&x| x <= hi_fence).unwrap_or(&v[v.len() - 1]),
        min: v[0],
        max: v[v.len() - 1],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalized {
    pub reaction: f64,
    pub convergence: f64,
    pub stability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionAggregate {
    pub policy: PolicyKind,
    pub transition: Transition,
    pub seeds: usize,
    pub reaction: Summary,
    pub convergence: Summary,
    pub stability: Summary,
    /// Mean throughput divided by the oracle's mean throughput.
    pub normalized: Normalized,
    /// Fraction of seeds that converged (learning policies only).
    pub convergence_ratio: Option<f64>,
    /// Mean convergence time over converged seeds.
    pub mean_convergence_time: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Cross-seed statistics per `(policy, transition)`, in policy order.
pub fn aggregate(reports: &[TransitionReport]) -> Result<Vec<TransitionAggregate>> {
    if reports.is_empty() {
        return Err(Error::Domain("no reports to aggregate".into()));
    }
    let mut groups: BTreeMap<(PolicyKind, Transition), Vec<&TransitionReport>> = BTreeMap::new();
    for r in reports {
        groups.entry((r.policy, r.transition)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((policy, transition), rs)| {
            let col = |f: fn(&TransitionReport) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<_>>();
            let norm = |own: fn(&TransitionReport) -> f64, genie: fn(&TransitionReport) -> f64| {
                ratio(mean(rs.iter().map(|r| own(r))), mean(rs.iter().map(|r| genie(r))))
            };
            let (convergence_ratio, mean_convergence_time) = if policy.is_learning() {
                let times: Vec<f64> = rs.iter().filter_map(|r| r.convergence_time).collect();
                let frac = times.len() as f64 / rs.len() as f64;
                (Some(frac), (!times.is_empty()).then(|| mean(times.into_iter())))
            } else {
                (None, None)
            };
            Ok(TransitionAggregate {
                policy,
                transition,
                seeds: rs.len(),
                reaction: summarize(&col(|r| r.reaction_tput))?,
                convergence: summarize(&col(|r| r.convergence_tput))?,
                stability: summarize(&col(|r| r.stability_tput))?,
                normalized: Normalized {
                    reaction: norm(|r| r.reaction_tput, |r| r.oracle_reaction_tput),
                    convergence: norm(|r| r.convergence_tput, |r| r.oracle_convergence_tput),
                    stability: norm(|r| r.stability_tput, |r| r.oracle_stability_tput),
                },
                convergence_ratio,
                mean_convergence_time,
            })
        })
        .collect()
}

/// CSV header matching [`TransitionReport::csv_row`].
pub const METRICS_CSV_HEADER: &str = "seed,policy,transition,event_time,period_end,converged,convergence_time,convergence_end,reaction_tput,convergence_tput,stability_tput,reaction_norm,convergence_norm,stability_norm";

impl TransitionReport {
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.seed,
            self.policy,
            self.transition,
            self.event_time,
            self.period_end,
            opt(self.converged.map(|c| u8::from(c).to_string())),
            opt(self.convergence_time.map(|c| c.to_string())),
            self.convergence_end,
            self.reaction_tput,
            self.convergence_tput,
            self.stability_tput,
            self.reaction_norm(),
            self.convergence_norm(),
            self.stability_norm(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate_model::McsIndex;
    use crate::scenario::{BlockageSchedule, Context};
    use crate::sim::FrameRecord;

    /// Back-to-back 1 ms frames over `[0, 10)`; `ok(t)` decides delivery.
    fn synthetic(policy: PolicyKind, ok: impl Fn(f64) -> bool) -> EpisodeTrace {
        let frames = (0..10_000)
            .map(|k| {
                let t = k as f64 * 1e-3;
                FrameRecord {
                    start_time: t,
                    duration: 1e-3,
                    mcs: McsIndex::LOWEST,
                    snr: 1.0,
                    success_prob: 1.0,
                    outcome: ok(t),
                    reward: 0.0,
                    context: Context {
                        distance_m: 10.0,
                        obstacle: false,
                    },
                }
            })
            .collect();
        EpisodeTrace {
            policy,
            seed: 1,
            duration_s: 10.0,
            frame_bits: 1000.0,
            blockage: BlockageSchedule {
                nlos_start: 2.0,
                nlos_end: 6.0,
                event_loss_db: 12.0,
            },
            frames,
            final_selection: None,
        }
    }

    #[test]
    fn self_convergence_is_immediate() {
        let o = synthetic(PolicyKind::Oracle, |_| true);
        let c = convergence_time(&o, &o, 2.0, 6.0, &MetricsConfig::default()).unwrap();
        assert_eq!(c, Some(0.0));
    }

    #[test]
    fn delayed_match_converges_on_grid() {
        let o = synthetic(PolicyKind::Oracle, |_| true);
        let p = synthetic(PolicyKind::LinRa, |t| !(2.0..2.375).contains(&t));
        let c = convergence_time(&p, &o, 2.0, 6.0, &MetricsConfig::default())
            .unwrap()
            .unwrap();
        assert!((c - 0.375).abs() <= 0.1 + 1e-9, "{c}");
    }

    #[test]
    fn silent_trace_never_converges() {
        let o = synthetic(PolicyKind::Oracle, |_| true);
        let p = synthetic(PolicyKind::Ts, |_| false);
        assert_eq!(convergence_time(&p, &o, 2.0, 6.0, &MetricsConfig::default()).unwrap(), None);
        assert!(convergence_time(&p, &o, 2.0, 2.5, &MetricsConfig::default()).is_err());
    }

    #[test]
    fn late_dip_postpones_convergence() {
        let o = synthetic(PolicyKind::Oracle, |_| true);
        let p = synthetic(PolicyKind::LinRa, |t| !(4.0..4.2).contains(&t));
        let c = convergence_time(&p, &o, 2.0, 6.0, &MetricsConfig::default())
            .unwrap()
            .unwrap();
        assert!((c - 2.2).abs() < 1e-9, "{c}");
    }

    #[test]
    fn oracle_self_report_is_unity() {
        let o = synthetic(PolicyKind::Oracle, |t| (t * 7.0).sin() > -0.5);
        let reports = seed_reports(std::slice::from_ref(&o), &MetricsConfig::default()).unwrap();
        assert_eq!(reports.len(), 2);
        for r in &reports {
            assert_eq!(r.reaction_norm(), 1.0);
            assert_eq!(r.convergence_norm(), 1.0);
            assert_eq!(r.stability_norm(), 1.0);
            assert_eq!(r.converged, None);
        }
    }

    #[test]
    fn step_trace_report() {
        let o = synthetic(PolicyKind::Oracle, |_| true);
        let p = synthetic(PolicyKind::LinRa, |t| t >= 3.0);
        let r = transition_report(&p, &o, &o, Transition::Nlos, 4.0, &MetricsConfig::default())
            .unwrap();
        assert_eq!(r.reaction_norm(), 0.0);
        assert_eq!(r.stability_norm(), 1.0);
        assert!((r.convergence_norm() - 0.5).abs() < 1e-12);
        assert_eq!(r.convergence_time, Some(1.0));
    }

    #[test]
    fn windows_tile_the_period() {
        let p = synthetic(PolicyKind::Random, |t| (t * 13.0).cos() > 0.2);
        let idx = DeliveryIndex::new(&p);
        let total = idx.bits_between(2.0, 6.0);
        let tiled: f64 = (0..4).map(|k| idx.window(2.0 + k as f64, 1.0).bits_delivered).sum();
        assert!(((tiled - total) / total).abs() < 1e-9);
    }

    #[test]
    fn summary_statistics() {
        let s = summarize(&[2.0; 5]).unwrap();
        assert_eq!((s.q1, s.q3, s.mean, s.median), (2.0, 2.0, 2.0, 2.0));
        let s = summarize(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (2.0, 3.0, 4.0));
        assert_eq!(s.whisker_high, 4.0);
        assert_eq!(s.whisker_low, 1.0);
        assert!(summarize(&[]).is_err());
    }

    fn report(policy: PolicyKind, seed: u64, tput: f64, conv: Option<f64>) -> TransitionReport {
        TransitionReport {
            seed,
            policy,
            transition: Transition::Nlos,
            event_time: 0.0,
            period_end: 3.0,
            converged: policy.is_learning().then_some(conv.is_some()),
            convergence_time: conv,
            convergence_end: 1.0,
            reaction_tput: tput,
            convergence_tput: tput,
            stability_tput: tput,
            oracle_reaction_tput: 1.0,
            oracle_convergence_tput: 1.0,
            oracle_stability_tput: 1.0,
        }
    }

    #[test]
    fn aggregate_normalizes_means() {
        let rs = vec![
            report(PolicyKind::Random, 1, 0.5, None),
            report(PolicyKind::Random, 2, 1.5, None),
        ];
        let agg = aggregate(&rs).unwrap();
        assert_eq!(agg[0].normalized.reaction, 1.0);
        assert_eq!(agg[0].convergence_ratio, None);
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn aggregate_convergence_ratio() {
        let rs: Vec<_> = (0..100)
            .map(|s| report(PolicyKind::LinRa, s, 1.0, (s != 0).then_some(0.3)))
            .collect();
        let agg = aggregate(&rs).unwrap();
        assert!((agg[0].convergence_ratio.unwrap() - 0.99).abs() < 1e-12);
        assert!((agg[0].mean_convergence_time.unwrap() - 0.3).abs() < 1e-12);
    }
}
