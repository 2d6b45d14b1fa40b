//! Episode engine, policies, regret and metrics.

use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use linra::channel::ChannelParams;
use linra::error_model::{ErrorModel, OutcomeMode};
use linra::metrics::{
    convergence_time, seed_reports, summarize, window_throughput, DeliveryIndex, MetricsConfig,
    Transition,
};
use linra::policy::{
    oracle_choice, DecisionInput, Feedback, Oracle, OracleConfig, PolicyConfig, RandomPolicy,
    RatePolicy, ThompsonConfig, ThompsonSampling, COUNT_FLOOR,
};
use linra::rate_model::{build_mcs_table, McsTable, PhyConfig};
use linra::scenario::{Context, ScenarioConfig};
use linra::sim::{outcome_uniform, run_episode, EpisodeTrace, Simulator};
use linra::{McsIndex, PolicyKind, Result};

fn idx(i: usize) -> McsIndex {
    McsIndex::new(i).unwrap()
}

fn table() -> Arc<McsTable> {
    Arc::new(build_mcs_table(&PhyConfig::default()).unwrap())
}

fn sim_with(duration_s: f64, outcome: OutcomeMode) -> Simulator {
    let table = build_mcs_table(&PhyConfig::default()).unwrap();
    let em = ErrorModel::default_for(&table).unwrap();
    let scenario = ScenarioConfig {
        duration_s,
        ..Default::default()
    };
    Simulator::new(table, ChannelParams::default(), scenario, em, outcome, PolicyConfig::default())
        .unwrap()
}

struct Fixed(McsIndex);

impl RatePolicy for Fixed {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Random
    }
    fn select(&mut self, _: &DecisionInput) -> Result<McsIndex> {
        Ok(self.0)
    }
    fn observe(&mut self, _: &Feedback) -> Result<()> {
        Ok(())
    }
    fn reset(&mut self) {}
}

#[test]
fn lowest_mcs_fills_thirty_seconds_with_16718_frames() {
    let sim = sim_with(30.0, OutcomeMode::Bernoulli);
    let sc = sim.scenario_for(3).unwrap();
    let trace = run_episode(
        &sc,
        &mut Fixed(idx(1)),
        &sim.table,
        &sim.channel,
        &sim.error_model,
        sim.outcome,
    )
    .unwrap();
    assert_eq!(trace.frame_count(), (30.0 / (11664.0 / 6.5e6)) as usize);
    assert_eq!(trace.frame_count(), 16718);
    assert_eq!(trace.final_selection, Some(idx(1)));
}

fn assert_budget(t: &EpisodeTrace, table: &McsTable) {
    let airtime: f64 = t.frames.iter().map(|f| f.duration).sum();
    assert!(airtime <= t.duration_s * (1.0 + 1e-12));
    let next = t.frame_bits / table.rate(t.final_selection.unwrap());
    assert!(t.busy_until() + next > t.duration_s);
    for w in t.frames.windows(2) {
        assert!((w[1].start_time - (w[0].start_time + w[0].duration)).abs() < 1e-12);
    }
}

#[test]
fn every_policy_respects_the_airtime_budget() {
    let sim = sim_with(8.0, OutcomeMode::Bernoulli);
    for seed in [1, 2] {
        for kind in PolicyKind::ALL {
            assert_budget(&sim.run_seed(seed, kind).unwrap(), &sim.table);
        }
    }
}

#[test]
fn episodes_are_deterministic_and_share_the_channel() {
    let sim = sim_with(8.0, OutcomeMode::Bernoulli);
    let sc = sim.scenario_for(5).unwrap();
    let traces: Vec<_> = PolicyKind::ALL.iter().map(|&k| sim.run(&sc, k).unwrap()).collect();
    for (k, t) in PolicyKind::ALL.iter().zip(&traces) {
        assert_eq!(&sim.run_seed(5, *k).unwrap(), t);
        assert_eq!(t.blockage, sc.blockage);
    }
    // Policies with different frame clocks still see one channel: the oracle
    // and a fixed-rate episode agree wherever their frames start together.
    let fixed = run_episode(&sc, &mut Fixed(idx(8)), &sim.table, &sim.channel, &sim.error_model, sim.outcome).unwrap();
    let oracle = &traces[PolicyKind::ALL.iter().position(|&k| k == PolicyKind::Oracle).unwrap()];
    assert_eq!(fixed.frames[0].snr, oracle.frames[0].snr);
    assert_eq!(fixed.frames[0].context, oracle.frames[0].context);
}

#[test]
fn oracle_matches_independent_choice() {
    let t = table();
    let em = ErrorModel::default_for(&t).unwrap();
    for db in (-5..45).map(|d| d as f64 * 0.7) {
        let snr = 10f64.powf(db / 10.0);
        let mut want = idx(1);
        for i in 1..=8 {
            if em.theta(idx(i), snr) >= 1.0 - 1e-6 {
                want = idx(i);
            }
        }
        assert_eq!(oracle_choice(&t, &em, 1e-6, snr), want, "{db} dB");
    }
}

#[test]
fn semi_oracle_ignores_fading() {
    let t = table();
    let em = Arc::new(ErrorModel::default_for(&t).unwrap());
    let mut full = Oracle::full(OracleConfig::default(), Arc::clone(&t), Arc::clone(&em));
    let mut semi = Oracle::semi(OracleConfig::default(), Arc::clone(&t), em);
    let input = DecisionInput {
        time_s: 0.0,
        context: Context { distance_m: 100.0, obstacle: false },
        snr: 10f64.powf(0.5),
        snr_large_scale: 1e4,
    };
    assert_eq!(full.select(&input).unwrap(), full.choose(input.snr));
    assert_eq!(semi.select(&input).unwrap(), idx(8));
    assert_eq!(full.select(&input).unwrap(), idx(1));
}

#[test]
fn random_policy_is_uniform() {
    let mut p = RandomPolicy::new(8, ChaCha8Rng::seed_from_u64(9));
    let mut counts = [0usize; 8];
    let n = 80_000;
    for _ in 0..n {
        counts[p.draw().position()] += 1;
    }
    for c in counts {
        assert!((c as f64 / n as f64 - 0.125).abs() < 0.01);
    }
}

#[test]
fn ts_counts_stay_positive_and_decay() {
    let t = table();
    let mut ts = ThompsonSampling::new(ThompsonConfig::default(), t, ChaCha8Rng::seed_from_u64(1));
    let mut now = 0.0;
    for k in 0..50_000 {
        now += 1e-4;
        let arm = ts.sample_arm();
        ts.update(arm, k % 3 == 0, now).unwrap();
    }
    for i in 1..=8 {
        let (a, b) = ts.counts(idx(i));
        assert!(a >= COUNT_FLOOR && b >= COUNT_FLOOR);
    }
    ts.set_counts(idx(2), 4.0, 2.0);
    let last = ts.last_update(idx(2));
    ts.update(idx(2), true, last + 1.0).unwrap();
    let (a, b) = ts.counts(idx(2));
    let d = (-1.0f64).exp();
    assert!((a - (4.0 * d + 1.0)).abs() < 1e-12);
    assert!((b - 2.0 * d).abs() < 1e-12);
    assert!(ts.update(idx(2), true, last).is_err());
}

#[test]
fn regret_is_zero_for_the_oracle_and_monotone_otherwise() {
    let sim = sim_with(8.0, OutcomeMode::Bernoulli);
    for seed in [1, 4] {
        let sc = sim.scenario_for(seed).unwrap();
        for kind in PolicyKind::ALL {
            let t = sim.run(&sc, kind).unwrap();
            let r = sim.regret(&t, &sc, PolicyKind::Oracle).unwrap();
            assert_eq!(r.per_frame.len(), t.frame_count());
            assert!(r.per_frame.iter().all(|&v| v >= 0.0));
            assert!(r.cumulative.windows(2).all(|w| w[1] >= w[0]));
            if kind == PolicyKind::Oracle {
                assert_eq!(r.total, 0.0);
            }
        }
        let t = sim.run(&sc, PolicyKind::Ts).unwrap();
        assert!(sim.regret(&t, &sc, PolicyKind::Ts).is_err());
        assert!(sim.regret(&t, &sim.scenario_for(seed + 1).unwrap(), PolicyKind::Oracle).is_err());
    }
}

#[test]
fn failed_frame_against_a_65_mbit_genie_costs_65e6() {
    let sim = sim_with(8.0, OutcomeMode::Bernoulli);
    let (sc, mut t) = (1..200)
        .find_map(|seed| {
            let sc = sim.scenario_for(seed).unwrap();
            let t = sim.run(&sc, PolicyKind::Oracle).unwrap();
            let f = t.frames[0];
            (f.mcs == idx(8) && f.outcome).then_some((sc, t))
        })
        .expect("a seed whose first oracle frame uses MCS 8");
    t.frames.truncate(1);
    t.frames[0].outcome = false;
    t.policy = PolicyKind::Random;
    let r = sim.regret(&t, &sc, PolicyKind::Oracle).unwrap();
    assert_eq!(r.per_frame, vec![65e6]);
    assert!(outcome_uniform(sc.seed, 0) < t.frames[0].success_prob);
}

#[test]
fn window_assignment_uses_start_times() {
    let sim = sim_with(8.0, OutcomeMode::Bernoulli);
    let t = sim.run_seed(2, PolicyKind::Oracle).unwrap();
    let idx = DeliveryIndex::new(&t);
    let total = t.delivered_bits();
    let tiles: f64 = (0..8).map(|k| idx.window(k as f64, 1.0).bits_delivered).sum();
    assert_eq!(tiles, total);
    let w = window_throughput(&t, 2.0, 1.0);
    let manual: f64 = t
        .frames
        .iter()
        .filter(|f| f.outcome && (2.0..3.0).contains(&f.start_time))
        .count() as f64
        * t.frame_bits;
    assert_eq!(w.bits_delivered, manual);
    assert_eq!(w.throughput, manual);
}

#[test]
fn convergence_against_self_is_immediate() {
    let sim = sim_with(8.0, OutcomeMode::Bernoulli);
    let t = sim.run_seed(3, PolicyKind::Oracle).unwrap();
    let cfg = MetricsConfig::default();
    let (ev, end) = Transition::Nlos.period(&t);
    assert_eq!(convergence_time(&t, &t, ev, end, &cfg).unwrap(), Some(0.0));
    assert!(convergence_time(&t, &t, 7.5, 8.0, &cfg).is_err());
}

#[test]
fn seed_reports_cover_both_transitions() {
    let sim = sim_with(8.0, OutcomeMode::Bernoulli);
    let sc = sim.scenario_for(6).unwrap();
    let traces: Vec<_> = PolicyKind::ALL.iter().map(|&k| sim.run(&sc, k).unwrap()).collect();
    let reports = seed_reports(&traces, &MetricsConfig::default()).unwrap();
    assert_eq!(reports.len(), 2 * PolicyKind::ALL.len());
    for r in &reports {
        assert!(r.convergence_end > r.event_time && r.convergence_end <= r.period_end);
        assert_eq!(r.converged.is_some(), r.policy.is_learning());
        if r.policy == PolicyKind::Oracle {
            assert_eq!(r.reaction_norm(), 1.0);
            assert_eq!(r.stability_norm(), 1.0);
        }
    }
    let lone = [traces[0].clone()];
    assert!(seed_reports(&lone, &MetricsConfig::default()).is_err());
}

#[test]
fn summary_uses_linear_quantiles() {
    let v: Vec<f64> = (1..=10).map(f64::from).collect();
    let s = summarize(&v).unwrap();
    assert_eq!((s.q1, s.median, s.q3), (3.25, 5.5, 7.75));
    assert_eq!((s.whisker_low, s.whisker_high), (1.0, 10.0));
    let mut w = v.clone();
    w.push(100.0);
    let s = summarize(&w).unwrap();
    assert_eq!(s.max, 100.0);
    assert_eq!(s.whisker_high, 10.0);
    assert!(summarize(&[]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn summary_is_ordered(values in proptest::collection::vec(-1e6f64..1e6, 1..60)) {
        let s = summarize(&values).unwrap();
        prop_assert!(s.min <= s.whisker_low && s.whisker_low <= s.q1);
        prop_assert!(s.q1 <= s.median && s.median <= s.q3);
        prop_assert!(s.q3 <= s.whisker_high && s.whisker_high <= s.max);
        prop_assert!(s.min <= s.mean && s.mean <= s.max);
    }

    #[test]
    fn threshold_outcomes_ignore_the_variate(theta in 0.0f64..1.0, u in 0.0f64..1.0) {
        let m = OutcomeMode::Threshold { threshold: 0.5 };
        prop_assert_eq!(m.realize(theta, u), theta >= 0.5);
        prop_assert_eq!(OutcomeMode::Bernoulli.realize(theta, u), u < theta);
    }
}
