//! Batch experiments: seed sweeps, output files and scenario replay.
//!
//! [`run_experiment`] simulates every configured policy on every seed and
//! writes into the output directory:
//!
//! * `metrics.csv`: one row per seed, policy and transition;
//! * `episodes.csv`: one row per seed and policy (frames, success ratio,
//!   delivered bits, total regret);
//! * `aggregate.json`: cross-seed statistics with the resolved configuration
//!   and the crate version;
//! * `plotdata/throughput_seed<N>.csv`: 100 ms throughput bins per policy for
//!   the highlighted seed;
//! * `plotdata/boxplot_<transition>.csv`: quartiles and whiskers per policy
//!   and phase;
//! * optionally `traces/seed<N>_<policy>.csv` and `scenarios/seed<N>.json`.
//!
//! The oracle (and the metrics reference genie) are always simulated since
//! every metric is normalized against them, but they are only reported when
//! requested. All outputs are sorted by seed and policy, so they do not
//! depend on thread scheduling.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::metrics::{
    aggregate, seed_reports, DeliveryIndex, Transition, TransitionAggregate,
    TransitionReport, METRICS_CSV_HEADER,
};
use crate::policy::PolicyKind;
use crate::scenario::Scenario;
use crate::sim::{EpisodeTrace, Simulator};

/// Crate version embedded in every output and scenario dump.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Bin width of the throughput-vs-time export.
pub const PLOT_BIN_S: f64 = 0.1;

/// Per-episode summary row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub policy: PolicyKind,
    pub frames: usize,
    pub success_ratio: f64,
    pub delivered_bits: f64,
    pub airtime_s: f64,
    pub throughput_bps: f64,
    pub regret_total: f64,
}

pub const EPISODES_CSV_HEADER: &str =
    "seed,policy,frames,success_ratio,delivered_bits,airtime_s,throughput_bps,regret_total";

impl EpisodeSummary {
    fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.seed,
            self.policy,
            self.frames,
            self.success_ratio,
            self.delivered_bits,
            self.airtime_s,
            self.throughput_bps,
            self.regret_total
        )
    }
}

/// Mean per-policy episode statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEpisodeStats {
    pub policy: PolicyKind,
    pub episodes: usize,
    pub mean_success_ratio: f64,
    pub min_success_ratio: f64,
    pub mean_throughput_bps: f64,
    pub mean_regret_total: f64,
}

/// Contents of `aggregate.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub version: String,
    pub config: Value,
    pub seeds: Vec<u64>,
    pub policies: Vec<PolicyKind>,
    pub transitions: Vec<TransitionAggregate>,
    pub episodes: Vec<PolicyEpisodeStats>,
}

/// In-memory results of a batch.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub reports: Vec<TransitionReport>,
    pub episodes: Vec<EpisodeSummary>,
    pub aggregate: AggregateReport,
    /// `(bin_start, policy, throughput_bps)` for the highlighted seed.
    pub plot_series: Vec<(f64, PolicyKind, f64)>,
}

struct SeedOutcome {
    reports: Vec<TransitionReport>,
    episodes: Vec<EpisodeSummary>,
    plot: Vec<(f64, PolicyKind, f64)>,
}

fn episode_error(seed: u64, policy: PolicyKind, message: impl Into<String>) -> Error {
    Error::Episode {
        seed,
        policy: policy.name().to_owned(),
        message: message.into(),
    }
}

/// Runs one episode, turning panics into [`Error::Episode`].
pub fn run_guarded(sim: &Simulator, scenario: &Scenario, kind: PolicyKind) -> Result<EpisodeTrace> {
    match catch_unwind(AssertUnwindSafe(|| sim.run(scenario, kind))) {
        Ok(Ok(trace)) => Ok(trace),
        Ok(Err(e)) => Err(episode_error(scenario.seed, kind, e.to_string())),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            Err(episode_error(scenario.seed, kind, format!("panicked: {msg}")))
        }
    }
}

/// Policies that have to be simulated to report `requested`.
pub fn required_policies(cfg: &ExperimentConfig) -> Vec<PolicyKind> {
    let mut all = cfg.run.policies.clone();
    for extra in [PolicyKind::Oracle, cfg.metrics.reference] {
        if !all.contains(&extra) {
            all.push(extra);
        }
    }
    all.sort();
    all
}

/// Throughput per [`PLOT_BIN_S`] bin over the whole episode.
pub fn throughput_series(trace: &EpisodeTrace) -> Vec<(f64, f64)> {
    let idx = DeliveryIndex::new(trace);
    let bins = (trace.duration_s / PLOT_BIN_S).round() as usize;
    (0..bins)
        .map(|k| {
            let start = k as f64 * PLOT_BIN_S;
            (start, idx.window(start, PLOT_BIN_S).throughput)
        })
        .collect()
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_trace(path: &Path, trace: &EpisodeTrace) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    trace.write_csv(&mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn run_seed(
    cfg: &ExperimentConfig,
    sim: &Simulator,
    policies: &[PolicyKind],
    seed: u64,
) -> Result<SeedOutcome> {
    let scenario = sim.scenario_for(seed)?;
    let out = &cfg.run.out;
    if cfg.run.dump_scenarios {
        let path = out.join("scenarios").join(format!("seed{seed}.json"));
        write_file(&path, &ScenarioDump::new(&scenario).to_json()?)?;
    }
    let traces = policies
        .iter()
        .map(|&k| run_guarded(sim, &scenario, k))
        .collect::<Result<Vec<_>>>()?;
    let requested = |k: PolicyKind| cfg.run.policies.contains(&k);

    let mut episodes = Vec::new();
    let mut plot = Vec::new();
    for t in traces.iter().filter(|t| requested(t.policy)) {
        let regret = sim
            .regret(t, &scenario, cfg.regret_reference)
            .map_err(|e| episode_error(seed, t.policy, e.to_string()))?;
        episodes.push(EpisodeSummary {
            seed,
            policy: t.policy,
            frames: t.frame_count(),
            success_ratio: t.success_ratio(),
            delivered_bits: t.delivered_bits(),
            airtime_s: t.busy_until(),
            throughput_bps: t.delivered_bits() / t.duration_s,
            regret_total: regret.total,
        });
        if cfg.run.dump_traces {
            let path = out.join("traces").join(format!("seed{seed}_{}.csv", t.policy));
            write_trace(&path, t)?;
        }
        if seed == cfg.run.plot_seed() {
            plot.extend(throughput_series(t).into_iter().map(|(s, v)| (s, t.policy, v)));
        }
    }
    let reports = seed_reports(&traces, &cfg.metrics)?
        .into_iter()
        .filter(|r| requested(r.policy))
        .collect();
    Ok(SeedOutcome {
        reports,
        episodes,
        plot,
    })
}

fn episode_stats(episodes: &[EpisodeSummary], policies: &[PolicyKind]) -> Vec<PolicyEpisodeStats> {
    policies
        .iter()
        .map(|&p| {
            let rows: Vec<_> = episodes.iter().filter(|e| e.policy == p).collect();
            let n = rows.len() as f64;
            PolicyEpisodeStats {
                policy: p,
                episodes: rows.len(),
                mean_success_ratio: rows.iter().map(|e| e.success_ratio).sum::<f64>() / n,
                min_success_ratio: rows
                    .iter()
                    .map(|e| e.success_ratio)
                    .fold(f64::INFINITY, f64::min),
                mean_throughput_bps: rows.iter().map(|e| e.throughput_bps).sum::<f64>() / n,
                mean_regret_total: rows.iter().map(|e| e.regret_total).sum::<f64>() / n,
            }
        })
        .collect()
}

/// Simulates the configured batch without touching the filesystem (unless
/// trace or scenario dumps are enabled).
pub fn simulate(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let sim = cfg.build_simulator()?;
    let policies = required_policies(cfg);
    let seeds = cfg.run.seed_list();
    if cfg.run.dump_traces {
        create_dir(&cfg.run.out.join("traces"))?;
    }
    if cfg.run.dump_scenarios {
        create_dir(&cfg.run.out.join("scenarios"))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.jobs)
        .build()
        .map_err(|e| Error::config("run.jobs", e.to_string()))?;
    let outcomes: Vec<SeedOutcome> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| run_seed(cfg, &sim, &policies, seed))
            .collect::<Result<_>>()
    })?;

    let mut reports = Vec::new();
    let mut episodes = Vec::new();
    let mut plot_series = Vec::new();
    for o in outcomes {
        reports.extend(o.reports);
        episodes.extend(o.episodes);
        plot_series.extend(o.plot);
    }
    reports.sort_by_key(|r| (r.seed, r.policy, r.transition));
    episodes.sort_by_key(|e| (e.seed, e.policy));
    plot_series.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.total_cmp(&b.0)));

    let aggregate = AggregateReport {
        version: VERSION.to_owned(),
        config: serde_json::to_value(cfg.to_flat_map())?,
        seeds,
        policies: cfg.run.policies.clone(),
        transitions: aggregate(&reports)?,
        episodes: episode_stats(&episodes, &cfg.run.policies),
    };
    Ok(ExperimentResult {
        reports,
        episodes,
        aggregate,
        plot_series,
    })
}

/// Runs the batch and writes every output file. Returns the results and
/// the normalized-throughput summary that the command-line driver prints.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(ExperimentResult, String)> {
    cfg.validate()?;
    let out = &cfg.run.out;
    create_dir(out)?;
    log::info!(
        "simulating {} seeds x {} policies",
        cfg.run.seeds,
        required_policies(cfg).len()
    );
    let result = simulate(cfg)?;
    write_outputs(cfg, &result)?;
    log::info!("wrote outputs to {}", out.display());
    let summary = table_summary(&result.aggregate);
    Ok((result, summary))
}

fn boxplot_csv(aggs: &[TransitionAggregate], which: Transition) -> String {
    let mut s = String::from(
        "policy,phase,count,mean,median,q1,q3,whisker_low,whisker_high,min,max\n",
    );
    for a in aggs.iter().filter(|a| a.transition == which) {
        for (phase, sm) in [
            ("reaction", &a.reaction),
            ("convergence", &a.convergence),
            ("stability", &a.stability),
        ] {
            let _ = writeln!(
                s,
                "{},{phase},{},{},{},{},{},{},{},{},{}",
                a.policy,
                sm.count,
                sm.mean,
                sm.median,
                sm.q1,
                sm.q3,
                sm.whisker_low,
                sm.whisker_high,
                sm.min,
                sm.max
            );
        }
    }
    s
}

/// Writes `metrics.csv`, `episodes.csv`, `aggregate.json` and `plotdata/`.
pub fn write_outputs(cfg: &ExperimentConfig, result: &ExperimentResult) -> Result<()> {
    let out = &cfg.run.out;
    let mut metrics = String::from(METRICS_CSV_HEADER);
    metrics.push('\n');
    for r in &result.reports {
        metrics.push_str(&r.csv_row());
        metrics.push('\n');
    }
    write_file(&out.join("metrics.csv"), &metrics)?;

    let mut episodes = String::from(EPISODES_CSV_HEADER);
    episodes.push('\n');
    for e in &result.episodes {
        episodes.push_str(&e.csv_row());
        episodes.push('\n');
    }
    write_file(&out.join("episodes.csv"), &episodes)?;

    let mut json = serde_json::to_string_pretty(&result.aggregate)?;
    json.push('\n');
    write_file(&out.join("aggregate.json"), &json)?;

    let plot_dir = out.join("plotdata");
    create_dir(&plot_dir)?;
    let mut series = String::from("time_s,policy,throughput_bps\n");
    for (t, p, v) in &result.plot_series {
        let _ = writeln!(series, "{t},{p},{v}");
    }
    write_file(
        &plot_dir.join(format!("throughput_seed{}.csv", cfg.run.plot_seed())),
        &series,
    )?;
    for which in Transition::ALL {
        write_file(
            &plot_dir.join(format!("boxplot_{which}.csv")),
            &boxplot_csv(&result.aggregate.transitions, which),
        )?;
    }
    Ok(())
}

/// Oracle-normalized mean throughputs per policy and transition, plus
/// convergence statistics for the learners.
pub fn table_summary(agg: &AggregateReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "Mean throughput normalized to Oracle ({} seeds)",
        agg.seeds.len()
    );
    let _ = writeln!(
        s,
        "{:<12} | {:>6} {:>6} {:>6} | {:>6} {:>6} {:>6}",
        "", "NLoS", "", "", "2nd LoS", "", ""
    );
    let _ = writeln!(
        s,
        "{:<12} | {:>6} {:>6} {:>6} | {:>6} {:>6} {:>6}",
        "policy", "react", "stab", "conv", "react", "stab", "conv"
    );
    let find = |p: PolicyKind, t: Transition| {
        agg.transitions
            .iter()
            .find(|a| a.policy == p && a.transition == t)
    };
    for &p in &agg.policies {
        let mut line = format!("{:<12} |", p.name());
        for (k, t) in Transition::ALL.into_iter().enumerate() {
            if k == 1 {
                line.push_str(" |");
            }
            if let Some(a) = find(p, t) {
                let n = a.normalized;
                let _ = write!(
                    line,
                    " {:>6.2} {:>6.2} {:>6.2}",
                    n.reaction, n.stability, n.convergence
                );
            }
        }
        let _ = writeln!(s, "{line}");
    }
    for &p in agg.policies.iter().filter(|p| p.is_learning()) {
        for t in Transition::ALL {
            if let Some(a) = find(p, t) {
                let time = a
                    .mean_convergence_time
                    .map_or("n/a".to_owned(), |c| format!("{:.0} ms", c * 1e3));
                let _ = writeln!(
                    s,
                    "{:<12} {:<10} converged {:>5.1} %  mean time {}",
                    p.name(),
                    t.name(),
                    a.convergence_ratio.unwrap_or(0.0) * 100.0,
                    time
                );
            }
        }
    }
    for e in &agg.episodes {
        let _ = writeln!(
            s,
            "{:<12} success ratio {:.6} (min {:.6})  mean throughput {:.2} Mbit/s",
            e.policy.name(),
            e.mean_success_ratio,
            e.min_success_ratio,
            e.mean_throughput_bps / 1e6
        );
    }
    s
}

/// Serialized scenario for single-episode replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDump {
    pub format: String,
    pub version: String,
    pub seed: u64,
    pub scenario: Scenario,
}

const DUMP_FORMAT: &str = "linra-scenario";

impl ScenarioDump {
    pub fn new(scenario: &Scenario) -> Self {
        ScenarioDump {
            format: DUMP_FORMAT.to_owned(),
            version: VERSION.to_owned(),
            seed: scenario.seed,
            scenario: scenario.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Parses and checks a dump; any problem is an [`Error::Replay`].
    pub fn from_json(text: &str) -> Result<Self> {
        let dump: ScenarioDump =
            serde_json::from_str(text).map_err(|e| Error::Replay(format!("corrupt dump: {e}")))?;
        if dump.format != DUMP_FORMAT {
            return Err(Error::Replay(format!("unexpected format `{}`", dump.format)));
        }
        if dump.version != VERSION {
            return Err(Error::Replay(format!(
                "dump written by version {}, this is {VERSION}",
                dump.version
            )));
        }
        if dump.seed != dump.scenario.seed {
            return Err(Error::Replay("seed field disagrees with the scenario".into()));
        }
        let b = &dump.scenario.blockage;
        if !(0.0 < b.nlos_start && b.nlos_start < b.nlos_end && b.nlos_end < dump.scenario.duration_s)
        {
            return Err(Error::Replay("blockage schedule outside the episode".into()));
        }
        Ok(dump)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Re-runs `policy` on a dumped scenario under `cfg`.
pub fn replay(dump: &ScenarioDump, policy: PolicyKind, cfg: &ExperimentConfig) -> Result<EpisodeTrace> {
    let sim = cfg.build_simulator()?;
    if dump.scenario.duration_s != cfg.scenario.duration_s {
        return Err(Error::Replay(format!(
            "dump lasts {} s but the configuration sets {} s",
            dump.scenario.duration_s, cfg.scenario.duration_s
        )));
    }
    run_guarded(&sim, &dump.scenario, policy)
}

/// Replays and writes the trace CSV to `out`.
pub fn replay_to_file(
    dump_path: &Path,
    policy: PolicyKind,
    cfg: &ExperimentConfig,
    out: &Path,
) -> Result<EpisodeTrace> {
    let dump = ScenarioDump::load(dump_path)?;
    let trace = replay(&dump, policy, cfg)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_trace(out, &trace)?;
    Ok(trace)
}

/// Default trace path for replay output.
pub fn replay_output_path(out_dir: &Path, seed: u64, policy: PolicyKind) -> PathBuf {
    out_dir.join(format!("replay_seed{seed}_{policy}.csv"))
}
