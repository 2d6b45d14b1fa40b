//! Batch driver and scenario replay.
//!
//! Exit status: 0 success, 1 runtime failure, 2 configuration error,
//! 3 I/O error, 4 replay dump rejected.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::Value;

use linra::config::ExperimentConfig;
use linra::experiment::{replay_output_path, replay_to_file, run_experiment};
use linra::{Error, PolicyKind, Result};

#[derive(Debug, Parser)]
#[command(name = "linra-sim", version, about = "Rate adaptation benchmark for flying networks")]
struct Cli {
    /// JSON file with dotted configuration keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of seeds (`run.seeds`).
    #[arg(long)]
    seeds: Option<u64>,
    /// First seed (`run.seed_start`).
    #[arg(long)]
    seed_start: Option<u64>,
    /// Comma-separated policies: linra,ts,random,oracle,semi-oracle.
    #[arg(long)]
    policies: Option<String>,
    /// FER table CSV; switches the error model to table mode.
    #[arg(long)]
    fer_table: Option<PathBuf>,
    /// Output directory (`run.out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write one trace CSV per episode.
    #[arg(long)]
    dump_traces: bool,
    /// Write one scenario JSON per seed for later replay.
    #[arg(long)]
    dump_scenarios: bool,
    /// Seed exported at 100 ms resolution (`run.plot_seed`).
    #[arg(long)]
    plot_seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    jobs: Option<usize>,
    /// Any configuration key, e.g. `--set scenario.uav_speed_mps=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Replay a scenario dump instead of running a batch.
    #[arg(long, value_name = "DUMP")]
    replay: Option<PathBuf>,
    /// Policy for `--replay`.
    #[arg(long, requires = "replay")]
    policy: Option<String>,
    /// Trace CSV written by `--replay` (default: inside `--out`).
    #[arg(long, requires = "replay")]
    trace_out: Option<PathBuf>,
}

fn override_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()))
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &cli.config {
        cfg.merge_file(path)?;
    }
    let mut set = |key: &str, v: Value| cfg.set(key, &v);
    if let Some(v) = cli.seeds {
        set("run.seeds", v.into())?;
    }
    if let Some(v) = cli.seed_start {
        set("run.seed_start", v.into())?;
    }
    if let Some(v) = &cli.policies {
        set("run.policies", v.as_str().into())?;
    }
    if let Some(p) = &cli.fer_table {
        set("error_model.mode", "table".into())?;
        set("error_model.table_path", p.to_string_lossy().as_ref().into())?;
    }
    if let Some(p) = &cli.out {
        set("run.out", p.to_string_lossy().as_ref().into())?;
    }
    if cli.dump_traces {
        set("run.dump_traces", true.into())?;
    }
    if cli.dump_scenarios {
        set("run.dump_scenarios", true.into())?;
    }
    if let Some(v) = cli.plot_seed {
        set("run.plot_seed", v.into())?;
    }
    if let Some(v) = cli.jobs {
        set("run.jobs", v.into())?;
    }
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config {
                field: kv.clone(),
                message: "expected KEY=VALUE".into(),
            })?;
        set(k.trim(), override_value(v.trim()))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve(&cli)?;
    if let Some(dump) = &cli.replay {
        let policy: PolicyKind = cli
            .policy
            .as_deref()
            .ok_or_else(|| Error::Config {
                field: "policy".into(),
                message: "--replay needs --policy".into(),
            })?
            .parse()?;
        let seed = linra::experiment::ScenarioDump::load(dump)?.seed;
        let out = cli
            .trace_out
            .clone()
            .unwrap_or_else(|| replay_output_path(&cfg.run.out, seed, policy));
        let trace = replay_to_file(dump, policy, &cfg, &out)?;
        println!(
            "replayed seed {seed} with {policy}: {} frames, success ratio {:.6}, trace {}",
            trace.frame_count(),
            trace.success_ratio(),
            out.display()
        );
        return Ok(());
    }
    let (_, summary) = run_experiment(&cfg)?;
    print!("{summary}");
    println!("outputs written to {}", cfg.run.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("linra-sim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
