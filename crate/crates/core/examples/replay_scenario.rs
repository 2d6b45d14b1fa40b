//! Dumps a generated scenario to JSON, reads it back and checks that the
//! replayed episode matches the original one frame for frame.
//!
//! ```text
//! cargo run --release --example replay_scenario -- 5 ts
//! ```

use linra::config::ExperimentConfig;
use linra::experiment::{replay, ScenarioDump};
use linra::PolicyKind;

fn main() -> linra::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    let policy: PolicyKind = args.next().as_deref().unwrap_or("linra").parse()?;
    let cfg = ExperimentConfig::default();
    let sim = cfg.build_simulator()?;
    let scenario = sim.scenario_for(seed)?;
    let original = sim.run(&scenario, policy)?;

    let json = ScenarioDump::new(&scenario).to_json()?;
    println!("dump: {} bytes", json.len());
    let dump = ScenarioDump::from_json(&json)?;
    let replayed = replay(&dump, policy, &cfg)?;
    println!(
        "{policy} on seed {seed}: {} frames, replay identical: {}",
        replayed.frame_count(),
        replayed == original
    );

    let tampered = json.replacen(linra::experiment::VERSION, "0.0.0", 1);
    match ScenarioDump::from_json(&tampered) {
        Err(e) => println!("tampered dump rejected (exit code {}): {e}", e.exit_code()),
        Ok(_) => println!("tampered dump accepted"),
    }
    Ok(())
}
