//! Full batch through the library API: simulates the requested seeds for
//! every policy, writes the same files as `linra-sim` and prints the
//! normalized throughput table.
//!
//! ```text
//! cargo run --release --example batch_experiment -- 20 out/example
//! ```

use linra::config::ExperimentConfig;
use linra::experiment::run_experiment;

fn main() -> linra::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut cfg = ExperimentConfig::default();
    cfg.run.seeds = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    cfg.run.out = args.next().unwrap_or_else(|| "out/batch_example".into()).into();
    let (result, summary) = run_experiment(&cfg)?;
    print!("{summary}");
    println!(
        "{} transition reports, {} episodes, outputs in {}",
        result.reports.len(),
        result.episodes.len(),
        cfg.run.out.display()
    );
    Ok(())
}
