//! Cumulative regret of each policy against the Oracle on one seed,
//! sampled every 2 s.
//!
//! ```text
//! cargo run --release --example regret -- 2
//! ```

use linra::config::ExperimentConfig;
use linra::PolicyKind;

fn main() -> linra::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let sim = ExperimentConfig::default().build_simulator()?;
    let scenario = sim.scenario_for(seed)?;
    let marks: Vec<f64> = (1..=15).map(|k| 2.0 * k as f64).collect();
    print!("{:<12}", "policy");
    for m in &marks {
        print!(" {:>7}", format!("{m:.0}s"));
    }
    println!("   (Gbit/s of rate-regret summed per frame)");
    for kind in PolicyKind::ALL {
        let trace = sim.run(&scenario, kind)?;
        let r = sim.regret(&trace, &scenario, PolicyKind::Oracle)?;
        print!("{:<12}", kind.name());
        for &m in &marks {
            let n = trace.frames.partition_point(|f| f.start_time < m);
            let v = if n == 0 { 0.0 } else { r.cumulative[n - 1] };
            print!(" {:>7.1}", v / 1e9);
        }
        println!();
    }
    Ok(())
}
