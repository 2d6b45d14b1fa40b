//! Throughput of every policy around the NLoS period of one seed, in
//! 100 ms bins, with convergence times and normalized throughputs.
//!
//! ```text
//! cargo run --release --example compare_policies -- 1
//! ```

use linra::experiment::throughput_series;
use linra::metrics::{seed_reports, MetricsConfig};
use linra::config::ExperimentConfig;
use linra::PolicyKind;

fn main() -> linra::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let sim = ExperimentConfig::default().build_simulator()?;
    let scenario = sim.scenario_for(seed)?;
    let traces = PolicyKind::ALL
        .iter()
        .map(|&k| sim.run(&scenario, k))
        .collect::<linra::Result<Vec<_>>>()?;
    let b = scenario.blockage;
    println!("seed {seed}: NLoS [{:.2}, {:.2}] s\n", b.nlos_start, b.nlos_end);

    let series: Vec<_> = traces.iter().map(throughput_series).collect();
    print!("{:>6}", "t s");
    for k in PolicyKind::ALL {
        print!("  {:>11}", k.name());
    }
    println!("   (Mbit/s)");
    let from = (b.nlos_start - 1.0).max(0.0);
    let to = (b.nlos_end + 2.0).min(scenario.duration_s);
    for (i, &(start, _)) in series[0].iter().enumerate() {
        if start < from || start > to {
            continue;
        }
        print!("{start:>6.1}");
        for s in &series {
            print!("  {:>11.2}", s[i].1 / 1e6);
        }
        println!("{}", if b.is_nlos(start) { "   NLoS" } else { "" });
    }

    println!();
    for r in seed_reports(&traces, &MetricsConfig::default())? {
        let conv = match r.convergence_time {
            Some(c) => format!("{:.0} ms", c * 1e3),
            None if r.policy.is_learning() => "never".into(),
            None => "-".into(),
        };
        println!(
            "{:<11} {:<10} convergence {:>8}  react {:.2}  conv {:.2}  stab {:.2}",
            r.policy.name(),
            r.transition.name(),
            conv,
            r.reaction_norm(),
            r.convergence_norm(),
            r.stability_norm()
        );
    }
    Ok(())
}
