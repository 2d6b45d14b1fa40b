//! Runs LinRA on one seed and shows how its MCS choice and success ratio
//! follow the obstacle flag.
//!
//! ```text
//! cargo run --release --example linra_episode -- 3
//! ```

use linra::config::ExperimentConfig;
use linra::PolicyKind;

fn main() -> linra::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let sim = ExperimentConfig::default().build_simulator()?;
    let trace = sim.run_seed(seed, PolicyKind::LinRa)?;
    let b = trace.blockage;
    println!(
        "seed {seed}: {} frames, success ratio {:.4}, NLoS [{:.2}, {:.2}] s",
        trace.frame_count(),
        trace.success_ratio(),
        b.nlos_start,
        b.nlos_end
    );
    println!("{:>6}  {:>5}  {:>8}  {:>8}  {:>9}", "t s", "NLoS", "frames", "success", "mean MCS");
    let step = 0.5;
    let mut frames = trace.frames.iter().peekable();
    let mut t = 0.0;
    while t < trace.duration_s {
        let (mut n, mut ok, mut mcs) = (0usize, 0usize, 0usize);
        while let Some(f) = frames.next_if(|f| f.start_time < t + step) {
            n += 1;
            ok += usize::from(f.outcome);
            mcs += f.mcs.get();
        }
        if n > 0 {
            println!(
                "{t:>6.1}  {:>5}  {n:>8}  {:>8.3}  {:>9.2}",
                if b.is_nlos(t) || b.is_nlos(t + step - 1e-9) { "yes" } else { "" },
                ok as f64 / n as f64,
                mcs as f64 / n as f64
            );
        }
        t += step;
    }
    Ok(())
}
