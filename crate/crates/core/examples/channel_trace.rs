//! Samples the link of one seed once per second: distance, path loss,
//! obstacle attenuation and SNR.
//!
//! ```text
//! cargo run --example channel_trace -- 7
//! ```

use linra::channel::{sample_rician_power, ChannelModel, ChannelParams};
use linra::scenario::{Scenario, ScenarioConfig};
use linra::units::linear_to_db;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> linra::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let params = ChannelParams::default();
    let sc = Scenario::generate(&ScenarioConfig::default(), params.obstacle_bounds(), seed)?;
    let b = sc.blockage;
    println!(
        "seed {seed}: NLoS [{:.2}, {:.2}] s, obstacle loss {:.2} dB",
        b.nlos_start, b.nlos_end, b.event_loss_db
    );
    let ch = ChannelModel::new(&params, &sc);
    println!("{:>5}  {:>9}  {:>8}  {:>8}  {:>8}  {:>8}", "t s", "dist m", "FSPL dB", "obst dB", "SNR dB", "no-fade");
    for k in 0..=sc.duration_s as usize {
        let t = (k as f64).min(sc.duration_s);
        let s = ch.state_at(t)?;
        println!(
            "{t:>5.1}  {:>9.1}  {:>8.2}  {:>8.2}  {:>8.2}  {:>8.2}",
            sc.distance_at(t),
            s.fspl_db,
            s.obstacle_db,
            linear_to_db(s.snr),
            linear_to_db(s.large_scale_snr(&params))
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 200_000;
    let powers: Vec<f64> = (0..n).map(|_| sample_rician_power(params.rician_k(), &mut rng)).collect();
    let mean = powers.iter().sum::<f64>() / n as f64;
    let deep = powers.iter().filter(|&&p| p < 0.1).count() as f64 / n as f64;
    println!("\nRician K = {} dB: mean |h|^2 {mean:.4}, P(fade below -10 dB) {deep:.2e}", params.rician_k_db);
    Ok(())
}
