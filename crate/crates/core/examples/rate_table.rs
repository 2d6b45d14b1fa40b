//! Prints the 802.11n MCS table with airtimes and the analytic error model
//! midpoints.
//!
//! ```text
//! cargo run --example rate_table
//! ```

use linra::error_model::{AnalyticErrorParams, DEFAULT_IMPLEMENTATION_LOSS_DB, DEFAULT_SLOPE_PER_DB};
use linra::rate_model::{build_mcs_table, frame_duration, PhyConfig};

fn main() -> linra::Result<()> {
    let phy = PhyConfig::default();
    let table = build_mcs_table(&phy)?;
    let err = AnalyticErrorParams::derived(&table, DEFAULT_SLOPE_PER_DB, DEFAULT_IMPLEMENTATION_LOSS_DB)?;
    println!("frame size {} bits\n", phy.frame_bits());
    println!("{:>3}  {:<7} {:>5}  {:>9}  {:>10}  {:>11}", "mcs", "mod", "rate", "Mbit/s", "airtime us", "SNR50 dB");
    for (e, snr50) in table.entries().iter().zip(&err.snr50_db) {
        println!(
            "{:>3}  {:<7} {:>5}  {:>9.1}  {:>10.2}  {:>11.2}",
            e.index,
            format!("{:?}", e.modulation),
            e.coding_rate.to_string(),
            e.phy_rate / 1e6,
            frame_duration(e.phy_rate, phy.frame_bits()) * 1e6,
            snr50
        );
    }
    Ok(())
}
