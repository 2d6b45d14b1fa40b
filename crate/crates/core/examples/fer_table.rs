//! Loads a FER table CSV and compares its success probabilities with the
//! analytic model.
//!
//! ```text
//! cargo run --example fer_table -- crates/core/tests/fixtures/fer_logistic_8mcs.csv
//! ```

use std::path::PathBuf;

use linra::error_model::{load_fer_table, ErrorModel};
use linra::rate_model::{build_mcs_table, PhyConfig};
use linra::units::db_to_linear;
use linra::McsIndex;

fn main() -> linra::Result<()> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/fer_logistic_8mcs.csv")
    });
    let table = build_mcs_table(&PhyConfig::default())?;
    let fer = load_fer_table(&path)?;
    for w in &fer.warnings {
        println!("warning: {w}");
    }
    println!("{}: {} curves, reference frame {:?} bits", path.display(), fer.curves.len(), fer.frame_size_ref_bits);
    let n = fer.curves.len();
    let tabled = ErrorModel::from_table(fer, table.phy().frame_bits(), Some(path));
    let analytic = ErrorModel::default_for(&table)?;

    print!("{:>6}", "SNR dB");
    for i in 1..=n {
        print!("  {:>11}", format!("mcs{i} tab/an"));
    }
    println!();
    for db in (0..=36).step_by(3) {
        let snr = db_to_linear(db as f64);
        print!("{db:>6}");
        for i in 1..=n {
            let m = McsIndex::new(i)?;
            let an = if i <= analytic.len() { analytic.theta(m, snr) } else { f64::NAN };
            print!("  {:>5.3}/{:<5.3}", tabled.theta(m, snr), an);
        }
        println!();
    }
    Ok(())
}
