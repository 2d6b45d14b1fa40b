//! Decibel conversions.
//!
//! Every dB/linear conversion in the crate goes through these helpers. Path
//! "loss" values are carried as negative dB gains (free-space loss at any
//! practical distance is below 0 dB) and obstacle attenuation as a positive
//! dB quantity that is subtracted.

/// Power ratio in dB to linear.
#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Linear power ratio to dB.
#[inline]
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// dBm to watts.
#[inline]
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

#[inline]
pub fn watts_to_dbm(watts: f64) -> f64 {
    linear_to_db(watts) + 30.0
}
