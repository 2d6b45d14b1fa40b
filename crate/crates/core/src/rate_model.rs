//! 802.11n MCS table and the rate/airtime/throughput relations built on it.
//!
//! The table is the 20 MHz, single spatial stream, long guard interval set
//! (HT MCS 0-7). Rates are built from integer arithmetic so that every entry
//! is the exact quotient `N_SS * N_DS * C_B * C_R / (T_S + T_GI)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-based MCS index as used in traces and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct McsIndex(u8);

impl McsIndex {
    pub const LOWEST: McsIndex = McsIndex(1);

    pub fn new(one_based: usize) -> Result<Self> {
        if one_based == 0 || one_based > u8::MAX as usize {
            return Err(Error::Domain(format!("MCS index {one_based} out of range")));
        }
        Ok(McsIndex(one_based as u8))
    }

    pub(crate) fn from_position(pos: usize) -> Self {
        McsIndex(pos as u8 + 1)
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }

    /// Zero-based position in the table.
    pub fn position(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for McsIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modulation {
    Bpsk,
    Qpsk,
    Qam16,
    Qam64,
}

impl Modulation {
    /// Coded bits per subcarrier per spatial stream.
    pub fn bits_per_symbol(self) -> u32 {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
        }
    }

    pub fn order(self) -> u32 {
        1 << self.bits_per_symbol()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodingRate {
    pub num: u32,
    pub den: u32,
}

impl CodingRate {
    pub const HALF: CodingRate = CodingRate { num: 1, den: 2 };
    pub const TWO_THIRDS: CodingRate = CodingRate { num: 2, den: 3 };
    pub const THREE_QUARTERS: CodingRate = CodingRate { num: 3, den: 4 };
    pub const FIVE_SIXTHS: CodingRate = CodingRate { num: 5, den: 6 };

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for CodingRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// OFDM numerology and frame size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhyConfig {
    pub n_spatial_streams: u32,
    pub n_data_subcarriers: u32,
    pub symbol_duration_ns: u32,
    pub guard_interval_ns: u32,
    pub bandwidth_hz: f64,
    pub frame_size_bytes: u32,
}

impl Default for PhyConfig {
    fn default() -> Self {
        PhyConfig {
            n_spatial_streams: 1,
            n_data_subcarriers: 52,
            symbol_duration_ns: 3200,
            guard_interval_ns: 800,
            bandwidth_hz: 20e6,
            frame_size_bytes: 1458,
        }
    }
}

impl PhyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_spatial_streams != 1 {
            return Err(Error::config(
                "phy.n_spatial_streams",
                "only single-stream (SISO) operation is modelled",
            ));
        }
        let positive = [
            ("phy.n_data_subcarriers", self.n_data_subcarriers),
            ("phy.symbol_duration_ns", self.symbol_duration_ns),
            ("phy.guard_interval_ns", self.guard_interval_ns),
            ("phy.frame_size_bytes", self.frame_size_bytes),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(Error::config(field, "must be strictly positive"));
            }
        }
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz > 0.0) {
            return Err(Error::config("phy.bandwidth_hz", "must be strictly positive"));
        }
        Ok(())
    }

    pub fn frame_bits(&self) -> f64 {
        self.frame_size_bytes as f64 * 8.0
    }

    /// OFDM symbol period including guard interval, in seconds.
    pub fn symbol_period(&self) -> f64 {
        (self.symbol_duration_ns + self.guard_interval_ns) as f64 * 1e-9
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McsEntry {
    pub index: McsIndex,
    pub modulation: Modulation,
    pub coding_rate: CodingRate,
    /// Physical data rate in bit/s.
    pub phy_rate: f64,
}

const HT_SISO_SET: [(Modulation, CodingRate); 8] = [
    (Modulation::Bpsk, CodingRate::HALF),
    (Modulation::Qpsk, CodingRate::HALF),
    (Modulation::Qpsk, CodingRate::THREE_QUARTERS),
    (Modulation::Qam16, CodingRate::HALF),
    (Modulation::Qam16, CodingRate::THREE_QUARTERS),
    (Modulation::Qam64, CodingRate::TWO_THIRDS),
    (Modulation::Qam64, CodingRate::THREE_QUARTERS),
    (Modulation::Qam64, CodingRate::FIVE_SIXTHS),
];

/// Ordered MCS table. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsTable {
    phy: PhyConfig,
    entries: Vec<McsEntry>,
}

/// Builds the 8-entry HT table for `config`.
pub fn build_mcs_table(config: &PhyConfig) -> Result<McsTable> {
    config.validate()?;
    let entries = HT_SISO_SET
        .iter()
        .enumerate()
        .map(|(pos, &(modulation, coding_rate))| McsEntry {
            index: McsIndex::from_position(pos),
            modulation,
            coding_rate,
            phy_rate: exact_rate(config, modulation, coding_rate),
        })
        .collect();
    Ok(McsTable {
        phy: *config,
        entries,
    })
}

// Numerator and denominator are integers (rates in bit/s with the period in
// ns), so the only rounding is the final division.
fn exact_rate(config: &PhyConfig, modulation: Modulation, coding: CodingRate) -> f64 {
    let num = config.n_spatial_streams as u128
        * config.n_data_subcarriers as u128
        * modulation.bits_per_symbol() as u128
        * coding.num as u128
        * 1_000_000_000u128;
    let den = coding.den as u128
        * (config.symbol_duration_ns as u128 + config.guard_interval_ns as u128);
    if num.is_multiple_of(den) {
        (num / den) as f64
    } else {
        num as f64 / den as f64
    }
}

impl McsTable {
    pub fn phy(&self) -> &PhyConfig {
        &self.phy
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.entries
    }

    pub fn indices(&self) -> impl DoubleEndedIterator<Item = McsIndex> + '_ {
        self.entries.iter().map(|e| e.index)
    }

    pub fn highest(&self) -> McsIndex {
        McsIndex::from_position(self.entries.len() - 1)
    }

    pub fn entry(&self, index: McsIndex) -> Result<&McsEntry> {
        self.entries
            .get(index.position())
            .ok_or_else(|| Error::Domain(format!("unknown MCS index {index}")))
    }

    /// Rate of `index` in bit/s. Panics on an index outside the table.
    pub fn rate(&self, index: McsIndex) -> f64 {
        self.entries[index.position()].phy_rate
    }

    pub fn max_rate(&self) -> f64 {
        self.entries[self.entries.len() - 1].phy_rate
    }

    pub fn contains(&self, index: McsIndex) -> bool {
        index.position() < self.entries.len()
    }
}

/// Pure payload airtime of a frame, `S / r`.
pub fn frame_duration(rate: f64, frame_bits: f64) -> f64 {
    debug_assert!(rate > 0.0 && frame_bits > 0.0);
    frame_bits / rate
}

/// Expected throughput `θ S / τ(r, S)`, which reduces to `θ r`.
pub fn expected_throughput(rate: f64, _frame_bits: f64, success_prob: f64) -> f64 {
    success_prob * rate
}
