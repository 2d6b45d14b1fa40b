//! Frame success probability `θ(r, Γ)` per MCS and SNR.
//!
//! Two backends share one query interface:
//!
//! * **Analytic** (default): a logistic curve per MCS in the dB domain,
//!   `θ = 1 / (1 + exp(-k (Γ_dB - snr50)))`. The midpoint `snr50` is where an
//!   uncoded frame of the configured size has a 50 % error rate under the
//!   closed-form Gray-coded M-QAM bit error rate, shifted down by a fixed
//!   convolutional coding gain for the MCS code rate (see [`coding_gain_db`])
//!   and up by a receiver implementation loss common to all MCS.
//! * **Table**: per-MCS FER curves loaded from CSV and interpolated linearly
//!   in `(snr_db, ln FER)`.
//!
//! In both modes `θ` is non-decreasing in SNR and non-increasing in MCS index.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rate_model::{CodingRate, McsIndex, McsTable, Modulation};
use crate::units::linear_to_db;

/// Default logistic slope, 1/dB.
pub const DEFAULT_SLOPE_PER_DB: f64 = 6.0;

/// Default receiver implementation loss added to every analytic midpoint, dB.
pub const DEFAULT_IMPLEMENTATION_LOSS_DB: f64 = 6.0;

/// FER values are floored here before taking logarithms.
const FER_LOG_FLOOR: f64 = 1e-12;

fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Uncoded bit error rate over AWGN at symbol SNR `snr` (linear), Gray
/// mapping.
pub fn uncoded_ber(modulation: Modulation, snr: f64) -> f64 {
    match modulation {
        Modulation::Bpsk => q_function((2.0 * snr).sqrt()),
        _ => {
            let m = modulation.order() as f64;
            let bits = modulation.bits_per_symbol() as f64;
            (4.0 / bits) * (1.0 - 1.0 / m.sqrt()) * q_function((3.0 * snr / (m - 1.0)).sqrt())
        }
    }
}

/// Uncoded frame error rate, `1 - (1 - BER)^bits`.
pub fn uncoded_fer(modulation: Modulation, snr: f64, frame_bits: f64) -> f64 {
    let ber = uncoded_ber(modulation, snr).min(1.0);
    -(frame_bits * (-ber).ln_1p()).exp_m1()
}

/// SNR in dB at which the uncoded FER equals one half.
pub fn uncoded_snr50_db(modulation: Modulation, frame_bits: f64) -> f64 {
    let fer = |db: f64| uncoded_fer(modulation, 10f64.powf(db / 10.0), frame_bits);
    let (mut lo, mut hi) = (-20.0f64, 60.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if fer(mid) > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Coding gain of the 802.11 K=7 convolutional code at each puncturing
/// rate, in dB, relative to the uncoded modulation at equal frame error rate.
///
/// Values come from the rate-1/2 soft-decision Eb/N0 requirement of roughly
/// 3.7 dB at the FER midpoint for ~1500-byte frames, and about 4.7, 5.2 and
/// 5.8 dB for the punctured 2/3, 3/4 and 5/6 codes, referred back to symbol
/// SNR against the 8.7 dB uncoded requirement.
pub fn coding_gain_db(rate: CodingRate) -> f64 {
    match (rate.num, rate.den) {
        (1, 2) => 8.0,
        (2, 3) => 5.75,
        (3, 4) => 4.75,
        (5, 6) => 3.7,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticErrorParams {
    /// Per-MCS SNR (dB) at which `θ = 0.5`, indexed by table position.
    pub snr50_db: Vec<f64>,
    pub slope_per_db: f64,
}

impl AnalyticErrorParams {
    pub fn new(snr50_db: Vec<f64>, slope_per_db: f64) -> Result<Self> {
        if !(slope_per_db.is_finite() && slope_per_db > 0.0) {
            return Err(Error::config("error_model.slope_per_db", "must be positive"));
        }
        if snr50_db.is_empty() || snr50_db.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("error_model.snr50_db", "must be non-empty and finite"));
        }
        if snr50_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config(
                "error_model.snr50_db",
                "midpoints must strictly increase with MCS index",
            ));
        }
        Ok(AnalyticErrorParams {
            snr50_db,
            slope_per_db,
        })
    }

    /// Midpoints from the uncoded-BER model, [`coding_gain_db`] and a
    /// common implementation loss.
    pub fn derived(table: &McsTable, slope_per_db: f64, implementation_loss_db: f64) -> Result<Self> {
        if !implementation_loss_db.is_finite() {
            return Err(Error::config("error_model.implementation_loss_db", "must be finite"));
        }
        let bits = table.phy().frame_bits();
        let snr50 = table
            .entries()
            .iter()
            .map(|e| {
                uncoded_snr50_db(e.modulation, bits) - coding_gain_db(e.coding_rate)
                    + implementation_loss_db
            })
            .collect();
        Self::new(snr50, slope_per_db)
    }

    fn theta(&self, pos: usize, snr_db: f64) -> f64 {
        1.0 / (1.0 + (-self.slope_per_db * (snr_db - self.snr50_db[pos])).exp())
    }
}

/// One MCS curve after validation and monotone regularization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FerCurve {
    pub mcs: McsIndex,
    pub snr_db: Vec<f64>,
    pub fer: Vec<f64>,
    #[serde(skip)]
    log_fer: Vec<f64>,
}

impl FerCurve {
    fn new(mcs: McsIndex, snr_db: Vec<f64>, fer: Vec<f64>) -> Self {
        let log_fer = fer.iter().map(|f| f.max(FER_LOG_FLOOR).ln()).collect();
        FerCurve {
            mcs,
            snr_db,
            fer,
            log_fer,
        }
    }

    /// Linear interpolation in `(dB, ln FER)`, clamped outside the grid.
    pub fn fer_at(&self, snr_db: f64) -> f64 {
        let n = self.snr_db.len();
        if snr_db.is_nan() || snr_db <= self.snr_db[0] {
            return self.fer[0];
        }
        if snr_db >= self.snr_db[n - 1] {
            return self.fer[n - 1];
        }
        let hi = self.snr_db.partition_point(|&x| x <= snr_db);
        let lo = hi - 1;
        let f = (snr_db - self.snr_db[lo]) / (self.snr_db[hi] - self.snr_db[lo]);
        let v = (self.log_fer[lo] + f * (self.log_fer[hi] - self.log_fer[lo])).exp();
        if v <= FER_LOG_FLOOR {
            0.0
        } else {
            v.min(1.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FerTable {
    pub curves: Vec<FerCurve>,
    /// Frame size the curves were computed for, if the file declares it.
    pub frame_size_ref_bits: Option<f64>,
    /// Non-fatal issues found while loading (e.g. regularized curves).
    pub warnings: Vec<String>,
}

/// Non-increasing isotonic regression (pool adjacent violators).
fn isotonic_non_increasing(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m2, n2) = blocks[blocks.len() - 1];
            let (m1, n1) = blocks[blocks.len() - 2];
            if m2 <= m1 {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            let n = n1 + n2;
            blocks.push(((m1 * n1 as f64 + m2 * n2 as f64) / n as f64, n));
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, n)| std::iter::repeat_n(m, n))
        .collect()
}

const FER_HEADER: &str = "mcs_index,snr_db,fer";
const FRAME_SIZE_DIRECTIVE: &str = "frame_size_bytes";

/// Parses a FER table from CSV text. `path` is used in error messages only.
pub fn parse_fer_table(text: &str, path: &Path) -> Result<FerTable> {
    let err = |line: usize, message: String| Error::Load {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut header_seen = false;
    let mut frame_size_ref_bits = None;
    let mut groups: Vec<(usize, Vec<f64>, Vec<f64>, usize)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == FRAME_SIZE_DIRECTIVE {
                    let bytes: u32 = value.trim().parse().map_err(|_| {
                        err(line_no, format!("invalid {FRAME_SIZE_DIRECTIVE} `{}`", value.trim()))
                    })?;
                    if bytes == 0 {
                        return Err(err(line_no, format!("{FRAME_SIZE_DIRECTIVE} must be positive")));
                    }
                    frame_size_ref_bits = Some(bytes as f64 * 8.0);
                }
            }
            continue;
        }
        if !header_seen {
            if line.replace(' ', "") != FER_HEADER {
                return Err(err(line_no, format!("expected header `{FER_HEADER}`, found `{line}`")));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(err(line_no, format!("expected 3 fields, found {}", fields.len())));
        }
        let mcs: usize = fields[0]
            .parse()
            .map_err(|_| err(line_no, format!("invalid mcs_index `{}`", fields[0])))?;
        let snr_db: f64 = fields[1]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| err(line_no, format!("invalid snr_db `{}`", fields[1])))?;
        let fer: f64 = fields[2]
            .parse()
            .map_err(|_| err(line_no, format!("invalid fer `{}`", fields[2])))?;
        if !(0.0..=1.0).contains(&fer) {
            return Err(err(line_no, format!("fer {fer} outside [0, 1]")));
        }
        match groups.last_mut() {
            Some((cur, snrs, fers, _)) if *cur == mcs => {
                if snr_db <= *snrs.last().unwrap() {
                    return Err(err(
                        line_no,
                        format!("snr_db {snr_db} not strictly increasing for MCS {mcs}"),
                    ));
                }
                snrs.push(snr_db);
                fers.push(fer);
            }
            last => {
                let expected = last.map_or(1, |g| g.0 + 1);
                if mcs != expected {
                    return Err(err(
                        line_no,
                        format!("expected rows for mcs_index {expected}, found {mcs}"),
                    ));
                }
                groups.push((mcs, vec![snr_db], vec![fer], line_no));
            }
        }
    }
    if !header_seen {
        return Err(err(0, "missing header".into()));
    }
    if groups.is_empty() {
        return Err(err(0, "table has no rows".into()));
    }

    let mut warnings = Vec::new();
    let curves = groups
        .into_iter()
        .map(|(mcs, snrs, fers, first_line)| {
            let regular = isotonic_non_increasing(&fers);
            if regular != fers {
                let msg = format!(
                    "{}:{first_line}: FER curve for MCS {mcs} increases with SNR; applied isotonic regularization",
                    path.display()
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
            FerCurve::new(McsIndex::new(mcs).expect("validated index"), snrs, regular)
        })
        .collect();
    Ok(FerTable {
        curves,
        frame_size_ref_bits,
        warnings,
    })
}

/// Loads and validates a FER table file.
pub fn load_fer_table(path: impl AsRef<Path>) -> Result<FerTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_fer_table(&text, path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ErrorModelKind {
    Analytic(AnalyticErrorParams),
    Table {
        table: FerTable,
        source: Option<PathBuf>,
    },
}

/// Immutable `θ(r, Γ)` lookup shared by the simulator and the oracles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    kind: ErrorModelKind,
    frame_bits: f64,
}

impl ErrorModel {
    pub fn analytic(params: AnalyticErrorParams, frame_bits: f64) -> Self {
        ErrorModel {
            kind: ErrorModelKind::Analytic(params),
            frame_bits,
        }
    }

    /// Default analytic model for `table`.
    pub fn default_for(table: &McsTable) -> Result<Self> {
        let params = AnalyticErrorParams::derived(
            table,
            DEFAULT_SLOPE_PER_DB,
            DEFAULT_IMPLEMENTATION_LOSS_DB,
        )?;
        Ok(Self::analytic(params, table.phy().frame_bits()))
    }

    pub fn from_table(table: FerTable, frame_bits: f64, source: Option<PathBuf>) -> Self {
        ErrorModel {
            kind: ErrorModelKind::Table { table, source },
            frame_bits,
        }
    }

    pub fn kind(&self) -> &ErrorModelKind {
        &self.kind
    }

    /// Number of MCS curves the model covers.
    pub fn len(&self) -> usize {
        match &self.kind {
            ErrorModelKind::Analytic(p) => p.snr50_db.len(),
            ErrorModelKind::Table { table, .. } => table.curves.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `θ` for `mcs` at linear SNR `snr`.
    pub fn success_probability(&self, mcs: McsIndex, snr: f64) -> Result<f64> {
        if mcs.position() >= self.len() {
            return Err(Error::Domain(format!(
                "MCS index {mcs} not covered by the error model ({} curves)",
                self.len()
            )));
        }
        Ok(self.theta(mcs, snr))
    }

    /// Unchecked variant of [`Self::success_probability`].
    pub fn theta(&self, mcs: McsIndex, snr: f64) -> f64 {
        let snr_db = if snr > 0.0 { linear_to_db(snr) } else { f64::NEG_INFINITY };
        match &self.kind {
            ErrorModelKind::Analytic(p) => p.theta(mcs.position(), snr_db),
            ErrorModelKind::Table { table, .. } => {
                // Cumulative minimum keeps θ non-increasing in MCS index even
                // when loaded curves cross.
                table.curves[..=mcs.position()]
                    .iter()
                    .map(|c| self.rescaled_success(table, c.fer_at(snr_db)))
                    .fold(1.0, f64::min)
            }
        }
    }

    fn rescaled_success(&self, table: &FerTable, fer: f64) -> f64 {
        match table.frame_size_ref_bits {
            Some(reference) if reference != self.frame_bits => {
                (1.0 - fer).powf(self.frame_bits / reference)
            }
            _ => 1.0 - fer,
        }
    }
}

/// How frame outcomes are realized from `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutcomeMode {
    /// `y ~ Bernoulli(θ)`.
    Bernoulli,
    /// Deterministic: `y = 1` iff `θ >= threshold`.
    Threshold { threshold: f64 },
}

impl OutcomeMode {
    pub fn realize(self, theta: f64, uniform: f64) -> bool {
        match self {
            OutcomeMode::Bernoulli => uniform < theta,
            OutcomeMode::Threshold { threshold } => theta >= threshold,
        }
    }
}

/// Bernoulli(θ) draw.
pub fn draw_outcome<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> bool {
    rng.random::<f64>() < theta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate_model::{build_mcs_table, PhyConfig};
    use crate::rng::{stream_rng, Stream};
    use crate::units::db_to_linear;

    fn model() -> (McsTable, ErrorModel) {
        let t = build_mcs_table(&PhyConfig::default()).unwrap();
        let m = ErrorModel::default_for(&t).unwrap();
        (t, m)
    }

    #[test]
    fn logistic_midpoint_and_saturation() {
        let (t, m) = model();
        let ErrorModelKind::Analytic(p) = m.kind() else {
            unreachable!()
        };
        for idx in t.indices() {
            let mid = db_to_linear(p.snr50_db[idx.position()]);
            assert!((m.success_probability(idx, mid).unwrap() - 0.5).abs() < 1e-9);
            assert!(m.theta(idx, db_to_linear(80.0)) > 1.0 - 1e-12);
            assert!(m.theta(idx, 0.0) == 0.0);
            assert!(m.theta(idx, db_to_linear(-40.0)) < 1e-12);
        }
        assert!(m.success_probability(McsIndex::new(9).unwrap(), 1.0).is_err());
    }

    #[test]
    fn ber_closed_forms() {
        // QPSK with Gray mapping equals BPSK at half the symbol SNR.
        for db in [0.0, 5.0, 10.0] {
            let s = db_to_linear(db);
            let q = uncoded_ber(Modulation::Qpsk, s);
            let b = uncoded_ber(Modulation::Bpsk, s / 2.0);
            assert!(((q - b) / b).abs() < 1e-12);
        }
        assert!(uncoded_ber(Modulation::Qam64, 100.0) > uncoded_ber(Modulation::Qam16, 100.0));
    }

    #[test]
    fn isotonic_regression_pools_violators() {
        assert_eq!(isotonic_non_increasing(&[1.0, 0.5, 0.7, 0.1]), vec![1.0, 0.6, 0.6, 0.1]);
        let pooled = isotonic_non_increasing(&[0.2, 0.4]);
        assert!(pooled.iter().all(|v| (v - 0.3).abs() < 1e-15));
        assert_eq!(isotonic_non_increasing(&[0.9, 0.5, 0.0]), vec![0.9, 0.5, 0.0]);
    }

    #[test]
    fn outcome_draws() {
        let mut rng = stream_rng(3, Stream::Outcome);
        assert!((0..1000).all(|_| draw_outcome(1.0, &mut rng)));
        assert!((0..1000).all(|_| !draw_outcome(0.0, &mut rng)));
        let n = 100_000;
        let hits = (0..n).filter(|_| draw_outcome(0.3, &mut rng)).count();
        assert!((hits as f64 / n as f64 - 0.3).abs() < 0.01);
    }

    #[test]
    fn threshold_mode() {
        let mode = OutcomeMode::Threshold { threshold: 0.5 };
        assert!(mode.realize(0.5, 0.99));
        assert!(!mode.realize(0.49, 0.0));
        assert!(OutcomeMode::Bernoulli.realize(0.3, 0.29));
        assert!(!OutcomeMode::Bernoulli.realize(0.3, 0.3));
    }

    #[test]
    fn table_interpolates_in_log_domain() {
        let text = "mcs_index,snr_db,fer\n1,0,1.0\n1,10,0.01\n";
        let t = parse_fer_table(text, Path::new("x.csv")).unwrap();
        let c = &t.curves[0];
        assert!((c.fer_at(5.0) - 0.1).abs() < 1e-12);
        assert_eq!(c.fer_at(-3.0), 1.0);
        assert_eq!(c.fer_at(30.0), 0.01);
    }

    #[test]
    fn frame_size_rescaling() {
        let text = "# frame_size_bytes = 729\nmcs_index,snr_db,fer\n1,0,0.5\n1,1,0.5\n";
        let t = parse_fer_table(text, Path::new("x.csv")).unwrap();
        assert_eq!(t.frame_size_ref_bits, Some(5832.0));
        let m = ErrorModel::from_table(t, 11664.0, None);
        assert!((m.theta(McsIndex::LOWEST, 1.0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn table_errors_carry_line_numbers() {
        let p = Path::new("bad.csv");
        let e = parse_fer_table("mcs_index,snr_db,fer\n1,0,0.9\n1,1,1.5\n", p).unwrap_err();
        assert!(e.to_string().contains("bad.csv:3"), "{e}");
        assert!(parse_fer_table("mcs,snr,fer\n", p).is_err());
        let e = parse_fer_table("mcs_index,snr_db,fer\n1,2,0.9\n1,1,0.5\n", p).unwrap_err();
        assert!(e.to_string().contains(":3:"), "{e}");
        assert!(parse_fer_table("mcs_index,snr_db,fer\n2,0,0.5\n", p).is_err());
        assert!(parse_fer_table("mcs_index,snr_db,fer\n1,0,0.5\n2,0,0.5\n1,3,0.1\n", p).is_err());
        assert!(parse_fer_table("mcs_index,snr_db,fer\n", p).is_err());
        assert!(parse_fer_table("mcs_index,snr_db,fer\n1,x,0.5\n", p).is_err());
    }
}
