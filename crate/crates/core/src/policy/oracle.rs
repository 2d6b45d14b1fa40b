//! Genie-aided baselines. Both pick the fastest MCS whose success
//! probability clears `1 - fer_epsilon`, falling back to the lowest MCS when
//! none does. The full oracle sees the instantaneous SNR; the semi-oracle
//! only the large-scale SNR.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{DecisionInput, Feedback, PolicyKind, RatePolicy};
use crate::error::Result;
use crate::error_model::ErrorModel;
use crate::rate_model::{McsIndex, McsTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub fer_epsilon: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { fer_epsilon: 1e-6 }
    }
}

/// Highest MCS with `θ >= 1 - fer_epsilon` at `snr`, else the lowest MCS.
pub fn oracle_choice(
    table: &McsTable,
    error_model: &ErrorModel,
    fer_epsilon: f64,
    snr: f64,
) -> McsIndex {
    let required = 1.0 - fer_epsilon;
    table
        .indices()
        .rev()
        .find(|&i| error_model.theta(i, snr) >= required)
        .unwrap_or(McsIndex::LOWEST)
}

#[derive(Debug, Clone)]
pub struct Oracle {
    config: OracleConfig,
    table: Arc<McsTable>,
    error_model: Arc<ErrorModel>,
    large_scale_only: bool,
}

impl Oracle {
    pub fn full(config: OracleConfig, table: Arc<McsTable>, error_model: Arc<ErrorModel>) -> Self {
        Oracle {
            config,
            table,
            error_model,
            large_scale_only: false,
        }
    }

    pub fn semi(config: OracleConfig, table: Arc<McsTable>, error_model: Arc<ErrorModel>) -> Self {
        Oracle {
            large_scale_only: true,
            ..Self::full(config, table, error_model)
        }
    }

    pub fn choose(&self, snr: f64) -> McsIndex {
        oracle_choice(&self.table, &self.error_model, self.config.fer_epsilon, snr)
    }
}

impl RatePolicy for Oracle {
    fn kind(&self) -> PolicyKind {
        if self.large_scale_only {
            PolicyKind::SemiOracle
        } else {
            PolicyKind::Oracle
        }
    }

    fn select(&mut self, input: &DecisionInput) -> Result<McsIndex> {
        let snr = if self.large_scale_only {
            input.snr_large_scale
        } else {
            input.snr
        };
        Ok(self.choose(snr))
    }

    fn observe(&mut self, _feedback: &Feedback) -> Result<()> {
        Ok(())
    }

    fn reset(&mut self) {}
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error_model::{AnalyticErrorParams, ErrorModelKind};
    use crate::rate_model::{build_mcs_table, PhyConfig};
    use crate::scenario::Context;
    use crate::units::db_to_linear;

    fn setup() -> (Arc<McsTable>, Arc<ErrorModel>) {
        let t = build_mcs_table(&PhyConfig::default()).unwrap();
        let m = ErrorModel::default_for(&t).unwrap();
        (Arc::new(t), Arc::new(m))
    }

    fn midpoints(m: &ErrorModel) -> &AnalyticErrorParams {
        match m.kind() {
            ErrorModelKind::Analytic(p) => p,
            _ => unreachable!(),
        }
    }

    #[test]
    fn extremes() {
        let (t, m) = setup();
        let o = Oracle::full(OracleConfig::default(), t, m);
        assert_eq!(o.choose(db_to_linear(60.0)).get(), 8);
        assert_eq!(o.choose(db_to_linear(-20.0)).get(), 1);
    }

    #[test]
    fn threshold_scan() {
        let (t, m) = setup();
        let p = midpoints(&m).clone();
        // θ(5) = 1 - 1e-9 places the SNR ln(1e9)/k above midpoint 5.
        let snr_db = p.snr50_db[4] + (1e9f64).ln() / p.slope_per_db;
        let snr = db_to_linear(snr_db);
        assert!((1.0 - m.theta(McsIndex::new(5).unwrap(), snr) - 1e-9).abs() < 1e-12);
        let theta6 = m.theta(McsIndex::new(6).unwrap(), snr);
        assert!(theta6 < 1.0 - 1e-6, "θ6 = {theta6}");
        let o = Oracle::full(OracleConfig::default(), t, m);
        assert_eq!(o.choose(snr).get(), 5);
    }

    #[test]
    fn semi_oracle_ignores_fading() {
        let (t, m) = setup();
        let mut full = Oracle::full(OracleConfig::default(), t.clone(), m.clone());
        let mut semi = Oracle::semi(OracleConfig::default(), t, m.clone());
        let ctx = Context {
            distance_m: 100.0,
            obstacle: false,
        };
        let strong = db_to_linear(25.0);
        let deep_fade = DecisionInput {
            time_s: 0.0,
            context: ctx,
            snr: strong * 0.05,
            snr_large_scale: strong,
        };
        let f = full.select(&deep_fade).unwrap();
        let s = semi.select(&deep_fade).unwrap();
        assert!(s > f);
        assert!(m.theta(s, deep_fade.snr) < 0.5);
        assert!(m.theta(f, deep_fade.snr) >= 1.0 - 1e-6);

        let unit = DecisionInput {
            snr: strong,
            ..deep_fade
        };
        assert_eq!(full.select(&unit).unwrap(), semi.select(&unit).unwrap());
        assert_eq!(full.kind(), PolicyKind::Oracle);
        assert_eq!(semi.kind(), PolicyKind::SemiOracle);
    }
}
