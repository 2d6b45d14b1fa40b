//! Air-to-air channel: free-space path loss, obstacle attenuation, Rician
//! small-scale fading and the resulting per-frame SNR.
//!
//! Fading follows a block-fading contract on a fixed coherence grid. The gain
//! for slot `floor(t / coherence_slot_s)` is drawn from a generator keyed by
//! `(seed, slot)`, so every policy simulated on the same seed sees the same
//! channel at the same instant regardless of how many frames it sends.

use std::cell::Cell;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{keyed_rng, Stream};
use crate::scenario::Scenario;
use crate::units::{db_to_linear, dbm_to_watts};

/// Free-space path loss in dB, `20 log10(λ / (4π d))`. Negative beyond λ/4π.
pub fn fspl_db(distance_m: f64, wavelength_m: f64) -> Result<f64> {
    if !(distance_m > 0.0 && distance_m.is_finite()) {
        return Err(Error::Domain(format!("distance must be positive, got {distance_m}")));
    }
    Ok(20.0 * (wavelength_m / (4.0 * PI * distance_m)).log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleBounds {
    pub min_db: f64,
    pub max_db: f64,
}

/// Uniform obstacle attenuation in `[min_db, max_db]`.
pub fn sample_obstacle_loss<R: Rng + ?Sized>(bounds: ObstacleBounds, rng: &mut R) -> f64 {
    if bounds.min_db == bounds.max_db {
        return bounds.min_db;
    }
    rng.random_range(bounds.min_db..=bounds.max_db)
}

/// Power gain `|h|^2` of a unit-mean Rician channel with linear K-factor
/// `k`.
///
/// The amplitude is the magnitude of a complex Gaussian with mean `ν` and
/// per-component variance `σ²`, where `ν² = k/(k+1)` and `2σ² = 1/(k+1)`.
pub fn sample_rician_power<R: Rng + ?Sized>(k: f64, rng: &mut R) -> f64 {
    debug_assert!(k >= 0.0);
    if k.is_infinite() {
        return 1.0;
    }
    let nu = (k / (k + 1.0)).sqrt();
    let sigma = (0.5 / (k + 1.0)).sqrt();
    let i: f64 = rng.sample(StandardNormal);
    let q: f64 = rng.sample(StandardNormal);
    let re = nu + sigma * i;
    let im = sigma * q;
    re * re + im * im
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleMode {
    /// One attenuation draw per NLoS event.
    PerEvent,
    /// Fresh attenuation every coherence slot while NLoS.
    PerSlot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub wavelength_m: f64,
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub bandwidth_hz: f64,
    pub rician_k_db: f64,
    pub obstacle_min_db: f64,
    pub obstacle_max_db: f64,
    pub coherence_slot_s: f64,
    pub obstacle_mode: ObstacleMode,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            wavelength_m: 0.125,
            tx_power_dbm: 20.0,
            noise_psd_dbm_hz: -174.0,
            bandwidth_hz: 20e6,
            rician_k_db: 13.0,
            obstacle_min_db: 10.0,
            obstacle_max_db: 15.0,
            coherence_slot_s: 1e-3,
            obstacle_mode: ObstacleMode::PerEvent,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("channel.wavelength_m", self.wavelength_m),
            ("channel.bandwidth_hz", self.bandwidth_hz),
            ("channel.coherence_slot_s", self.coherence_slot_s),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(field, "must be strictly positive"));
            }
        }
        for (field, v) in [
            ("channel.tx_power_dbm", self.tx_power_dbm),
            ("channel.noise_psd_dbm_hz", self.noise_psd_dbm_hz),
            ("channel.rician_k_db", self.rician_k_db),
        ] {
            if !v.is_finite() {
                return Err(Error::config(field, "must be finite"));
            }
        }
        if !(self.obstacle_min_db >= 0.0 && self.obstacle_min_db <= self.obstacle_max_db)
            || !self.obstacle_max_db.is_finite()
        {
            return Err(Error::config(
                "channel.obstacle_min_db",
                "obstacle bounds must satisfy 0 <= min <= max",
            ));
        }
        Ok(())
    }

    pub fn tx_power_w(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }

    /// `N0 * B` in watts.
    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_hz) * self.bandwidth_hz
    }

    pub fn rician_k(&self) -> f64 {
        db_to_linear(self.rician_k_db)
    }

    pub fn obstacle_bounds(&self) -> ObstacleBounds {
        ObstacleBounds {
            min_db: self.obstacle_min_db,
            max_db: self.obstacle_max_db,
        }
    }

    pub fn slot_index(&self, t: f64) -> u64 {
        (t / self.coherence_slot_s).floor() as u64
    }
}

/// Linear SNR `P L |h|^2 / (N0 B)` with `L` the FSPL gain divided by the
/// obstacle attenuation.
pub fn snr(params: &ChannelParams, fspl_db: f64, obstacle_db: f64, fading_power: f64) -> f64 {
    debug_assert!(fading_power >= 0.0);
    params.tx_power_w() * db_to_linear(fspl_db - obstacle_db) * fading_power
        / params.noise_power_w()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    pub fspl_db: f64,
    pub obstacle_db: f64,
    pub fading_power: f64,
    pub snr: f64,
}

impl ChannelState {
    /// SNR with the small-scale term removed (`|h|^2 = 1`).
    pub fn large_scale_snr(&self, params: &ChannelParams) -> f64 {
        snr(params, self.fspl_db, self.obstacle_db, 1.0)
    }
}

/// Channel realization for one episode.
#[derive(Debug, Clone)]
pub struct ChannelModel<'a> {
    params: &'a ChannelParams,
    scenario: &'a Scenario,
    seed: u64,
    k: f64,
    // Last (slot, |h|^2) pair; frames are much shorter than a slot.
    cached: Cell<Option<(u64, f64)>>,
}

impl<'a> ChannelModel<'a> {
    pub fn new(params: &'a ChannelParams, scenario: &'a Scenario) -> Self {
        ChannelModel {
            params,
            scenario,
            seed: scenario.seed,
            k: params.rician_k(),
            cached: Cell::new(None),
        }
    }

    pub fn params(&self) -> &ChannelParams {
        self.params
    }

    pub fn fading_power(&self, slot: u64) -> f64 {
        if let Some((cached_slot, power)) = self.cached.get() {
            if cached_slot == slot {
                return power;
            }
        }
        let power = sample_rician_power(self.k, &mut keyed_rng(self.seed, Stream::Fading, slot));
        self.cached.set(Some((slot, power)));
        power
    }

    fn obstacle_db(&self, t: f64, slot: u64) -> f64 {
        let b = &self.scenario.blockage;
        if !b.is_nlos(t) {
            return 0.0;
        }
        match self.params.obstacle_mode {
            ObstacleMode::PerEvent => b.event_loss_db,
            ObstacleMode::PerSlot => sample_obstacle_loss(
                self.params.obstacle_bounds(),
                &mut keyed_rng(self.seed, Stream::Obstacle, slot),
            ),
        }
    }

    /// Channel seen by a frame starting at `t`.
    pub fn state_at(&self, t: f64) -> Result<ChannelState> {
        if !(0.0..=self.scenario.duration_s).contains(&t) {
            return Err(Error::Domain(format!(
                "time {t} s outside episode [0, {}]",
                self.scenario.duration_s
            )));
        }
        let slot = self.params.slot_index(t);
        let fspl = fspl_db(self.scenario.distance_at(t), self.params.wavelength_m)?;
        let obstacle = self.obstacle_db(t, slot);
        let fading = self.fading_power(slot);
        Ok(ChannelState {
            fspl_db: fspl,
            obstacle_db: obstacle,
            fading_power: fading,
            snr: snr(self.params, fspl, obstacle, fading),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::scenario::ScenarioConfig;
    use crate::units::linear_to_db;

    #[test]
    fn fspl_examples() {
        assert!((fspl_db(1.0, 0.125).unwrap() - (-40.046)).abs() < 1e-3);
        assert!((fspl_db(1000.0, 0.125).unwrap() - (-100.046)).abs() < 1e-3);
        let d = fspl_db(400.0, 0.125).unwrap() - fspl_db(800.0, 0.125).unwrap();
        assert!((d - 20.0 * 2f64.log10()).abs() < 1e-12);
        assert!(fspl_db(0.0, 0.125).is_err());
        assert!(fspl_db(-3.0, 0.125).is_err());
    }

    #[test]
    fn obstacle_loss_draws() {
        let mut rng = stream_rng(1, Stream::Obstacle);
        let b = ObstacleBounds {
            min_db: 10.0,
            max_db: 15.0,
        };
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let v = sample_obstacle_loss(b, &mut rng);
            assert!((10.0..=15.0).contains(&v));
            sum += v;
        }
        assert!((sum / n as f64 - 12.5).abs() < 0.05);
        let fixed = ObstacleBounds {
            min_db: 12.0,
            max_db: 12.0,
        };
        assert_eq!(sample_obstacle_loss(fixed, &mut rng), 12.0);
    }

    #[test]
    fn rician_limits() {
        let mut rng = stream_rng(2, Stream::Fading);
        assert_eq!(sample_rician_power(f64::INFINITY, &mut rng), 1.0);
        let k = 10f64.powf(1.3);
        assert!((k / (k + 1.0) - 0.9523).abs() < 1e-4);
        let n = 1_000_000;
        let mean = (0..n).map(|_| sample_rician_power(k, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn snr_bookkeeping() {
        let p = ChannelParams::default();
        let noise_dbm = -174.0 + linear_to_db(20e6);
        assert!((noise_dbm - (-100.99)).abs() < 0.01);
        let g = linear_to_db(snr(&p, -80.0, 0.0, 1.0));
        assert!((g - (20.0 - 80.0 - noise_dbm)).abs() < 1e-9);
        assert!((g - 40.99).abs() < 0.01);
        let blocked = linear_to_db(snr(&p, -80.0, 12.5, 1.0));
        assert!((g - blocked - 12.5).abs() < 1e-9);
        assert!(snr(&p, -80.0, 3.0, 1.0) > snr(&p, -80.0, 3.1, 1.0));
        assert!(snr(&p, -80.0, 3.0, 0.6) < snr(&p, -80.0, 3.0, 0.7));
    }

    #[test]
    fn slot_keyed_fading() {
        let params = ChannelParams::default();
        let bounds = params.obstacle_bounds();
        let scenario = Scenario::generate(&ScenarioConfig::default(), bounds, 11).unwrap();
        let ch = ChannelModel::new(&params, &scenario);
        let a = ch.state_at(5.0004).unwrap();
        let _ = ch.state_at(17.2).unwrap();
        let b = ch.state_at(5.0001).unwrap();
        assert_eq!(a.fading_power, b.fading_power);
        assert!(ch.state_at(31.0).is_err());

        let b = scenario.blockage;
        let los = ch.state_at(b.nlos_start * 0.5).unwrap();
        assert_eq!(los.obstacle_db, 0.0);
        let nlos = ch.state_at(b.nlos_start + 0.1).unwrap();
        assert_eq!(nlos.obstacle_db, b.event_loss_db);

        let s = ch.state_at(3.3).unwrap();
        let recomposed = snr(&params, s.fspl_db, s.obstacle_db, s.fading_power);
        assert!(((s.snr - recomposed) / recomposed).abs() < 1e-12);
    }

    #[test]
    fn per_slot_obstacle_mode_stays_in_bounds() {
        let params = ChannelParams {
            obstacle_mode: ObstacleMode::PerSlot,
            ..Default::default()
        };
        let scenario =
            Scenario::generate(&ScenarioConfig::default(), params.obstacle_bounds(), 4).unwrap();
        let ch = ChannelModel::new(&params, &scenario);
        let b = scenario.blockage;
        let a = ch.state_at(b.nlos_start + 0.0105).unwrap().obstacle_db;
        let c = ch.state_at(b.nlos_start + 0.5005).unwrap().obstacle_db;
        assert!((10.0..=15.0).contains(&a) && (10.0..=15.0).contains(&c));
        assert_ne!(a, c);
    }
}
