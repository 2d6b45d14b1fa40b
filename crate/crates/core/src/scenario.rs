//! UAV trajectories, the LoS/NLoS/LoS blockage schedule and the per-instant
//! link context.
//!
//! Both link endpoints follow independent random-waypoint paths at constant
//! speed inside the coverage box. Each episode has exactly one NLoS interval,
//! bracketed by two LoS periods that are at least `margin_s` long.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_obstacle_loss, ObstacleBounds};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Distances are clamped to this floor so the context and FSPL stay defined
/// when the two paths cross.
pub const MIN_LINK_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaypointPolicy {
    RandomWaypoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub bounds_m: [f64; 3],
    pub duration_s: f64,
    pub nlos_min_duration_s: f64,
    pub margin_s: f64,
    pub uav_speed_mps: f64,
    pub waypoint_policy: WaypointPolicy,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            bounds_m: [1000.0, 1000.0, 20.0],
            duration_s: 30.0,
            nlos_min_duration_s: 2.0,
            margin_s: 1.0,
            uav_speed_mps: 2.0,
            waypoint_policy: WaypointPolicy::RandomWaypoint,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bounds_m.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::config("scenario.bounds_m", "all extents must be positive"));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::config("scenario.duration_s", "must be positive"));
        }
        if !(self.nlos_min_duration_s > 0.0 && self.nlos_min_duration_s < self.duration_s) {
            return Err(Error::config(
                "scenario.nlos_min_duration_s",
                "must be positive and shorter than scenario.duration_s",
            ));
        }
        if !(self.margin_s.is_finite() && self.margin_s > 0.0) {
            return Err(Error::config("scenario.margin_s", "must be positive"));
        }
        if self.nlos_min_duration_s + 2.0 * self.margin_s >= self.duration_s {
            return Err(Error::config(
                "scenario.nlos_min_duration_s",
                "nlos_min_duration_s + 2 * margin_s must be shorter than duration_s",
            ));
        }
        if !(self.uav_speed_mps.is_finite() && self.uav_speed_mps >= 0.0) {
            return Err(Error::config("scenario.uav_speed_mps", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub time_s: f64,
    pub position: [f64; 3],
}

/// Piecewise-linear path through time-stamped waypoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub waypoints: Vec<Waypoint>,
}

impl Trajectory {
    pub fn position(&self, t: f64) -> [f64; 3] {
        let wps = &self.waypoints;
        let next = wps.partition_point(|w| w.time_s <= t);
        if next == 0 {
            return wps[0].position;
        }
        if next == wps.len() {
            return wps[wps.len() - 1].position;
        }
        let (a, b) = (&wps[next - 1], &wps[next]);
        let f = (t - a.time_s) / (b.time_s - a.time_s);
        let mut p = [0.0; 3];
        for k in 0..3 {
            p[k] = a.position[k] + f * (b.position[k] - a.position[k]);
        }
        p
    }
}

fn uniform_point<R: Rng>(bounds: &[f64; 3], rng: &mut R) -> [f64; 3] {
    [
        rng.random_range(0.0..=bounds[0]),
        rng.random_range(0.0..=bounds[1]),
        rng.random_range(0.0..=bounds[2]),
    ]
}

/// Random-waypoint path covering `[0, duration_s]`.
pub fn generate_trajectory<R: Rng>(config: &ScenarioConfig, rng: &mut R) -> Trajectory {
    let start = uniform_point(&config.bounds_m, rng);
    let mut waypoints = vec![Waypoint {
        time_s: 0.0,
        position: start,
    }];
    if config.uav_speed_mps == 0.0 {
        return Trajectory { waypoints };
    }
    let mut t = 0.0;
    let mut here = start;
    while t <= config.duration_s {
        let next = uniform_point(&config.bounds_m, rng);
        let dist = distance(&here, &next);
        if dist == 0.0 {
            continue;
        }
        t += dist / config.uav_speed_mps;
        waypoints.push(Waypoint {
            time_s: t,
            position: next,
        });
        here = next;
    }
    Trajectory { waypoints }
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockageSchedule {
    pub nlos_start: f64,
    pub nlos_end: f64,
    /// Attenuation applied for the whole event, in dB.
    pub event_loss_db: f64,
}

impl BlockageSchedule {
    pub fn is_nlos(&self, t: f64) -> bool {
        self.nlos_start <= t && t < self.nlos_end
    }

    pub fn nlos_duration(&self) -> f64 {
        self.nlos_end - self.nlos_start
    }
}

/// Draws the single NLoS interval and its attenuation.
pub fn generate_blockage<R: Rng>(
    config: &ScenarioConfig,
    loss: ObstacleBounds,
    rng: &mut R,
) -> Result<BlockageSchedule> {
    let t_end = config.duration_s;
    let min_dur = config.nlos_min_duration_s;
    let margin = config.margin_s;
    if min_dur + 2.0 * margin >= t_end {
        return Err(Error::config(
            "scenario.nlos_min_duration_s",
            format!(
                "NLoS minimum {min_dur} s plus two {margin} s margins does not fit in {t_end} s"
            ),
        ));
    }
    let nlos_start = rng.random_range(margin..t_end - min_dur - margin);
    let max_dur = t_end - nlos_start - margin;
    let duration = if max_dur > min_dur {
        rng.random_range(min_dur..max_dur)
    } else {
        min_dur
    };
    Ok(BlockageSchedule {
        nlos_start,
        nlos_end: nlos_start + duration,
        event_loss_db: sample_obstacle_loss(loss, rng),
    })
}

/// Side information available to a rate controller at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub distance_m: f64,
    pub obstacle: bool,
}

/// One generated episode: both trajectories plus the blockage schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub duration_s: f64,
    pub trajectories: [Trajectory; 2],
    pub blockage: BlockageSchedule,
}

impl Scenario {
    /// Pure function of `(config, loss bounds, seed)`.
    pub fn generate(config: &ScenarioConfig, loss: ObstacleBounds, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut traj_rng = stream_rng(seed, Stream::Trajectory);
        let a = generate_trajectory(config, &mut traj_rng);
        let b = generate_trajectory(config, &mut traj_rng);
        let blockage = generate_blockage(config, loss, &mut stream_rng(seed, Stream::Blockage))?;
        Ok(Scenario {
            seed,
            duration_s: config.duration_s,
            trajectories: [a, b],
            blockage,
        })
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.duration_s).contains(&t) {
            return Err(Error::Domain(format!(
                "time {t} s outside episode [0, {}]",
                self.duration_s
            )));
        }
        Ok(())
    }

    pub fn distance_at(&self, t: f64) -> f64 {
        let p = self.trajectories[0].position(t);
        let q = self.trajectories[1].position(t);
        distance(&p, &q).max(MIN_LINK_DISTANCE_M)
    }

    pub fn context_at(&self, t: f64) -> Result<Context> {
        self.check_time(t)?;
        Ok(Context {
            distance_m: self.distance_at(t),
            obstacle: self.blockage.is_nlos(t),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LOSS: ObstacleBounds = ObstacleBounds {
        min_db: 10.0,
        max_db: 15.0,
    };

    #[test]
    fn static_nodes_keep_constant_distance() {
        let cfg = ScenarioConfig {
            uav_speed_mps: 0.0,
            ..Default::default()
        };
        let s = Scenario::generate(&cfg, LOSS, 3).unwrap();
        let d0 = s.distance_at(0.0);
        for k in 0..300 {
            assert_eq!(s.distance_at(k as f64 * 0.1), d0);
        }
    }

    #[test]
    fn positions_stay_in_bounds() {
        let cfg = ScenarioConfig::default();
        for seed in 0..100 {
            let s = Scenario::generate(&cfg, LOSS, seed).unwrap();
            for tr in &s.trajectories {
                for k in 0..=3000 {
                    let p = tr.position(k as f64 * 0.01);
                    for d in 0..3 {
                        assert!(p[d] >= 0.0 && p[d] <= cfg.bounds_m[d], "seed {seed}: {p:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = ScenarioConfig::default();
        let a = Scenario::generate(&cfg, LOSS, 42).unwrap();
        for _ in 0..100 {
            assert_eq!(a, Scenario::generate(&cfg, LOSS, 42).unwrap());
        }
        assert_ne!(a, Scenario::generate(&cfg, LOSS, 43).unwrap());
    }

    #[test]
    fn blockage_respects_margins() {
        let cfg = ScenarioConfig::default();
        for seed in 0..1000 {
            let s = Scenario::generate(&cfg, LOSS, seed).unwrap();
            let b = s.blockage;
            assert!(b.nlos_start >= 1.0, "first LoS too short: {b:?}");
            assert!(cfg.duration_s - b.nlos_end >= 1.0 - 1e-12, "second LoS too short: {b:?}");
            assert!(b.nlos_duration() >= 2.0);
            assert!(0.0 < b.nlos_start && b.nlos_start < b.nlos_end && b.nlos_end < 30.0);
            assert!((10.0..=15.0).contains(&b.event_loss_db));
        }
    }

    #[test]
    fn infeasible_blockage_is_rejected() {
        let cfg = ScenarioConfig {
            nlos_min_duration_s: 28.5,
            ..Default::default()
        };
        let mut rng = stream_rng(0, Stream::Blockage);
        assert!(matches!(
            generate_blockage(&cfg, LOSS, &mut rng),
            Err(Error::Config { .. })
        ));
        let cfg = ScenarioConfig {
            nlos_min_duration_s: 40.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn context_follows_schedule() {
        let s = Scenario::generate(&ScenarioConfig::default(), LOSS, 9).unwrap();
        let b = s.blockage;
        assert!(!s.context_at(0.0).unwrap().obstacle);
        assert!(s.context_at(0.5 * (b.nlos_start + b.nlos_end)).unwrap().obstacle);
        assert!(s.context_at(b.nlos_start).unwrap().obstacle);
        assert!(!s.context_at(b.nlos_end).unwrap().obstacle);
        assert!(s.context_at(30.5).is_err());
        assert!(s.context_at(-0.1).is_err());

        let t = 12.34;
        let p = s.trajectories[0].position(t);
        let q = s.trajectories[1].position(t);
        let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
        assert_eq!(s.context_at(t).unwrap().distance_m, d.max(MIN_LINK_DISTANCE_M));
    }

    #[test]
    fn flag_transitions_exactly_twice() {
        let s = Scenario::generate(&ScenarioConfig::default(), LOSS, 5).unwrap();
        let mut flips = 0;
        let mut prev = false;
        for k in 0..=30_000 {
            let f = s.context_at(k as f64 * 1e-3).unwrap().obstacle;
            if f != prev {
                flips += 1;
            }
            prev = f;
        }
        assert_eq!(flips, 2);
    }
}
