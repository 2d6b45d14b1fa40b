//! Experiment configuration.
//!
//! A configuration file is a JSON object whose keys are dotted paths such as
//! `channel.tx_power_dbm` or `run.seeds`. Nested objects are flattened, so
//! `{"channel": {"tx_power_dbm": 20}}` is equivalent. Every key that is not
//! set keeps its default. Unknown keys are rejected.
//!
//! The same keys can be overridden one at a time with
//! [`ExperimentConfig::set`], which is what `--set key=value` and the named
//! command-line flags use.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::channel::{ChannelParams, ObstacleMode};
use crate::error::{Error, Result};
use crate::error_model::{
    load_fer_table, AnalyticErrorParams, ErrorModel, OutcomeMode, DEFAULT_IMPLEMENTATION_LOSS_DB,
    DEFAULT_SLOPE_PER_DB,
};
use crate::metrics::MetricsConfig;
use crate::policy::{PolicyConfig, PolicyKind};
use crate::rate_model::{build_mcs_table, McsTable, PhyConfig};
use crate::scenario::ScenarioConfig;
use crate::sim::Simulator;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorModelMode {
    Analytic,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeKind {
    Bernoulli,
    Threshold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModelConfig {
    pub mode: ErrorModelMode,
    pub table_path: Option<PathBuf>,
    pub slope_per_db: f64,
    pub implementation_loss_db: f64,
    pub outcome: OutcomeKind,
    /// Success threshold on `θ` in threshold mode.
    pub threshold: f64,
}

impl Default for ErrorModelConfig {
    fn default() -> Self {
        ErrorModelConfig {
            mode: ErrorModelMode::Analytic,
            table_path: None,
            slope_per_db: DEFAULT_SLOPE_PER_DB,
            implementation_loss_db: DEFAULT_IMPLEMENTATION_LOSS_DB,
            outcome: OutcomeKind::Bernoulli,
            threshold: 0.5,
        }
    }
}

impl ErrorModelConfig {
    pub fn outcome_mode(&self) -> OutcomeMode {
        match self.outcome {
            OutcomeKind::Bernoulli => OutcomeMode::Bernoulli,
            OutcomeKind::Threshold => OutcomeMode::Threshold {
                threshold: self.threshold,
            },
        }
    }

    /// Builds the error model for `table`, loading the FER file in table
    /// mode.
    pub fn build(&self, table: &McsTable) -> Result<ErrorModel> {
        match self.mode {
            ErrorModelMode::Analytic => {
                let params = AnalyticErrorParams::derived(
                    table,
                    self.slope_per_db,
                    self.implementation_loss_db,
                )?;
                Ok(ErrorModel::analytic(params, table.phy().frame_bits()))
            }
            ErrorModelMode::Table => {
                let path = self.table_path.as_ref().ok_or_else(|| {
                    Error::config("error_model.table_path", "required in table mode")
                })?;
                let fer = load_fer_table(path)?;
                Ok(ErrorModel::from_table(fer, table.phy().frame_bits(), Some(path.clone())))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Number of consecutive seeds.
    pub seeds: u64,
    pub seed_start: u64,
    pub policies: Vec<PolicyKind>,
    pub out: PathBuf,
    pub dump_traces: bool,
    pub dump_scenarios: bool,
    /// Seed that gets a dense throughput-vs-time export; defaults to the
    /// first seed.
    pub plot_seed: Option<u64>,
    /// Worker threads; `0` uses one per core.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seeds: 100,
            seed_start: 1,
            policies: PolicyKind::ALL.to_vec(),
            out: PathBuf::from("out"),
            dump_traces: false,
            dump_scenarios: false,
            plot_seed: None,
            jobs: 0,
        }
    }
}

impl RunConfig {
    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds).map(|k| self.seed_start + k).collect()
    }

    pub fn plot_seed(&self) -> u64 {
        self.plot_seed.unwrap_or(self.seed_start)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub phy: PhyConfig,
    pub channel: ChannelParams,
    pub scenario: ScenarioConfig,
    pub error_model: ErrorModelConfig,
    pub policy: PolicyConfig,
    /// Genie used for the per-frame regret.
    pub regret_reference: PolicyKind,
    pub metrics: MetricsConfig,
    pub run: RunConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            phy: PhyConfig::default(),
            channel: ChannelParams::default(),
            scenario: ScenarioConfig::default(),
            error_model: ErrorModelConfig::default(),
            policy: PolicyConfig::default(),
            regret_reference: PolicyKind::Oracle,
            metrics: MetricsConfig::default(),
            run: RunConfig::default(),
        }
    }
}

fn num(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| Error::config(key, "not a number")),
        Value::String(s) => s
            .trim()
            .parse()
            .map_err(|_| Error::config(key, format!("expected a number, got `{s}`"))),
        _ => Err(Error::config(key, format!("expected a number, got {v}"))),
    }
}

fn uint(key: &str, v: &Value) -> Result<u64> {
    let x = num(key, v)?;
    if x < 0.0 || x.fract() != 0.0 || x > u64::MAX as f64 {
        return Err(Error::config(key, format!("expected a non-negative integer, got {v}")));
    }
    match v {
        Value::Number(n) if n.as_u64().is_some() => Ok(n.as_u64().unwrap_or_default()),
        Value::String(s) => s
            .trim()
            .parse()
            .map_err(|_| Error::config(key, format!("expected an integer, got `{s}`"))),
        _ => Ok(x as u64),
    }
}

fn u32_of(key: &str, v: &Value) -> Result<u32> {
    u32::try_from(uint(key, v)?).map_err(|_| Error::config(key, "value too large"))
}

fn boolean(key: &str, v: &Value) -> Result<bool> {
    match v {
        Value::Bool(b) => Ok(*b),
        Value::String(s) => match s.trim() {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(Error::config(key, format!("expected a boolean, got `{other}`"))),
        },
        _ => Err(Error::config(key, format!("expected a boolean, got {v}"))),
    }
}

fn string<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| Error::config(key, format!("expected a string, got {v}")))
}

fn policy_kind(key: &str, v: &Value) -> Result<PolicyKind> {
    string(key, v)?.parse().map_err(|e: Error| Error::config(key, e.to_string()))
}

fn policy_list(key: &str, v: &Value) -> Result<Vec<PolicyKind>> {
    let names: Vec<String> = match v {
        Value::String(s) => s.split(',').map(|p| p.trim().to_owned()).collect(),
        Value::Array(items) => items
            .iter()
            .map(|i| string(key, i).map(str::to_owned))
            .collect::<Result<_>>()?,
        _ => return Err(Error::config(key, "expected a list of policy names")),
    };
    let mut out = Vec::new();
    for n in names.iter().filter(|n| !n.is_empty()) {
        let kind: PolicyKind = n.parse().map_err(|e: Error| Error::config(key, e.to_string()))?;
        if out.contains(&kind) {
            return Err(Error::config(key, format!("policy `{kind}` listed twice")));
        }
        out.push(kind);
    }
    out.sort();
    Ok(out)
}

impl ExperimentConfig {
    /// Every accepted key, in output order.
    pub const KEYS: &'static [&'static str] = &[
        "channel.bandwidth_hz",
        "channel.coherence_slot_s",
        "channel.noise_psd_dbm_hz",
        "channel.obstacle_max_db",
        "channel.obstacle_min_db",
        "channel.obstacle_mode",
        "channel.rician_k_db",
        "channel.tx_power_dbm",
        "channel.wavelength_m",
        "error_model.implementation_loss_db",
        "error_model.mode",
        "error_model.outcome",
        "error_model.slope_per_db",
        "error_model.table_path",
        "error_model.threshold",
        "linra.epsilon",
        "linra.literal_decay",
        "metrics.ratio",
        "metrics.reference",
        "metrics.stride_s",
        "metrics.window_s",
        "oracle.fer_epsilon",
        "phy.frame_size_bytes",
        "regret.reference",
        "run.dump_scenarios",
        "run.dump_traces",
        "run.jobs",
        "run.out",
        "run.plot_seed",
        "run.policies",
        "run.seed_start",
        "run.seeds",
        "scenario.bounds_m",
        "scenario.duration_s",
        "scenario.margin_s",
        "scenario.nlos_min_duration_s",
        "scenario.uav_speed_mps",
        "ts.window",
    ];

    /// Reads and validates a configuration file.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.merge_file(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies the keys of a configuration file on top of `self` without
    /// validating.
    pub fn merge_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: Value = serde_json::from_str(&text).map_err(|e| Error::Load {
            path: path.to_owned(),
            line: e.line(),
            message: e.to_string(),
        })?;
        self.merge_value(&value)
    }

    /// Applies a (possibly nested) JSON object of keys.
    pub fn merge_value(&mut self, value: &Value) -> Result<()> {
        let Value::Object(map) = value else {
            return Err(Error::config("<root>", "configuration must be a JSON object"));
        };
        let mut flat = BTreeMap::new();
        flatten("", map, &mut flat);
        for (k, v) in &flat {
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Sets one key. `value` may be a JSON value or a string that is parsed
    /// as the key's type.
    pub fn set(&mut self, key: &str, value: &Value) -> Result<()> {
        let v = value;
        match key {
            "channel.bandwidth_hz" => {
                let b = num(key, v)?;
                self.channel.bandwidth_hz = b;
                self.phy.bandwidth_hz = b;
            }
            "channel.coherence_slot_s" => self.channel.coherence_slot_s = num(key, v)?,
            "channel.noise_psd_dbm_hz" => self.channel.noise_psd_dbm_hz = num(key, v)?,
            "channel.obstacle_max_db" => self.channel.obstacle_max_db = num(key, v)?,
            "channel.obstacle_min_db" => self.channel.obstacle_min_db = num(key, v)?,
            "channel.obstacle_mode" => {
                self.channel.obstacle_mode = match string(key, v)? {
                    "per_event" => ObstacleMode::PerEvent,
                    "per_slot" => ObstacleMode::PerSlot,
                    other => {
                        return Err(Error::config(
                            key,
                            format!("expected `per_event` or `per_slot`, got `{other}`"),
                        ))
                    }
                }
            }
            "channel.rician_k_db" => self.channel.rician_k_db = num(key, v)?,
            "channel.tx_power_dbm" => self.channel.tx_power_dbm = num(key, v)?,
            "channel.wavelength_m" => self.channel.wavelength_m = num(key, v)?,
            "error_model.implementation_loss_db" => {
                self.error_model.implementation_loss_db = num(key, v)?
            }
            "error_model.mode" => {
                self.error_model.mode = match string(key, v)? {
                    "analytic" => ErrorModelMode::Analytic,
                    "table" => ErrorModelMode::Table,
                    other => {
                        return Err(Error::config(
                            key,
                            format!("expected `analytic` or `table`, got `{other}`"),
                        ))
                    }
                }
            }
            "error_model.outcome" => {
                self.error_model.outcome = match string(key, v)? {
                    "bernoulli" => OutcomeKind::Bernoulli,
                    "threshold" => OutcomeKind::Threshold,
                    other => {
                        return Err(Error::config(
                            key,
                            format!("expected `bernoulli` or `threshold`, got `{other}`"),
                        ))
                    }
                }
            }
            "error_model.slope_per_db" => self.error_model.slope_per_db = num(key, v)?,
            "error_model.table_path" => {
                self.error_model.table_path = match v {
                    Value::Null => None,
                    _ => Some(PathBuf::from(string(key, v)?)),
                }
            }
            "error_model.threshold" => self.error_model.threshold = num(key, v)?,
            "linra.epsilon" => self.policy.linra.epsilon = num(key, v)?,
            "linra.literal_decay" => self.policy.linra.literal_decay = boolean(key, v)?,
            "metrics.ratio" => self.metrics.ratio = num(key, v)?,
            "metrics.reference" => self.metrics.reference = policy_kind(key, v)?,
            "metrics.stride_s" => self.metrics.stride_s = num(key, v)?,
            "metrics.window_s" => self.metrics.window_s = num(key, v)?,
            "oracle.fer_epsilon" => self.policy.oracle.fer_epsilon = num(key, v)?,
            "phy.frame_size_bytes" => self.phy.frame_size_bytes = u32_of(key, v)?,
            "regret.reference" => self.regret_reference = policy_kind(key, v)?,
            "run.dump_scenarios" => self.run.dump_scenarios = boolean(key, v)?,
            "run.dump_traces" => self.run.dump_traces = boolean(key, v)?,
            "run.jobs" => {
                self.run.jobs =
                    usize::try_from(uint(key, v)?).map_err(|_| Error::config(key, "too large"))?
            }
            "run.out" => self.run.out = PathBuf::from(string(key, v)?),
            "run.plot_seed" => {
                self.run.plot_seed = match v {
                    Value::Null => None,
                    _ => Some(uint(key, v)?),
                }
            }
            "run.policies" => self.run.policies = policy_list(key, v)?,
            "run.seed_start" => self.run.seed_start = uint(key, v)?,
            "run.seeds" => self.run.seeds = uint(key, v)?,
            "scenario.bounds_m" => {
                let parts: Vec<Value> = match v {
                    Value::Array(a) => a.clone(),
                    Value::String(s) => s.split(',').map(|p| Value::String(p.into())).collect(),
                    _ => return Err(Error::config(key, "expected three extents")),
                };
                if parts.len() != 3 {
                    return Err(Error::config(key, "expected three extents [x, y, z]"));
                }
                for (slot, p) in self.scenario.bounds_m.iter_mut().zip(&parts) {
                    *slot = num(key, p)?;
                }
            }
            "scenario.duration_s" => self.scenario.duration_s = num(key, v)?,
            "scenario.margin_s" => self.scenario.margin_s = num(key, v)?,
            "scenario.nlos_min_duration_s" => self.scenario.nlos_min_duration_s = num(key, v)?,
            "scenario.uav_speed_mps" => self.scenario.uav_speed_mps = num(key, v)?,
            "ts.window" => self.policy.ts.window_s = num(key, v)?,
            _ => return Err(Error::config(key, "unknown configuration key")),
        }
        Ok(())
    }
}

impl ExperimentConfig {
    /// Cross-field validation; every error names the offending key.
    pub fn validate(&self) -> Result<()> {
        self.phy.validate()?;
        self.channel.validate()?;
        if self.channel.bandwidth_hz != self.phy.bandwidth_hz {
            return Err(Error::config(
                "channel.bandwidth_hz",
                "channel and PHY bandwidth differ",
            ));
        }
        self.scenario.validate()?;
        self.policy.validate()?;
        self.metrics.validate()?;
        if self.metrics.window_s > self.scenario.nlos_min_duration_s
            || self.metrics.window_s > self.scenario.margin_s
        {
            return Err(Error::config(
                "metrics.window_s",
                "window must fit in the shortest NLoS period and in the LoS margins",
            ));
        }
        let em = &self.error_model;
        if !(em.slope_per_db.is_finite() && em.slope_per_db > 0.0) {
            return Err(Error::config("error_model.slope_per_db", "must be positive"));
        }
        if !em.implementation_loss_db.is_finite() {
            return Err(Error::config("error_model.implementation_loss_db", "must be finite"));
        }
        if !(em.threshold > 0.0 && em.threshold <= 1.0) {
            return Err(Error::config("error_model.threshold", "must lie in (0, 1]"));
        }
        if em.mode == ErrorModelMode::Table && em.table_path.is_none() {
            return Err(Error::config("error_model.table_path", "required in table mode"));
        }
        if !matches!(self.regret_reference, PolicyKind::Oracle | PolicyKind::SemiOracle) {
            return Err(Error::config(
                "regret.reference",
                "must be `oracle` or `semi-oracle`",
            ));
        }
        if self.run.seeds == 0 {
            return Err(Error::config("run.seeds", "must be at least 1"));
        }
        if self.run.seed_start.checked_add(self.run.seeds).is_none() {
            return Err(Error::config("run.seeds", "seed range overflows"));
        }
        if self.run.policies.is_empty() {
            return Err(Error::config("run.policies", "at least one policy is required"));
        }
        if let Some(p) = self.run.plot_seed {
            if !(self.run.seed_start..self.run.seed_start + self.run.seeds).contains(&p) {
                return Err(Error::config("run.plot_seed", "must be one of the simulated seeds"));
            }
        }
        Ok(())
    }

    /// The resolved configuration as dotted keys, suitable for
    /// [`ExperimentConfig::merge_value`].
    pub fn to_flat_map(&self) -> BTreeMap<String, Value> {
        let c = &self.channel;
        let em = &self.error_model;
        let r = &self.run;
        let s = &self.scenario;
        let path = |p: &Path| Value::String(p.to_string_lossy().into_owned());
        let entries: Vec<(&str, Value)> = vec![
            ("channel.bandwidth_hz", c.bandwidth_hz.into()),
            ("channel.coherence_slot_s", c.coherence_slot_s.into()),
            ("channel.noise_psd_dbm_hz", c.noise_psd_dbm_hz.into()),
            ("channel.obstacle_max_db", c.obstacle_max_db.into()),
            ("channel.obstacle_min_db", c.obstacle_min_db.into()),
            (
                "channel.obstacle_mode",
                match c.obstacle_mode {
                    ObstacleMode::PerEvent => "per_event",
                    ObstacleMode::PerSlot => "per_slot",
                }
                .into(),
            ),
            ("channel.rician_k_db", c.rician_k_db.into()),
            ("channel.tx_power_dbm", c.tx_power_dbm.into()),
            ("channel.wavelength_m", c.wavelength_m.into()),
            ("error_model.implementation_loss_db", em.implementation_loss_db.into()),
            (
                "error_model.mode",
                match em.mode {
                    ErrorModelMode::Analytic => "analytic",
                    ErrorModelMode::Table => "table",
                }
                .into(),
            ),
            (
                "error_model.outcome",
                match em.outcome {
                    OutcomeKind::Bernoulli => "bernoulli",
                    OutcomeKind::Threshold => "threshold",
                }
                .into(),
            ),
            ("error_model.slope_per_db", em.slope_per_db.into()),
            (
                "error_model.table_path",
                em.table_path.as_deref().map_or(Value::Null, path),
            ),
            ("error_model.threshold", em.threshold.into()),
            ("linra.epsilon", self.policy.linra.epsilon.into()),
            ("linra.literal_decay", self.policy.linra.literal_decay.into()),
            ("metrics.ratio", self.metrics.ratio.into()),
            ("metrics.reference", self.metrics.reference.name().into()),
            ("metrics.stride_s", self.metrics.stride_s.into()),
            ("metrics.window_s", self.metrics.window_s.into()),
            ("oracle.fer_epsilon", self.policy.oracle.fer_epsilon.into()),
            ("phy.frame_size_bytes", self.phy.frame_size_bytes.into()),
            ("regret.reference", self.regret_reference.name().into()),
            ("run.dump_scenarios", r.dump_scenarios.into()),
            ("run.dump_traces", r.dump_traces.into()),
            ("run.jobs", r.jobs.into()),
            ("run.out", path(&r.out)),
            ("run.plot_seed", r.plot_seed.map_or(Value::Null, Value::from)),
            (
                "run.policies",
                Value::Array(r.policies.iter().map(|p| p.name().into()).collect()),
            ),
            ("run.seed_start", r.seed_start.into()),
            ("run.seeds", r.seeds.into()),
            (
                "scenario.bounds_m",
                Value::Array(s.bounds_m.iter().map(|&b| b.into()).collect()),
            ),
            ("scenario.duration_s", s.duration_s.into()),
            ("scenario.margin_s", s.margin_s.into()),
            ("scenario.nlos_min_duration_s", s.nlos_min_duration_s.into()),
            ("scenario.uav_speed_mps", s.uav_speed_mps.into()),
            ("ts.window", self.policy.ts.window_s.into()),
        ];
        entries.into_iter().map(|(k, v)| (k.to_owned(), v)).collect()
    }

    pub fn mcs_table(&self) -> Result<McsTable> {
        build_mcs_table(&self.phy)
    }

    /// Validates and assembles the simulator for this configuration.
    pub fn build_simulator(&self) -> Result<Simulator> {
        self.validate()?;
        let table = self.mcs_table()?;
        let error_model = self.error_model.build(&table)?;
        Simulator::new(
            table,
            self.channel.clone(),
            self.scenario.clone(),
            error_model,
            self.error_model.outcome_mode(),
            self.policy,
        )
    }
}

fn flatten(prefix: &str, map: &Map<String, Value>, out: &mut BTreeMap<String, Value>) {
    for (k, v) in map {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Object(inner) => flatten(&key, inner, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}
