//! Scenario configuration: declarative description of track, agents,
//! perception limits, pipeline periods and stop conditions.

use crate::control::ControlConfig;
use crate::dynamics::{DisturbanceModel, VehicleParams};
use crate::planning::PlannerConfig;
use crate::prediction::PredictionConfig;
use crate::track::TrackModel;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

pub const MAX_AGENTS: usize = 8;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("cannot parse {path}: {reason}")]
    Parse { path: String, reason: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("track: {0}")]
    Track(#[from] crate::track::TrackError),
    #[error("override: {0}")]
    Override(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PolicyConfig {
    /// Full prediction + planning + control pipeline.
    FullStack,
    /// Kinematic rail follower at a speed schedule.
    Scripted {
        #[serde(default)]
        speed_profile: Vec<(f64, f64)>,
    },
    /// Parked vehicle.
    Static,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StartConfig {
    pub s_m: f64,
    pub n_m: f64,
    #[serde(default)]
    pub mu_rad: f64,
    pub v_mps: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentConfig {
    pub vehicle: String,
    pub policy: PolicyConfig,
    pub start: StartConfig,
    #[serde(default = "default_target_speed")]
    pub target_speed_mps: f64,
}

fn default_target_speed() -> f64 {
    83.33
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PerceptionConfig {
    pub detection_range_m: f64,
    #[serde(default)]
    pub processing_delay_s: f64,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        PerceptionConfig { detection_range_m: 250.0, processing_delay_s: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PeriodsConfig {
    #[serde(default = "default_physics_dt")]
    pub physics_dt_s: f64,
    #[serde(default = "default_perception_period")]
    pub perception_s: f64,
    #[serde(default = "default_planning_period")]
    pub planning_s: f64,
    #[serde(default = "default_control_period")]
    pub control_s: f64,
}

fn default_physics_dt() -> f64 {
    0.005
}
fn default_perception_period() -> f64 {
    0.05
}
fn default_planning_period() -> f64 {
    0.1
}
fn default_control_period() -> f64 {
    0.01
}

impl Default for PeriodsConfig {
    fn default() -> Self {
        PeriodsConfig {
            physics_dt_s: default_physics_dt(),
            perception_s: default_perception_period(),
            planning_s: default_planning_period(),
            control_s: default_control_period(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct StopConfig {
    #[serde(default = "default_max_time")]
    pub max_time_s: f64,
    #[serde(default)]
    pub laps: Option<u32>,
    /// Stop once the first agent's cumulative progress reaches this value.
    #[serde(default)]
    pub progress_goal_m: Option<f64>,
}

fn default_max_time() -> f64 {
    60.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogConfig {
    #[serde(default = "default_log_period")]
    pub period_s: f64,
    /// Wall-clock instrumentation of the pipeline stages.
    #[serde(default)]
    pub timing: bool,
    /// Keep every replanned trajectory in the log (memory-heavy).
    #[serde(default)]
    pub record_plans: bool,
}

fn default_log_period() -> f64 {
    0.01
}

impl Default for LogConfig {
    fn default() -> Self {
        LogConfig { period_s: default_log_period(), timing: false, record_plans: false }
    }
}

/// Declarative scenario description (the on-disk JSON schema).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub track: String,
    pub agents: Vec<AgentConfig>,
    #[serde(default)]
    pub perception: PerceptionConfig,
    #[serde(default)]
    pub periods: PeriodsConfig,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub prediction: PredictionConfig,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default)]
    pub disturbance: DisturbanceModel,
    #[serde(default)]
    pub stop: StopConfig,
    #[serde(default)]
    pub log: LogConfig,
}

fn is_multiple_of(period: f64, dt: f64) -> bool {
    let ratio = period / dt;
    (ratio - ratio.round()).abs() < 1e-6 && ratio.round() >= 1.0
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.agents.is_empty() || self.agents.len() > MAX_AGENTS {
            return Err(ConfigError::Invalid(format!(
                "agent count {} outside 1..={MAX_AGENTS}",
                self.agents.len()
            )));
        }
        let dt = self.periods.physics_dt_s;
        if !(dt > 0.0 && dt <= 0.02) {
            return Err(ConfigError::Invalid(format!("physics_dt_s {dt} outside (0, 0.02]")));
        }
        for (label, period) in [
            ("perception_s", self.periods.perception_s),
            ("planning_s", self.periods.planning_s),
            ("control_s", self.periods.control_s),
            ("log.period_s", self.log.period_s),
        ] {
            if !is_multiple_of(period, dt) {
                return Err(ConfigError::Invalid(format!(
                    "{label} = {period} must be a positive multiple of physics_dt_s = {dt}"
                )));
            }
        }
        if self.perception.detection_range_m <= 0.0 {
            return Err(ConfigError::Invalid("detection_range_m must be positive".into()));
        }
        let delay = self.perception.processing_delay_s;
        if delay < 0.0 || (delay > 0.0 && !is_multiple_of(delay, dt)) {
            return Err(ConfigError::Invalid(
                "processing_delay_s must be a non-negative multiple of physics_dt_s".into(),
            ));
        }
        if self.stop.max_time_s <= 0.0 {
            return Err(ConfigError::Invalid("max_time_s must be positive".into()));
        }
        Ok(())
    }
}

/// A fully resolved scenario: config plus loaded track and vehicle assets.
#[derive(Clone)]
pub struct Scenario {
    pub cfg: ScenarioConfig,
    pub track: Arc<TrackModel>,
    pub vehicles: Vec<Arc<VehicleParams>>,
    /// Canonical JSON the config was parsed from (hashed into run metadata).
    pub canonical: String,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, ConfigError> {
        let raw = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let value: serde_json::Value =
            serde_json::from_str(&raw).map_err(|e| ConfigError::Parse {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Scenario::from_value(value, base)
    }

    pub fn from_value(value: serde_json::Value, base_dir: &Path) -> Result<Scenario, ConfigError> {
        let cfg: ScenarioConfig =
            serde_json::from_value(value).map_err(|e| ConfigError::Parse {
                path: "<scenario>".into(),
                reason: e.to_string(),
            })?;
        Scenario::from_config(cfg, base_dir)
    }

    pub fn from_config(cfg: ScenarioConfig, base_dir: &Path) -> Result<Scenario, ConfigError> {
        cfg.validate()?;
        let track_path = resolve(base_dir, &cfg.track);
        let track = Arc::new(TrackModel::from_file(&track_path)?);
        let mut vehicles = Vec::with_capacity(cfg.agents.len());
        for agent in &cfg.agents {
            let vp = resolve(base_dir, &agent.vehicle);
            let params = VehicleParams::from_file(&vp)
                .map_err(|e| ConfigError::Parse { path: vp.display().to_string(), reason: e })?;
            vehicles.push(Arc::new(params));
        }
        let canonical = serde_json::to_string(&cfg).expect("config serializes");
        Ok(Scenario { cfg, track, vehicles, canonical })
    }

    /// Same assets, different parameters (used by experiment sweeps).
    pub fn with_config(&self, cfg: ScenarioConfig) -> Result<Scenario, ConfigError> {
        cfg.validate()?;
        let canonical = serde_json::to_string(&cfg).expect("config serializes");
        Ok(Scenario {
            cfg,
            track: Arc::clone(&self.track),
            vehicles: self.vehicles.clone(),
            canonical,
        })
    }

    /// Effective planner configuration for one agent.
    pub fn planner_for(&self, agent: usize) -> PlannerConfig {
        let mut p = self.cfg.planner.clone();
        let vehicle = &self.vehicles[agent];
        p.limits.v_max = p
            .limits
            .v_max
            .min(vehicle.v_max)
            .min(self.cfg.agents[agent].target_speed_mps);
        p.ego_half_width_m = vehicle.half_width;
        p.ego_half_length_m = vehicle.length / 2.0;
        p.a_brake_emergency_mps2 = vehicle.a_brake_max;
        p.limits.drag_per_mass = vehicle.drag_coeff / vehicle.mass;
        p.limits.rolling_mps2 = vehicle.rolling_coeff * crate::dynamics::GRAVITY;
        p
    }
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Apply a `key.path=value` override onto a scenario JSON document.
/// Values parse as JSON scalars first, falling back to a plain string.
pub fn apply_override(doc: &mut serde_json::Value, assignment: &str) -> Result<(), ConfigError> {
    let (path, raw_value) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(format!("missing '=' in {assignment:?}")))?;
    let new_value: serde_json::Value = serde_json::from_str(raw_value)
        .unwrap_or_else(|_| serde_json::Value::String(raw_value.to_string()));
    let mut cursor = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i == parts.len() - 1;
        if let Ok(index) = part.parse::<usize>() {
            let arr = cursor
                .as_array_mut()
                .ok_or_else(|| ConfigError::Override(format!("{part} indexes a non-array")))?;
            if index >= arr.len() {
                return Err(ConfigError::Override(format!("index {index} out of bounds")));
            }
            if last {
                arr[index] = new_value;
                return Ok(());
            }
            cursor = &mut arr[index];
        } else {
            let obj = cursor
                .as_object_mut()
                .ok_or_else(|| ConfigError::Override(format!("{part} indexes a non-object")))?;
            if last {
                obj.insert(part.to_string(), new_value);
                return Ok(());
            }
            cursor = obj
                .get_mut(*part)
                .ok_or_else(|| ConfigError::Override(format!("unknown key {part:?} in {path:?}")))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_sets_nested_numeric() {
        let mut doc = serde_json::json!({
            "perception": {"detection_range_m": 250.0},
            "agents": [{"target_speed_mps": 60.0}]
        });
        apply_override(&mut doc, "perception.detection_range_m=130").unwrap();
        apply_override(&mut doc, "agents.0.target_speed_mps=83.3").unwrap();
        assert_eq!(doc["perception"]["detection_range_m"], serde_json::json!(130));
        assert_eq!(doc["agents"][0]["target_speed_mps"], serde_json::json!(83.3));
        assert!(apply_override(&mut doc, "nonsense").is_err());
        assert!(apply_override(&mut doc, "perception.missing.deep=1").is_err());
    }
}
