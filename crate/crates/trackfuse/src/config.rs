//! Run configuration: one flat key/value document covering the filter,
//! association, scenario, and I/O settings, with every default in one place.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::association::AssociationConfig;
use crate::kalman::KfModel;
use crate::scenario::{ScenarioConfig, ScenarioKind};

/// Errors from loading or validating a run configuration.
#[derive(Debug)]
pub enum ConfigError {
    Io { path: PathBuf, source: std::io::Error },
    Parse { path: PathBuf, message: String },
    /// A field failed validation; carries the field name and the problem.
    Invalid { field: &'static str, message: String },
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io { path, source } => {
                write!(f, "cannot read config {}: {source}", path.display())
            }
            ConfigError::Parse { path, message } => {
                write!(f, "cannot parse config {}: {message}", path.display())
            }
            ConfigError::Invalid { field, message } => write!(f, "config field {field}: {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// The full pipeline configuration. Serialized as flat JSON; omitted keys
/// take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Synchronization trigger rate, Hz.
    pub sync_rate_hz: f64,
    /// White-noise-acceleration intensity per axis, m^2/s^3.
    pub process_noise: f64,
    /// Camera measurement variance per position axis, m^2.
    pub camera_measurement_var_m2: f64,
    /// V2V measurement variance per position axis, m^2.
    pub v2v_measurement_var_m2: f64,
    /// Velocity variance for freshly initialized tracks, m^2/s^2.
    pub init_velocity_var: f64,
    /// Seconds without a measurement before a track retires.
    pub staleness_horizon_s: f64,
    /// TTD cells above this are infinity.
    pub association_threshold: f64,
    /// Track history ring size, in sync ticks.
    pub buffer_ticks: usize,
    pub speed_gate_mps: f64,
    pub heading_gate_deg: f64,
    /// Confidence threshold, decoupled from the association threshold.
    pub confidence_th: f64,
    pub seed: u64,
    /// Scenario to simulate; mutually exclusive with `input_dir`.
    pub scenario: Option<String>,
    /// Directory with camera.csv / v2v.csv / host.csv (and optional
    /// truth.json); mutually exclusive with `scenario`.
    pub input_dir: Option<PathBuf>,
    /// Scenario length in seconds; the scenario's natural length if unset.
    pub duration_s: Option<f64>,
    pub camera_rate_hz: f64,
    pub camera_fov_deg: f64,
    pub camera_max_range_m: f64,
    pub camera_sigma_m: f64,
    pub occlusion_bias_frac: f64,
    pub occlusion_sigma_factor: f64,
    pub v2v_rate_hz: f64,
    pub gps_sigma_m: f64,
    pub id_churn: bool,
    pub churn_gap_s: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sync_rate_hz: 10.0,
            process_noise: 0.5,
            camera_measurement_var_m2: 0.25,
            v2v_measurement_var_m2: 2.25,
            init_velocity_var: 100.0,
            staleness_horizon_s: 1.0,
            association_threshold: 8.0,
            buffer_ticks: 10,
            speed_gate_mps: 3.0,
            heading_gate_deg: 45.0,
            confidence_th: 8.0,
            seed: 0,
            scenario: None,
            input_dir: None,
            duration_s: None,
            camera_rate_hz: 40.0,
            camera_fov_deg: 100.0,
            camera_max_range_m: 120.0,
            camera_sigma_m: 0.3,
            occlusion_bias_frac: 0.10,
            occlusion_sigma_factor: 3.0,
            v2v_rate_hz: 10.0,
            gps_sigma_m: 1.0,
            id_churn: true,
            churn_gap_s: 0.5,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        serde_json::from_str(&text)
            .map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })
    }

    /// Checks field ranges and the scenario/input exclusivity rule.
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn positive(field: &'static str, v: f64) -> Result<(), ConfigError> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::Invalid { field, message: format!("must be positive, got {v}") })
            }
        }
        positive("sync_rate_hz", self.sync_rate_hz)?;
        positive("camera_measurement_var_m2", self.camera_measurement_var_m2)?;
        positive("v2v_measurement_var_m2", self.v2v_measurement_var_m2)?;
        positive("staleness_horizon_s", self.staleness_horizon_s)?;
        positive("association_threshold", self.association_threshold)?;
        positive("speed_gate_mps", self.speed_gate_mps)?;
        positive("heading_gate_deg", self.heading_gate_deg)?;
        positive("confidence_th", self.confidence_th)?;
        positive("camera_rate_hz", self.camera_rate_hz)?;
        positive("camera_fov_deg", self.camera_fov_deg)?;
        positive("camera_max_range_m", self.camera_max_range_m)?;
        positive("v2v_rate_hz", self.v2v_rate_hz)?;
        positive("churn_gap_s", self.churn_gap_s)?;
        if self.process_noise < 0.0 {
            return Err(ConfigError::Invalid {
                field: "process_noise",
                message: format!("must be nonnegative, got {}", self.process_noise),
            });
        }
        if self.camera_sigma_m < 0.0 || self.gps_sigma_m < 0.0 {
            return Err(ConfigError::Invalid {
                field: "camera_sigma_m/gps_sigma_m",
                message: "noise sigmas must be nonnegative".to_string(),
            });
        }
        if self.buffer_ticks == 0 {
            return Err(ConfigError::Invalid {
                field: "buffer_ticks",
                message: "must be at least 1".to_string(),
            });
        }
        if let Some(d) = self.duration_s {
            positive("duration_s", d)?;
        }
        match (&self.scenario, &self.input_dir) {
            (Some(_), Some(_)) => Err(ConfigError::Invalid {
                field: "scenario/input_dir",
                message: "exactly one of scenario and input_dir may be set, got both".to_string(),
            }),
            (None, None) => Err(ConfigError::Invalid {
                field: "scenario/input_dir",
                message: "exactly one of scenario and input_dir must be set, got neither"
                    .to_string(),
            }),
            _ => {
                if let Some(name) = &self.scenario {
                    name.parse::<ScenarioKind>().map_err(|_| ConfigError::Invalid {
                        field: "scenario",
                        message: format!(
                            "unknown scenario '{name}' (expected car_following or ima)"
                        ),
                    })?;
                }
                Ok(())
            }
        }
    }

    pub fn scenario_kind(&self) -> Option<ScenarioKind> {
        self.scenario.as_deref().and_then(|s| s.parse().ok())
    }

    pub fn scenario_config(&self) -> ScenarioConfig {
        ScenarioConfig {
            seed: self.seed,
            duration_s: self.duration_s,
            camera_rate_hz: self.camera_rate_hz,
            camera_fov_deg: self.camera_fov_deg,
            camera_max_range_m: self.camera_max_range_m,
            camera_sigma_m: self.camera_sigma_m,
            occlusion_bias_frac: self.occlusion_bias_frac,
            occlusion_sigma_factor: self.occlusion_sigma_factor,
            v2v_rate_hz: self.v2v_rate_hz,
            gps_sigma_m: self.gps_sigma_m,
            id_churn: self.id_churn,
            churn_gap_s: self.churn_gap_s,
        }
    }

    pub fn association_config(&self) -> AssociationConfig {
        AssociationConfig {
            threshold: self.association_threshold,
            speed_gate_mps: self.speed_gate_mps,
            heading_gate_deg: self.heading_gate_deg,
            confidence_th: self.confidence_th,
        }
    }

    pub fn camera_model(&self) -> KfModel {
        KfModel::new(
            self.process_noise,
            [self.camera_measurement_var_m2, self.camera_measurement_var_m2],
            self.init_velocity_var,
        )
        .expect("validated configuration")
    }

    pub fn v2v_model(&self) -> KfModel {
        KfModel::new(
            self.process_noise,
            [self.v2v_measurement_var_m2, self.v2v_measurement_var_m2],
            self.init_velocity_var,
        )
        .expect("validated configuration")
    }

    pub fn sync_period_s(&self) -> f64 {
        1.0 / self.sync_rate_hz
    }
}
