//! Track-to-track association between a forward camera and V2V (BSM)
//! vehicle tracks.
//!
//! The crate implements the full association pipeline for a host vehicle
//! that carries both an ADAS camera and a V2V on-board unit:
//!
//! 1. [`geodesy`] — projects BSM global positions (WGS84) into the host
//!    vehicle frame so both sensors report comparable measurements.
//! 2. [`kalman`] / [`tracking`] — one constant-velocity Kalman filter per
//!    sensor-reported target, synchronized by a 10 Hz trigger that snapshots
//!    every live track at a common timestamp.
//! 3. [`association`] — ring-buffered track histories, buffered Mahalanobis
//!    track-to-track distances, and greedy cluster extraction with
//!    speed/heading gating.
//! 4. [`metrics`] — per-pair confidence and Track Matching Accuracy against
//!    ground truth.
//! 5. [`scenario`] — a deterministic simulator for car-following and
//!    intersection-crossing experiments with dual-rate sensor emulation,
//!    occlusion, and camera ID churn.
//! 6. [`pipeline`] — replays recorded or simulated sensor logs through the
//!    whole stack and emits reports.
//!
//! See the crate `examples/` directory for one runnable example per
//! capability, and the `trackfuse` binary for the `simulate` / `associate` /
//! `report` command line.

pub mod association;
pub mod config;
pub mod geodesy;
pub mod kalman;
pub mod logio;
pub mod metrics;
pub mod pipeline;
pub mod scenario;
pub mod tracking;
pub mod types;

pub use association::{associate_tick, AssociationConfig, AssociationResult, Cluster};
pub use config::RunConfig;
pub use geodesy::{deg2utm, GeoPoint, HostPose, UtmCoord, VehicleFramePoint};
pub use kalman::{kf_predict, kf_update, KfModel, TrackState};
pub use metrics::{confidence, tma, GroundTruthMap, TmaReport};
pub use pipeline::{run_pipeline, RunReport};
pub use scenario::{emulate_sensors, gen_car_following, gen_ima, ScenarioConfig};
pub use tracking::{Track, TrackStore};
pub use types::{BsmRecord, HostState, Sensor, SensorDetection, SensorLog};
