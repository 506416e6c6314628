//! Shared record types: normalized detections, BSM records, host states,
//! and the interleaved sensor log consumed by the pipeline.

use serde::{Deserialize, Serialize};

use crate::geodesy::GeoPoint;

/// Which sensor produced a track or detection.
///
/// `V2v` sorts before `Camera` so that V2V tracks occupy the lower indices
/// of the track-to-track distance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sensor {
    V2v,
    Camera,
}

impl std::fmt::Display for Sensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sensor::V2v => write!(f, "v2v"),
            Sensor::Camera => write!(f, "camera"),
        }
    }
}

/// Identity of a track: sensor plus the sensor-scoped target id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrackKey {
    pub sensor: Sensor,
    pub target_id: u32,
}

impl TrackKey {
    pub fn new(sensor: Sensor, target_id: u32) -> Self {
        Self { sensor, target_id }
    }

    pub fn camera(target_id: u32) -> Self {
        Self::new(Sensor::Camera, target_id)
    }

    pub fn v2v(target_id: u32) -> Self {
        Self::new(Sensor::V2v, target_id)
    }
}

impl std::fmt::Display for TrackKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.sensor, self.target_id)
    }
}

/// One time-stamped target observation in the host-vehicle frame, normalized
/// from either sensor.
///
/// Position is the filter measurement; relative heading and speed are gate
/// inputs only. Length and width are carried through but never associated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorDetection {
    pub sensor: Sensor,
    pub target_id: u32,
    /// Seconds on the common pipeline clock.
    pub t: f64,
    /// Longitudinal offset in the host frame, meters (positive forward).
    pub px: f64,
    /// Lateral offset in the host frame, meters (positive left).
    pub py: f64,
    /// Target heading minus host heading, wrapped to (-180, 180] degrees.
    pub relative_heading_deg: f64,
    /// Target speed minus host speed, m/s.
    pub relative_speed_mps: f64,
    pub length_m: f64,
    pub width_m: f64,
}

impl SensorDetection {
    pub fn key(&self) -> TrackKey {
        TrackKey::new(self.sensor, self.target_id)
    }
}

/// A simplified Basic Safety Message: the Table-style V2V fields used by the
/// association pipeline (id, global position, heading, speed, dimensions).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsmRecord {
    pub t: f64,
    pub vehicle_id: u32,
    pub position: GeoPoint,
    /// Degrees clockwise from true North.
    pub heading_deg: f64,
    pub speed_mps: f64,
    pub length_m: f64,
    pub width_m: f64,
}

/// The host vehicle's own pose and kinematics at an instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HostState {
    pub t: f64,
    pub position: GeoPoint,
    /// Degrees clockwise from true North.
    pub heading_deg: f64,
    pub speed_mps: f64,
}

/// Timestamp-ordered camera detections, BSM records, and host poses for one
/// run, plus the camera-id provenance needed to export ground truth.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SensorLog {
    /// Camera detections, non-decreasing in `t`.
    pub camera: Vec<SensorDetection>,
    /// BSM records, non-decreasing in `t`.
    pub bsm: Vec<BsmRecord>,
    /// Host poses, non-decreasing in `t`.
    pub host: Vec<HostState>,
    /// Which physical vehicle each camera detection came from:
    /// `(t, camera_target_id, vehicle_id)`. Produced by the simulator;
    /// empty for recorded logs without ground truth.
    pub camera_provenance: Vec<(f64, u32, u32)>,
}

impl SensorLog {
    /// Earliest event timestamp across all streams.
    pub fn first_event_t(&self) -> Option<f64> {
        let mut t: Option<f64> = None;
        let mut consider = |v: Option<f64>| {
            if let Some(x) = v {
                t = Some(match t {
                    Some(cur) => cur.min(x),
                    None => x,
                });
            }
        };
        consider(self.camera.first().map(|d| d.t));
        consider(self.bsm.first().map(|b| b.t));
        consider(self.host.first().map(|h| h.t));
        t
    }

    /// Latest event timestamp across all streams.
    pub fn last_event_t(&self) -> Option<f64> {
        let mut t: Option<f64> = None;
        let mut consider = |v: Option<f64>| {
            if let Some(x) = v {
                t = Some(match t {
                    Some(cur) => cur.max(x),
                    None => x,
                });
            }
        };
        consider(self.camera.last().map(|d| d.t));
        consider(self.bsm.last().map(|b| b.t));
        consider(self.host.last().map(|h| h.t));
        t
    }

    pub fn is_empty(&self) -> bool {
        self.camera.is_empty() && self.bsm.is_empty() && self.host.is_empty()
    }
}
