//! Per-target track management: one Kalman filter per (sensor, target id)
//! stream, a synchronized snapshot API, and staleness-based retirement.
//!
//! Two prediction modes drive each filter. When a measurement arrives the
//! filter predicts to the measurement time and updates. At each
//! synchronization trigger every live filter produces a prediction-only
//! estimate at the trigger time without touching its measurement-update
//! chain, so all sensors report states at the identical timestamp.

use std::collections::BTreeMap;

use nalgebra::Vector2;

use crate::kalman::{kf_predict, kf_update, FilterError, KfModel, TrackState};
use crate::types::{Sensor, SensorDetection, TrackKey};

/// Speed and heading carried alongside the filter for gating; these are
/// measured by the sensors, not estimated by the filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateSignals {
    /// Target heading minus host heading, degrees in (-180, 180].
    pub relative_heading_deg: f64,
    /// Target speed minus host speed, m/s.
    pub relative_speed_mps: f64,
}

/// A live track: the filter state at its last measurement plus the latest
/// gate signals.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub key: TrackKey,
    /// Posterior state at the last processed measurement.
    pub state: TrackState,
    pub last_measurement_t: f64,
    pub gate: GateSignals,
    pub length_m: f64,
    pub width_m: f64,
    /// Measurements folded into this track.
    pub updates: u64,
}

impl Track {
    /// Prediction-only estimate at the trigger time. Does not mutate the
    /// track, so the measurement-update chain is unaffected.
    pub fn sync_estimate(&self, model: &KfModel, t_trigger: f64) -> Result<TrackState, FilterError> {
        let dt = t_trigger - self.state.t;
        kf_predict(&self.state, model, dt)
    }
}

/// Counters for detections that were not folded into a track.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DropCounters {
    /// Detections older than their stream's last processed timestamp.
    pub out_of_order: u64,
}

/// Owns every live track, keyed by (sensor, target id).
///
/// Each track is single-writer: detections for one stream must arrive in
/// timestamp order, and the store drops (and counts) any that do not.
#[derive(Debug, Clone)]
pub struct TrackStore {
    tracks: BTreeMap<TrackKey, Track>,
    camera_model: KfModel,
    v2v_model: KfModel,
    /// Seconds without a measurement before a track is retired.
    staleness_horizon_s: f64,
    drops: DropCounters,
    retired: u64,
}

impl TrackStore {
    pub fn new(camera_model: KfModel, v2v_model: KfModel, staleness_horizon_s: f64) -> Self {
        Self {
            tracks: BTreeMap::new(),
            camera_model,
            v2v_model,
            staleness_horizon_s,
            drops: DropCounters::default(),
            retired: 0,
        }
    }

    pub fn model_for(&self, sensor: Sensor) -> &KfModel {
        match sensor {
            Sensor::Camera => &self.camera_model,
            Sensor::V2v => &self.v2v_model,
        }
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn get(&self, key: &TrackKey) -> Option<&Track> {
        self.tracks.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Track> {
        self.tracks.values()
    }

    pub fn drops(&self) -> DropCounters {
        self.drops
    }

    pub fn retired_count(&self) -> u64 {
        self.retired
    }

    /// Folds one detection into its track: predict to the detection time and
    /// update, or initialize a new track for an unknown id. Also retires
    /// tracks unseen beyond the staleness horizon as of the detection time.
    ///
    /// Returns the key of the touched track, or `None` if the detection was
    /// dropped as out of order.
    pub fn process_detection(&mut self, d: &SensorDetection) -> Option<TrackKey> {
        self.retire_stale(d.t);

        let key = d.key();
        let z = Vector2::new(d.px, d.py);
        match self.tracks.get_mut(&key) {
            Some(track) => {
                if d.t < track.last_measurement_t {
                    self.drops.out_of_order += 1;
                    return None;
                }
                let model = match d.sensor {
                    Sensor::Camera => &self.camera_model,
                    Sensor::V2v => &self.v2v_model,
                };
                let dt = d.t - track.state.t;
                let predicted =
                    kf_predict(&track.state, model, dt).expect("dt nonnegative by ordering check");
                track.state = kf_update(&predicted, model, z);
                track.last_measurement_t = d.t;
                track.gate = GateSignals {
                    relative_heading_deg: d.relative_heading_deg,
                    relative_speed_mps: d.relative_speed_mps,
                };
                track.length_m = d.length_m;
                track.width_m = d.width_m;
                track.updates += 1;
            }
            None => {
                let model = match d.sensor {
                    Sensor::Camera => &self.camera_model,
                    Sensor::V2v => &self.v2v_model,
                };
                let track = Track {
                    key,
                    state: model.init_state(z, d.t),
                    last_measurement_t: d.t,
                    gate: GateSignals {
                        relative_heading_deg: d.relative_heading_deg,
                        relative_speed_mps: d.relative_speed_mps,
                    },
                    length_m: d.length_m,
                    width_m: d.width_m,
                    updates: 1,
                };
                self.tracks.insert(key, track);
            }
        }
        Some(key)
    }

    /// Retires every track whose last measurement is older than the
    /// staleness horizon as of `now`.
    pub fn retire_stale(&mut self, now: f64) {
        let horizon = self.staleness_horizon_s;
        let before = self.tracks.len();
        self.tracks.retain(|_, t| now - t.last_measurement_t <= horizon);
        self.retired += (before - self.tracks.len()) as u64;
    }

    /// Prediction-only snapshots of every live track at the trigger time,
    /// in key order.
    pub fn sync_all(&self, t_trigger: f64) -> Result<Vec<(TrackKey, TrackState)>, FilterError> {
        let mut out = Vec::with_capacity(self.tracks.len());
        for (key, track) in &self.tracks {
            let model = self.model_for(key.sensor);
            out.push((*key, track.sync_estimate(model, t_trigger)?));
        }
        Ok(out)
    }
}
