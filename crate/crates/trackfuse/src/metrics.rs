//! Scoring of association output: per-pair confidence and Track Matching
//! Accuracy (TMA) against per-tick ground truth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::association::AssociationResult;
use crate::types::{Sensor, TrackKey};

/// Errors from metric evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricsError {
    /// Association results at ticks the ground truth does not cover.
    Coverage { missing_ticks: Vec<u64> },
    /// A result timestamp does not land on the truth's tick grid.
    TickMisaligned { t: f64 },
    /// Two V2V ids mapped to the same camera id in one tick.
    NotInjective { tick: u64, camera_id: u32 },
    /// Confidence threshold must be positive.
    NonPositiveThreshold { th: f64 },
}

impl std::fmt::Display for MetricsError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MetricsError::Coverage { missing_ticks } => {
                write!(f, "ground truth missing ticks {missing_ticks:?}")
            }
            MetricsError::TickMisaligned { t } => {
                write!(f, "result timestamp {t} is off the truth tick grid")
            }
            MetricsError::NotInjective { tick, camera_id } => {
                write!(f, "camera id {camera_id} mapped twice at tick {tick}")
            }
            MetricsError::NonPositiveThreshold { th } => {
                write!(f, "confidence threshold th = {th} must be positive")
            }
        }
    }
}

impl std::error::Error for MetricsError {}

/// Validated confidence threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceConfig {
    th: f64,
}

impl ConfidenceConfig {
    pub fn new(th: f64) -> Result<Self, MetricsError> {
        // Rejects nonpositive values and NaN alike.
        if th > 0.0 {
            Ok(Self { th })
        } else {
            Err(MetricsError::NonPositiveThreshold { th })
        }
    }

    pub fn th(&self) -> f64 {
        self.th
    }

    pub fn confidence(&self, d: f64) -> f64 {
        confidence(d, self.th)
    }
}

/// Percent confidence of an association at inter-track distance `d`:
/// 100 * (th - d) / th clamped to [0, 100]. Written as 100 * (1 - d/th) so
/// the endpoints are exact: 100.0 at d = 0 and 0.0 for every d >= th.
pub fn confidence(d: f64, th: f64) -> f64 {
    (100.0 * (1.0 - d / th)).clamp(0.0, 100.0)
}

/// Per-sync-tick map from V2V vehicle id to the correct camera target id,
/// `None` while the vehicle is occluded or outside the camera's view.
///
/// Ticks are indexed 1..=tick_count on the grid `t0 + k / sync_rate_hz`,
/// matching the pipeline's trigger schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthMap {
    pub t0: f64,
    pub sync_rate_hz: f64,
    ticks: Vec<BTreeMap<u32, Option<u32>>>,
}

impl GroundTruthMap {
    pub fn new(t0: f64, sync_rate_hz: f64, tick_count: usize) -> Self {
        Self { t0, sync_rate_hz, ticks: vec![BTreeMap::new(); tick_count] }
    }

    pub fn tick_count(&self) -> usize {
        self.ticks.len()
    }

    pub fn tick_time(&self, tick: u64) -> f64 {
        self.t0 + tick as f64 / self.sync_rate_hz
    }

    /// Records the truth pairing for one vehicle at one 1-based tick.
    pub fn set(
        &mut self,
        tick: u64,
        v2v_id: u32,
        camera_id: Option<u32>,
    ) -> Result<(), MetricsError> {
        let row = &mut self.ticks[(tick - 1) as usize];
        if let Some(c) = camera_id {
            if row.iter().any(|(v, mapped)| *v != v2v_id && *mapped == Some(c)) {
                return Err(MetricsError::NotInjective { tick, camera_id: c });
            }
        }
        row.insert(v2v_id, camera_id);
        Ok(())
    }

    /// The truth row at a 1-based tick.
    pub fn row(&self, tick: u64) -> Option<&BTreeMap<u32, Option<u32>>> {
        self.ticks.get((tick - 1) as usize)
    }

    /// Maps a result timestamp onto the tick grid.
    pub fn tick_for_time(&self, t: f64) -> Result<u64, MetricsError> {
        let k = ((t - self.t0) * self.sync_rate_hz).round();
        if k < 1.0 {
            return Err(MetricsError::TickMisaligned { t });
        }
        let k = k as u64;
        if (t - self.tick_time(k)).abs() > 1e-6 {
            return Err(MetricsError::TickMisaligned { t });
        }
        Ok(k)
    }

    /// All V2V ids appearing anywhere in the map.
    pub fn vehicle_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = Vec::new();
        for row in &self.ticks {
            for id in row.keys() {
                if !ids.contains(id) {
                    ids.push(*id);
                }
            }
        }
        ids.sort_unstable();
        ids
    }
}

/// How one tick scored for one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Correct,
    Wrong,
    /// The camera had no current detection of the vehicle, so no matching
    /// decision was possible; excluded from the TMA denominator.
    NoDecision,
}

/// Per-vehicle tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VehicleTally {
    pub correct: u64,
    pub total: u64,
    pub no_decisions: u64,
}

impl VehicleTally {
    pub fn tma_percent(&self) -> Option<f64> {
        if self.total == 0 {
            None
        } else {
            Some(100.0 * self.correct as f64 / self.total as f64)
        }
    }
}

/// Track Matching Accuracy per remote vehicle and in aggregate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TmaReport {
    pub per_vehicle: BTreeMap<u32, VehicleTally>,
}

impl TmaReport {
    pub fn aggregate(&self) -> VehicleTally {
        let mut agg = VehicleTally::default();
        for tally in self.per_vehicle.values() {
            agg.correct += tally.correct;
            agg.total += tally.total;
            agg.no_decisions += tally.no_decisions;
        }
        agg
    }
}

/// Scores one tick's association for one vehicle against its truth value.
///
/// With truth naming a camera id, the decision is correct exactly when the
/// vehicle's cluster contains that camera track. With truth `None`, a
/// singleton is correct. Ticks where the camera holds no current detection
/// that the decision could match -- the truth camera track is absent, or the
/// only paired camera track is coasting without fresh measurements -- score
/// as no-decision.
pub fn decide_tick(
    result: &AssociationResult,
    v2v_id: u32,
    truth_camera: Option<u32>,
    detection_window_s: f64,
) -> Option<Decision> {
    let v_key = TrackKey::v2v(v2v_id);
    let cluster = result.cluster_for(&v_key)?;
    let cam_member = cluster.member_of(Sensor::Camera);
    let backed = |key: &TrackKey| {
        result
            .handle(key)
            .map(|h| result.t - h.last_measurement_t <= detection_window_s + 1e-6)
            .unwrap_or(false)
    };

    let decision = match truth_camera {
        Some(c) => {
            let c_key = TrackKey::camera(c);
            match cam_member {
                Some(m) if m == c_key => Decision::Correct,
                Some(_) => Decision::Wrong,
                None => {
                    if result.is_live(&c_key) && backed(&c_key) {
                        Decision::Wrong
                    } else {
                        Decision::NoDecision
                    }
                }
            }
        }
        None => match cam_member {
            None => Decision::Correct,
            Some(m) => {
                if backed(&m) {
                    Decision::Wrong
                } else {
                    Decision::NoDecision
                }
            }
        },
    };
    Some(decision)
}

/// Scores a run of association results against ground truth.
///
/// Every result tick must be covered by the truth map; uncovered ticks are
/// reported in a coverage error. `detection_window_s` is the maximum age of
/// a track's last measurement for it to count as currently detected
/// (normally one sync period).
pub fn tma(
    results: &[AssociationResult],
    truth: &GroundTruthMap,
    detection_window_s: f64,
) -> Result<TmaReport, MetricsError> {
    let mut missing = Vec::new();
    let mut indexed = Vec::with_capacity(results.len());
    for r in results {
        let tick = truth.tick_for_time(r.t)?;
        if truth.row(tick).is_none() {
            missing.push(tick);
        } else {
            indexed.push((tick, r));
        }
    }
    if !missing.is_empty() {
        return Err(MetricsError::Coverage { missing_ticks: missing });
    }

    let mut report = TmaReport::default();
    for (tick, result) in indexed {
        let row = truth.row(tick).expect("coverage checked above");
        for (&v2v_id, &truth_camera) in row {
            let Some(decision) = decide_tick(result, v2v_id, truth_camera, detection_window_s)
            else {
                continue;
            };
            let tally = report.per_vehicle.entry(v2v_id).or_default();
            match decision {
                Decision::Correct => {
                    tally.correct += 1;
                    tally.total += 1;
                }
                Decision::Wrong => tally.total += 1,
                Decision::NoDecision => tally.no_decisions += 1,
            }
        }
    }
    Ok(report)
}
