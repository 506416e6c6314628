//! End-to-end replay: ingest or simulate a sensor log, drive the
//! synchronization trigger, run association at every tick, and emit
//! reports.
//!
//! The trigger free-runs from the first event timestamp: with events
//! spanning `duration` seconds, triggers fire at `t0 + k / rate` for
//! k = 1..=ceil(duration * rate). Events at or before a trigger are folded
//! into their tracks first; the trigger then snapshots every live track at
//! the common timestamp, pushes the snapshots into the ring buffers, and
//! associates.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::association::{associate_tick, AssociationError, AssociationResult, TrackHistory};
use crate::config::{ConfigError, RunConfig};
use crate::geodesy::{bsm_to_detection, GeodesyError};
use crate::kalman::FilterError;
use crate::logio::{self, LogIoError};
use crate::metrics::{tma, GroundTruthMap, MetricsError, TmaReport};
use crate::scenario::{emulate_sensors, export_ground_truth, generate, ScenarioError};
use crate::tracking::TrackStore;
use crate::types::{Sensor, SensorLog, TrackKey};

/// Errors from a pipeline run.
#[derive(Debug)]
pub enum PipelineError {
    Config(ConfigError),
    Ingest(LogIoError),
    Scenario(ScenarioError),
    Filter(FilterError),
    Association(AssociationError),
    Metrics(MetricsError),
    Io { path: PathBuf, source: std::io::Error },
}

impl std::fmt::Display for PipelineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PipelineError::Config(e) => write!(f, "config: {e}"),
            PipelineError::Ingest(e) => write!(f, "ingest: {e}"),
            PipelineError::Scenario(e) => write!(f, "scenario: {e}"),
            PipelineError::Filter(e) => write!(f, "filter: {e}"),
            PipelineError::Association(e) => write!(f, "association: {e}"),
            PipelineError::Metrics(e) => write!(f, "metrics: {e}"),
            PipelineError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for PipelineError {}

impl From<ConfigError> for PipelineError {
    fn from(e: ConfigError) -> Self {
        PipelineError::Config(e)
    }
}

impl From<LogIoError> for PipelineError {
    fn from(e: LogIoError) -> Self {
        PipelineError::Ingest(e)
    }
}

impl From<ScenarioError> for PipelineError {
    fn from(e: ScenarioError) -> Self {
        PipelineError::Scenario(e)
    }
}

impl From<FilterError> for PipelineError {
    fn from(e: FilterError) -> Self {
        PipelineError::Filter(e)
    }
}

impl From<AssociationError> for PipelineError {
    fn from(e: AssociationError) -> Self {
        PipelineError::Association(e)
    }
}

impl From<MetricsError> for PipelineError {
    fn from(e: MetricsError) -> Self {
        PipelineError::Metrics(e)
    }
}

/// Accounting over one run. Every ingested record is either folded into a
/// track or counted under one of the drop reasons.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct PipelineCounters {
    pub camera_detections_in: u64,
    pub bsm_in: u64,
    /// Detections folded into a track (including initializations).
    pub track_updates: u64,
    pub dropped_out_of_order: u64,
    /// BSMs with no host pose within the staleness bound.
    pub dropped_stale_host: u64,
    /// BSMs whose geodesy transform failed.
    pub dropped_geodesy: u64,
    pub gate_rejections: u64,
    /// Ticks at which at least one live V2V track stayed unpaired.
    pub singleton_ticks: u64,
    pub triggers_issued: u64,
    pub tracks_retired: u64,
}

impl PipelineCounters {
    /// No record lost without being counted.
    pub fn conserved(&self) -> bool {
        self.camera_detections_in + self.bsm_in
            == self.track_updates
                + self.dropped_out_of_order
                + self.dropped_stale_host
                + self.dropped_geodesy
    }
}

/// Per-tick assignment row: camera id and confidence per live V2V id.
#[derive(Debug, Clone, PartialEq)]
pub struct TimelineEntry {
    pub tick: u64,
    pub t: f64,
    pub assignments: BTreeMap<u32, (Option<u32>, Option<f64>)>,
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub tma: Option<TmaReport>,
    pub timeline: Vec<TimelineEntry>,
    /// Full association output, one entry per sync tick.
    pub results: Vec<AssociationResult>,
    pub counters: PipelineCounters,
}

/// Runs the whole pipeline for a validated configuration: simulate or
/// ingest, replay with the sync trigger, associate per tick, and score
/// against ground truth when available.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunReport, PipelineError> {
    cfg.validate()?;
    let (log, truth) = prepare_input(cfg)?;
    run_pipeline_on_log(cfg, &log, truth.as_ref())
}

/// Builds the input log: either generated from the configured scenario or
/// ingested from the input directory.
pub fn prepare_input(
    cfg: &RunConfig,
) -> Result<(SensorLog, Option<GroundTruthMap>), PipelineError> {
    if let Some(kind) = cfg.scenario_kind() {
        let scenario_cfg = cfg.scenario_config();
        let trajectories = generate(kind, &scenario_cfg);
        let log = emulate_sensors(&trajectories, &scenario_cfg)?;
        let truth = export_ground_truth(&trajectories, &log, &scenario_cfg, cfg.sync_rate_hz);
        Ok((log, Some(truth)))
    } else {
        let dir = cfg.input_dir.as_ref().expect("validated: input_dir set");
        let log = logio::ingest_log(dir)?;
        let truth = logio::read_truth(dir)?;
        Ok((log, truth))
    }
}

/// Replays an in-memory log through filtering, buffering, and association.
pub fn run_pipeline_on_log(
    cfg: &RunConfig,
    log: &SensorLog,
    truth: Option<&GroundTruthMap>,
) -> Result<RunReport, PipelineError> {
    let mut counters = PipelineCounters {
        camera_detections_in: log.camera.len() as u64,
        bsm_in: log.bsm.len() as u64,
        ..Default::default()
    };

    let Some(t0) = log.first_event_t() else {
        return Ok(RunReport {
            tma: None,
            timeline: Vec::new(),
            results: Vec::new(),
            counters,
        });
    };
    let t_end = log.last_event_t().expect("non-empty log has a last event");
    let duration = t_end - t0;
    let sync_period = cfg.sync_period_s();
    let ticks = ((duration * cfg.sync_rate_hz) - 1e-9).ceil().max(0.0) as u64;

    let mut store = TrackStore::new(cfg.camera_model(), cfg.v2v_model(), cfg.staleness_horizon_s);
    let assoc_cfg = cfg.association_config();
    let mut histories: BTreeMap<TrackKey, TrackHistory> = BTreeMap::new();

    let mut camera_idx = 0usize;
    let mut bsm_idx = 0usize;
    let mut results: Vec<AssociationResult> = Vec::with_capacity(ticks as usize);
    let mut timeline: Vec<TimelineEntry> = Vec::with_capacity(ticks as usize);

    let mut process_until = |t_limit: f64,
                             store: &mut TrackStore,
                             counters: &mut PipelineCounters| {
        loop {
            let next_camera = log.camera.get(camera_idx).map(|d| d.t);
            let next_bsm = log.bsm.get(bsm_idx).map(|b| b.t);
            // Camera events win ties so both sensors see the same history
            // regardless of file interleaving.
            let take_camera = match (next_camera, next_bsm) {
                (Some(tc), Some(tb)) => tc <= tb,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => break,
            };
            if take_camera {
                let det = &log.camera[camera_idx];
                if det.t > t_limit {
                    break;
                }
                camera_idx += 1;
                if store.process_detection(det).is_some() {
                    counters.track_updates += 1;
                }
            } else {
                let bsm = &log.bsm[bsm_idx];
                if bsm.t > t_limit {
                    break;
                }
                bsm_idx += 1;
                // Latest host pose at or before the BSM.
                let host = match log.host.partition_point(|h| h.t <= bsm.t) {
                    0 => log.host.first(),
                    i => Some(&log.host[i - 1]),
                };
                let Some(host) = host else {
                    counters.dropped_stale_host += 1;
                    continue;
                };
                match bsm_to_detection(host, bsm, sync_period) {
                    Ok(det) => {
                        if store.process_detection(&det).is_some() {
                            counters.track_updates += 1;
                        }
                    }
                    Err(GeodesyError::StaleHostPose { .. }) => {
                        counters.dropped_stale_host += 1;
                    }
                    Err(_) => counters.dropped_geodesy += 1,
                }
            }
        }
    };

    for k in 1..=ticks {
        let t_k = t0 + k as f64 / cfg.sync_rate_hz;
        process_until(t_k, &mut store, &mut counters);
        store.retire_stale(t_k);

        // Drop histories of retired tracks, then push this tick's snapshot
        // of every live track.
        histories.retain(|key, _| store.get(key).is_some());
        for (key, state) in store.sync_all(t_k)? {
            let track = store.get(&key).expect("track live at sync");
            let history = histories
                .entry(key)
                .or_insert_with(|| TrackHistory::new(key, cfg.buffer_ticks));
            history.push(state)?;
            history.gate = track.gate;
            history.last_measurement_t = track.last_measurement_t;
        }

        let snapshot: Vec<TrackHistory> = histories.values().cloned().collect();
        let result = associate_tick(&snapshot, t_k, &assoc_cfg)?;
        counters.gate_rejections += result.gate_rejections.len() as u64;

        let mut assignments: BTreeMap<u32, (Option<u32>, Option<f64>)> = BTreeMap::new();
        let mut any_singleton_v2v = false;
        for handle in &result.handles {
            if handle.key.sensor != Sensor::V2v {
                continue;
            }
            let cluster = result.cluster_for(&handle.key).expect("partition covers all");
            let camera = cluster.member_of(Sensor::Camera).map(|k| k.target_id);
            if camera.is_none() {
                any_singleton_v2v = true;
            }
            assignments.insert(handle.key.target_id, (camera, cluster.confidence));
        }
        if any_singleton_v2v {
            counters.singleton_ticks += 1;
        }

        timeline.push(TimelineEntry { tick: k, t: t_k, assignments });
        results.push(result);
    }

    // Drain any events after the final trigger so the accounting stays
    // complete (the last trigger normally lands at or past the last event).
    process_until(f64::INFINITY, &mut store, &mut counters);
    counters.dropped_out_of_order = store.drops().out_of_order;
    counters.tracks_retired = store.retired_count();
    counters.triggers_issued = ticks;
    debug_assert!(counters.conserved());

    let tma_report = match truth {
        Some(truth) => Some(tma(&results, truth, sync_period)?),
        None => None,
    };

    Ok(RunReport { tma: tma_report, timeline, results, counters })
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

fn tma_json(report: &RunReport) -> serde_json::Value {
    match &report.tma {
        None => serde_json::Value::Null,
        Some(t) => {
            let agg = t.aggregate();
            let mut per_vehicle = serde_json::Map::new();
            for (vehicle, tally) in &t.per_vehicle {
                per_vehicle.insert(
                    vehicle.to_string(),
                    serde_json::json!({
                        "correct": tally.correct,
                        "total": tally.total,
                        "no_decisions": tally.no_decisions,
                        "tma_percent": tally.tma_percent().map(round1),
                    }),
                );
            }
            serde_json::json!({
                "aggregate": {
                    "correct": agg.correct,
                    "total": agg.total,
                    "no_decisions": agg.no_decisions,
                    "tma_percent": agg.tma_percent().map(round1),
                },
                "per_vehicle": per_vehicle,
                "note": if agg.total == 0 { Some("no decisions") } else { None },
            })
        }
    }
}

/// Writes report.json, timeline.csv, and confidence.csv into `dir`.
/// Returns the written paths.
pub fn emit_report(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    std::fs::create_dir_all(dir)
        .map_err(|source| PipelineError::Io { path: dir.to_path_buf(), source })?;

    let mut vehicle_ids: Vec<u32> = Vec::new();
    for entry in &report.timeline {
        for id in entry.assignments.keys() {
            if !vehicle_ids.contains(id) {
                vehicle_ids.push(*id);
            }
        }
    }
    vehicle_ids.sort_unstable();

    let report_path = dir.join("report.json");
    let json = serde_json::json!({
        "tma": tma_json(report),
        "counters": report.counters,
    });
    let text = serde_json::to_string_pretty(&json).expect("report serializes");
    std::fs::write(&report_path, text + "\n")
        .map_err(|source| PipelineError::Io { path: report_path.clone(), source })?;

    let timeline_path = dir.join("timeline.csv");
    let mut text = String::from("tick,t_s");
    for id in &vehicle_ids {
        text.push_str(&format!(",cam_{id},conf_{id}"));
    }
    text.push('\n');
    for entry in &report.timeline {
        text.push_str(&format!("{},{}", entry.tick, entry.t));
        for id in &vehicle_ids {
            match entry.assignments.get(id) {
                Some((Some(cam), conf)) => {
                    text.push_str(&format!(",{cam}"));
                    match conf {
                        Some(c) => text.push_str(&format!(",{c:.1}")),
                        None => text.push(','),
                    }
                }
                Some((None, _)) | None => text.push_str(",,"),
            }
        }
        text.push('\n');
    }
    std::fs::write(&timeline_path, text)
        .map_err(|source| PipelineError::Io { path: timeline_path.clone(), source })?;

    let confidence_path = dir.join("confidence.csv");
    let mut text = String::from("tick,t_s");
    for id in &vehicle_ids {
        text.push_str(&format!(",conf_{id}"));
    }
    text.push('\n');
    for entry in &report.timeline {
        text.push_str(&format!("{},{}", entry.tick, entry.t));
        for id in &vehicle_ids {
            match entry.assignments.get(id) {
                Some((_, Some(c))) => text.push_str(&format!(",{c:.1}")),
                _ => text.push(','),
            }
        }
        text.push('\n');
    }
    std::fs::write(&confidence_path, text)
        .map_err(|source| PipelineError::Io { path: confidence_path.clone(), source })?;

    Ok(vec![report_path, timeline_path, confidence_path])
}
