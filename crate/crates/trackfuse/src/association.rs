//! Track-to-track association: ring-buffered track histories, buffered
//! Mahalanobis distances, speed/heading gating, and greedy cluster
//! extraction from the track-to-track distance (TTD) matrix.
//!
//! The per-tick flow is: gate every cross-sensor pair, fill the N x N TTD
//! matrix (infinity above the diagonal, for same-sensor pairs, for gated
//! pairs, and for distances over the threshold), then repeatedly take the
//! global minimum finite cell to form clusters, invalidating each clustered
//! track against every sensor already represented in its cluster. Tracks
//! left over become singleton clusters.

use std::collections::VecDeque;

use nalgebra::{Matrix4, Vector4};

use crate::kalman::TrackState;
use crate::metrics;
use crate::tracking::GateSignals;
use crate::types::{Sensor, TrackKey};

/// Errors from the association operations.
#[derive(Debug, Clone, PartialEq)]
pub enum AssociationError {
    /// Sum of the two covariances could not be factored; carries a condition
    /// estimate of the offending matrix.
    SingularCovariance { condition: f64 },
    /// States compared at different sync timestamps.
    TimestampMismatch { a: f64, b: f64 },
    /// History push out of order.
    NonIncreasingHistory { last: f64, pushed: f64 },
}

impl std::fmt::Display for AssociationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AssociationError::SingularCovariance { condition } => {
                write!(f, "covariance sum is singular (condition estimate {condition:.3e})")
            }
            AssociationError::TimestampMismatch { a, b } => {
                write!(f, "states at different timestamps ({a} vs {b})")
            }
            AssociationError::NonIncreasingHistory { last, pushed } => {
                write!(f, "history timestamps must strictly increase (last {last}, pushed {pushed})")
            }
        }
    }
}

impl std::error::Error for AssociationError {}

/// Gating and clustering parameters for one association tick.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationConfig {
    /// TTD cells above this are set to infinity.
    pub threshold: f64,
    /// Maximum |relative speed difference| between paired tracks, m/s.
    pub speed_gate_mps: f64,
    /// Maximum |wrapped relative heading difference| between paired tracks,
    /// degrees.
    pub heading_gate_deg: f64,
    /// Confidence threshold `th` (independent of `threshold`).
    pub confidence_th: f64,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        Self { threshold: 8.0, speed_gate_mps: 3.0, heading_gate_deg: 45.0, confidence_th: 8.0 }
    }
}

/// Ring buffer of the last `capacity` synchronized states of one track,
/// newest last, plus the latest gate signals.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackHistory {
    pub key: TrackKey,
    buffer: VecDeque<TrackState>,
    capacity: usize,
    pub gate: GateSignals,
    /// Time of the underlying track's last real measurement.
    pub last_measurement_t: f64,
}

impl TrackHistory {
    pub fn new(key: TrackKey, capacity: usize) -> Self {
        assert!(capacity >= 1, "history capacity must be at least 1");
        Self {
            key,
            buffer: VecDeque::with_capacity(capacity),
            capacity,
            gate: GateSignals { relative_heading_deg: 0.0, relative_speed_mps: 0.0 },
            last_measurement_t: f64::NEG_INFINITY,
        }
    }

    /// Appends a synchronized state, evicting the oldest once full.
    /// Timestamps must strictly increase.
    pub fn push(&mut self, state: TrackState) -> Result<(), AssociationError> {
        if let Some(last) = self.buffer.back() {
            if state.t <= last.t {
                return Err(AssociationError::NonIncreasingHistory {
                    last: last.t,
                    pushed: state.t,
                });
            }
        }
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(state);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn states(&self) -> impl Iterator<Item = &TrackState> {
        self.buffer.iter()
    }

    pub fn latest(&self) -> Option<&TrackState> {
        self.buffer.back()
    }
}

/// Mahalanobis distance between two synchronized state estimates:
/// d = sqrt((Xa - Xb)^T (Pa + Pb)^-1 (Xa - Xb)).
pub fn mahalanobis_step(a: &TrackState, b: &TrackState) -> Result<f64, AssociationError> {
    if a.t != b.t {
        return Err(AssociationError::TimestampMismatch { a: a.t, b: b.t });
    }
    let delta: Vector4<f64> = a.x - b.x;
    let sum: Matrix4<f64> = a.p + b.p;
    let chol = match sum.cholesky() {
        Some(c) => c,
        None => {
            let eig = sum.symmetric_eigenvalues();
            let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            let condition = if min.abs() > 0.0 { (max / min).abs() } else { f64::INFINITY };
            return Err(AssociationError::SingularCovariance { condition });
        }
    };
    let solved = chol.solve(&delta);
    Ok(delta.dot(&solved).max(0.0).sqrt())
}

/// Buffered track-to-track distance: the mean Mahalanobis distance over the
/// tick-aligned state pairs present in both histories.
///
/// Histories shorter than the buffer capacity are compared over whatever
/// aligned ticks exist. `Ok(None)` signals no overlapping ticks, which the
/// matrix builder treats as infinity.
pub fn track_distance(
    a: &TrackHistory,
    b: &TrackHistory,
) -> Result<Option<f64>, AssociationError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut ia = a.buffer.iter().peekable();
    let mut ib = b.buffer.iter().peekable();
    while let (Some(sa), Some(sb)) = (ia.peek(), ib.peek()) {
        if sa.t == sb.t {
            sum += mahalanobis_step(sa, sb)?;
            count += 1;
            ia.next();
            ib.next();
        } else if sa.t < sb.t {
            ia.next();
        } else {
            ib.next();
        }
    }
    if count == 0 {
        return Ok(None);
    }
    Ok(Some(sum / count as f64))
}

/// Why a candidate pair was rejected before distance computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateReason {
    Speed,
    Heading,
}

impl std::fmt::Display for GateReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GateReason::Speed => write!(f, "speed"),
            GateReason::Heading => write!(f, "heading"),
        }
    }
}

/// A pair rejected by the speed/heading gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateRejection {
    pub a: TrackKey,
    pub b: TrackKey,
    pub reason: GateReason,
}

/// Checks the auxiliary-parameter gate between two tracks. Heading is
/// compared on the wrapped difference so that 350 and -10 degrees agree.
pub fn gate_check(
    a: &TrackHistory,
    b: &TrackHistory,
    cfg: &AssociationConfig,
) -> Result<(), GateReason> {
    let dv = (a.gate.relative_speed_mps - b.gate.relative_speed_mps).abs();
    if dv > cfg.speed_gate_mps {
        return Err(GateReason::Speed);
    }
    let dh = crate::geodesy::wrap_degrees(
        a.gate.relative_heading_deg - b.gate.relative_heading_deg,
    )
    .abs();
    if dh > cfg.heading_gate_deg {
        return Err(GateReason::Heading);
    }
    Ok(())
}

/// The N x N track-to-track distance matrix. Only cross-sensor cells in the
/// lower triangle hold finite distances; everything else is infinity.
/// Labels are ordered V2V tracks first, then camera tracks, each by id.
#[derive(Debug, Clone, PartialEq)]
pub struct TtdMatrix {
    labels: Vec<TrackKey>,
    cells: Vec<f64>,
}

impl TtdMatrix {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[TrackKey] {
        &self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cells[row * self.labels.len() + col]
    }

    fn set(&mut self, row: usize, col: usize, v: f64) {
        self.cells[row * self.labels.len() + col] = v;
    }
}

/// Builds the TTD matrix over the given histories and reports which pairs
/// the speed/heading gate rejected.
pub fn build_ttd_matrix(
    histories: &[TrackHistory],
    threshold: f64,
    cfg: &AssociationConfig,
) -> Result<(TtdMatrix, Vec<GateRejection>), AssociationError> {
    let mut order: Vec<usize> = (0..histories.len()).collect();
    order.sort_by_key(|&i| histories[i].key);
    let labels: Vec<TrackKey> = order.iter().map(|&i| histories[i].key).collect();

    let n = labels.len();
    let mut m = TtdMatrix { labels, cells: vec![f64::INFINITY; n * n] };
    let mut rejections = Vec::new();

    for row in 1..n {
        for col in 0..row {
            let a = &histories[order[row]];
            let b = &histories[order[col]];
            if a.key.sensor == b.key.sensor {
                continue;
            }
            if let Err(reason) = gate_check(a, b, cfg) {
                rejections.push(GateRejection { a: b.key, b: a.key, reason });
                continue;
            }
            match track_distance(a, b)? {
                Some(d) if d <= threshold => m.set(row, col, d),
                _ => {}
            }
        }
    }
    Ok((m, rejections))
}

/// A set of associated tracks, at most one per sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub members: Vec<TrackKey>,
    /// Buffered distance of the founding pair; `None` for singletons.
    pub distance: Option<f64>,
    /// Percent confidence of the founding pair; `None` for singletons.
    pub confidence: Option<f64>,
}

impl Cluster {
    pub fn is_singleton(&self) -> bool {
        self.members.len() == 1
    }

    pub fn contains(&self, key: &TrackKey) -> bool {
        self.members.contains(key)
    }

    pub fn member_of(&self, sensor: Sensor) -> Option<TrackKey> {
        self.members.iter().copied().find(|k| k.sensor == sensor)
    }
}

/// Greedy cluster extraction from the TTD matrix.
///
/// Repeatedly takes the global minimum finite cell (ties broken by lowest
/// row, then column). A pair of unclustered tracks founds a new cluster; a
/// finite cell touching exactly one clustered track extends that cluster
/// (unreachable with two sensors, kept for sensor-count-generic use). After
/// every pick, each member of the affected cluster is invalidated against
/// all tracks of every sensor the cluster now covers. Leftover tracks wrap
/// into singleton clusters in label order.
pub fn cluster_tracks(matrix: &TtdMatrix) -> Vec<Cluster> {
    let n = matrix.n();
    let labels = matrix.labels();
    let mut m = matrix.clone();
    let mut cluster_of: Vec<Option<usize>> = vec![None; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut founding_distance: Vec<Option<f64>> = Vec::new();

    loop {
        // Global minimum finite cell, lowest (row, col) on ties.
        let mut best: Option<(usize, usize, f64)> = None;
        for row in 0..n {
            for col in 0..n {
                let v = m.get(row, col);
                if v.is_finite() && best.is_none_or(|(_, _, bv)| v < bv) {
                    best = Some((row, col, v));
                }
            }
        }
        let Some((row, col, value)) = best else { break };

        match (cluster_of[row], cluster_of[col]) {
            (None, None) => {
                let id = clusters.len();
                clusters.push(vec![row, col]);
                founding_distance.push(Some(value));
                cluster_of[row] = Some(id);
                cluster_of[col] = Some(id);
                invalidate(&mut m, labels, &clusters[id], &cluster_of);
            }
            (Some(id), None) => {
                clusters[id].push(col);
                cluster_of[col] = Some(id);
                invalidate(&mut m, labels, &clusters[id], &cluster_of);
            }
            (None, Some(id)) => {
                clusters[id].push(row);
                cluster_of[row] = Some(id);
                invalidate(&mut m, labels, &clusters[id], &cluster_of);
            }
            (Some(_), Some(_)) => {
                // Both already clustered: nothing to merge, retire the cell.
                m.set(row, col, f64::INFINITY);
            }
        }
    }

    let mut out: Vec<Cluster> = clusters
        .iter()
        .zip(founding_distance.iter())
        .map(|(members, d)| {
            let mut keys: Vec<TrackKey> = members.iter().map(|&i| labels[i]).collect();
            keys.sort_unstable();
            Cluster { members: keys, distance: *d, confidence: None }
        })
        .collect();

    // Stage 5: leftover tracks become singleton clusters.
    for i in 0..n {
        if cluster_of[i].is_none() {
            out.push(Cluster { members: vec![labels[i]], distance: None, confidence: None });
        }
    }
    out
}

/// Sets to infinity every cell pairing a cluster member with any track of a
/// sensor the cluster already covers (including intra-cluster cells).
fn invalidate(
    m: &mut TtdMatrix,
    labels: &[TrackKey],
    cluster: &[usize],
    cluster_of: &[Option<usize>],
) {
    let sensors: Vec<Sensor> = cluster.iter().map(|&i| labels[i].sensor).collect();
    let this_cluster = cluster_of[cluster[0]];
    for &member in cluster {
        for (other, other_cluster) in cluster_of.iter().enumerate() {
            if other == member {
                continue;
            }
            let covered = sensors.contains(&labels[other].sensor);
            if covered || *other_cluster == this_cluster {
                m.set(member, other, f64::INFINITY);
                m.set(other, member, f64::INFINITY);
            }
        }
    }
}

/// Snapshot of one live track at an association tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackHandle {
    pub key: TrackKey,
    /// Time of the track's last real measurement (not the sync prediction).
    pub last_measurement_t: f64,
}

/// Output of one association tick: a partition of the live tracks into
/// clusters plus the gate-rejected pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationResult {
    pub t: f64,
    pub clusters: Vec<Cluster>,
    pub gate_rejections: Vec<GateRejection>,
    pub handles: Vec<TrackHandle>,
}

impl AssociationResult {
    /// The cluster containing the given track, if it is live at this tick.
    pub fn cluster_for(&self, key: &TrackKey) -> Option<&Cluster> {
        self.clusters.iter().find(|c| c.contains(key))
    }

    pub fn is_live(&self, key: &TrackKey) -> bool {
        self.handles.iter().any(|h| h.key == *key)
    }

    pub fn handle(&self, key: &TrackKey) -> Option<&TrackHandle> {
        self.handles.iter().find(|h| h.key == *key)
    }
}

/// Runs one full association tick over the synchronized histories:
/// gate -> TTD matrix -> greedy clusters -> per-cluster confidence.
pub fn associate_tick(
    histories: &[TrackHistory],
    t: f64,
    cfg: &AssociationConfig,
) -> Result<AssociationResult, AssociationError> {
    let (matrix, gate_rejections) = build_ttd_matrix(histories, cfg.threshold, cfg)?;
    let mut clusters = cluster_tracks(&matrix);
    for cluster in &mut clusters {
        cluster.confidence =
            cluster.distance.map(|d| metrics::confidence(d, cfg.confidence_th));
    }
    let handles = {
        let mut hs: Vec<TrackHandle> = histories
            .iter()
            .map(|h| TrackHandle { key: h.key, last_measurement_t: h.last_measurement_t })
            .collect();
        hs.sort_by_key(|h| h.key);
        hs
    };
    Ok(AssociationResult { t, clusters, gate_rejections, handles })
}
