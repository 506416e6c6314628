//! Walk through one association tick: the track-to-track distance matrix
//! over two V2V and four camera tracks, then greedy cluster extraction.
//!
//! Run with: cargo run -p trackfuse --example ttd_clustering

use nalgebra::{Matrix4, Vector4};
use trackfuse::association::{
    build_ttd_matrix, cluster_tracks, AssociationConfig, TrackHistory,
};
use trackfuse::kalman::TrackState;
use trackfuse::types::TrackKey;

fn track_at(key: TrackKey, px: f64, py: f64) -> TrackHistory {
    let mut history = TrackHistory::new(key, 10);
    history.last_measurement_t = 0.0;
    history
        .push(TrackState::new(
            Vector4::new(px, py, 0.0, 0.0),
            Matrix4::identity() * 0.5,
            0.0,
        ))
        .unwrap();
    history
}

fn main() {
    // Two V2V targets and four camera targets; two camera tracks are
    // parked cars with no V2V counterpart.
    let histories = vec![
        track_at(TrackKey::v2v(1), 18.0, 0.3),
        track_at(TrackKey::v2v(2), 33.0, 1.4),
        track_at(TrackKey::camera(1), 18.2, 0.1),
        track_at(TrackKey::camera(2), 33.4, 1.6),
        track_at(TrackKey::camera(3), 25.0, -5.6),
        track_at(TrackKey::camera(4), 40.0, -5.8),
    ];

    let cfg = AssociationConfig::default();
    let (matrix, rejections) = build_ttd_matrix(&histories, cfg.threshold, &cfg).unwrap();

    println!("labels: {:?}", matrix.labels().iter().map(|k| k.to_string()).collect::<Vec<_>>());
    println!("TTD matrix (inf above the diagonal, same-sensor, gated, or over threshold):");
    for row in 0..matrix.n() {
        let cells: Vec<String> = (0..matrix.n())
            .map(|col| {
                let v = matrix.get(row, col);
                if v.is_finite() {
                    format!("{v:6.2}")
                } else {
                    "   inf".to_string()
                }
            })
            .collect();
        println!("  {}", cells.join(" "));
    }
    println!("gate rejections: {}", rejections.len());

    let clusters = cluster_tracks(&matrix);
    println!("clusters, in pick order (singletons last):");
    for cluster in &clusters {
        let members: Vec<String> = cluster.members.iter().map(|k| k.to_string()).collect();
        match cluster.distance {
            Some(d) => println!("  {{{}}} at distance {d:.2}", members.join(", ")),
            None => println!("  {{{}}} (singleton)", members.join(", ")),
        }
    }
}
