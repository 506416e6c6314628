//! Dual-rate filtering with synchronized snapshots: a 40 Hz camera stream
//! and a 10 Hz V2V stream tracking the same target, sampled together at
//! each 10 Hz trigger.
//!
//! Run with: cargo run -p trackfuse --example kalman_sync

use trackfuse::kalman::KfModel;
use trackfuse::tracking::TrackStore;
use trackfuse::types::{Sensor, SensorDetection};

fn detection(sensor: Sensor, id: u32, t: f64, px: f64, py: f64) -> SensorDetection {
    SensorDetection {
        sensor,
        target_id: id,
        t,
        px,
        py,
        relative_heading_deg: 0.0,
        relative_speed_mps: 2.0,
        length_m: 4.7,
        width_m: 1.8,
    }
}

fn main() {
    let camera_model = KfModel::new(0.5, [0.25, 0.25], 100.0).unwrap();
    let v2v_model = KfModel::new(0.5, [2.25, 2.25], 100.0).unwrap();
    let mut store = TrackStore::new(camera_model, v2v_model, 1.0);

    // A target 20 m ahead pulling away at 2 m/s. The camera reports it 40
    // times a second; BSMs arrive at 10 Hz.
    let truth = |t: f64| 20.0 + 2.0 * t;
    for k in 0..=80 {
        let t = k as f64 * 0.025;
        store.process_detection(&detection(Sensor::Camera, 12, t, truth(t) + 0.1, 0.0));
        if k % 4 == 0 {
            store.process_detection(&detection(Sensor::V2v, 3, t, truth(t) - 0.4, 0.1));
        }
    }

    // Sync triggers fire after the last processed measurement (t = 2.0 s);
    // each snapshot is a prediction-only estimate at the trigger time.
    println!("live tracks: {}", store.len());
    println!("tick   camera px   v2v px   truth");
    for k in 0..=4 {
        let trigger = 2.0 + k as f64 * 0.1;
        let snapshots = store.sync_all(trigger).unwrap();
        let mut cam = f64::NAN;
        let mut v2v = f64::NAN;
        for (key, snap) in &snapshots {
            // Every snapshot carries the identical trigger timestamp.
            assert_eq!(snap.t, trigger);
            match key.sensor {
                Sensor::Camera => cam = snap.x[0],
                Sensor::V2v => v2v = snap.x[0],
            }
        }
        println!(
            "{trigger:.1} s  {cam:8.2} m {v2v:8.2} m  {:6.2} m",
            truth(trigger)
        );
    }
}
