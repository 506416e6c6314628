//! End-to-end car-following run: simulate the three-vehicle loop with
//! parked cars, replay it through the pipeline, and score the association
//! against ground truth.
//!
//! Run with: cargo run -p trackfuse --example car_following

use trackfuse::config::RunConfig;
use trackfuse::pipeline::{prepare_input, run_pipeline_on_log};

fn main() {
    let cfg = RunConfig {
        scenario: Some("car_following".to_string()),
        seed: 1,
        ..Default::default()
    };
    cfg.validate().unwrap();

    let (log, truth) = prepare_input(&cfg).unwrap();
    println!(
        "simulated {} camera detections, {} BSMs, {} host poses",
        log.camera.len(),
        log.bsm.len(),
        log.host.len()
    );

    let report = run_pipeline_on_log(&cfg, &log, truth.as_ref()).unwrap();
    println!(
        "{} sync ticks, {} track updates, {} gate rejections, {} tracks retired",
        report.counters.triggers_issued,
        report.counters.track_updates,
        report.counters.gate_rejections,
        report.counters.tracks_retired
    );

    let tma = report.tma.as_ref().unwrap();
    for (vehicle, tally) in &tma.per_vehicle {
        println!(
            "vehicle {vehicle}: TMA {:.1}% ({}/{} decisions, {} no-decision ticks)",
            tally.tma_percent().unwrap_or(0.0),
            tally.correct,
            tally.total,
            tally.no_decisions
        );
    }

    // Confidence trace summary per vehicle (the pipeline also emits a full
    // confidence.csv through emit_report).
    for vehicle in tma.per_vehicle.keys() {
        let confidences: Vec<f64> = report
            .timeline
            .iter()
            .filter_map(|e| e.assignments.get(vehicle).and_then(|(_, c)| *c))
            .collect();
        if confidences.is_empty() {
            continue;
        }
        let min = confidences.iter().cloned().fold(f64::INFINITY, f64::min);
        let mean = confidences.iter().sum::<f64>() / confidences.len() as f64;
        println!(
            "vehicle {vehicle}: confidence mean {mean:.1}%, min {min:.1}% over {} paired ticks",
            confidences.len()
        );
    }
}
