//! Transform a remote vehicle's BSM position into the host vehicle frame.
//!
//! Run with: cargo run -p trackfuse --example geodesy_transform

use trackfuse::geodesy::{bsm_to_detection, deg2utm, GeoPoint};
use trackfuse::types::{BsmRecord, HostState};

fn main() {
    // Host northbound near the zone 17 central meridian.
    let host = HostState {
        t: 0.0,
        position: GeoPoint::new(40.0, -81.05).unwrap(),
        heading_deg: 0.0,
        speed_mps: 12.0,
    };

    let hv = deg2utm(&host.position).unwrap();
    println!(
        "host UTM: E = {:.2} m, N = {:.2} m, zone {}",
        hv.easting, hv.northing, hv.zone
    );

    // A remote vehicle a short way up the road, slightly to the left,
    // broadcasting its BSM.
    let bsm = BsmRecord {
        t: 0.02,
        vehicle_id: 7,
        position: GeoPoint::new(40.000406, -81.050042).unwrap(),
        heading_deg: 3.0,
        speed_mps: 11.0,
        length_m: 4.7,
        width_m: 1.8,
    };

    let detection = bsm_to_detection(&host, &bsm, 0.1).unwrap();
    println!(
        "remote vehicle {} in the host frame: {:.2} m ahead, {:.2} m to the {}",
        detection.target_id,
        detection.px,
        detection.py.abs(),
        if detection.py >= 0.0 { "left" } else { "right" }
    );
    println!(
        "range = {:.2} m, relative heading = {:.1} deg, relative speed = {:.1} m/s",
        detection.px.hypot(detection.py),
        detection.relative_heading_deg,
        detection.relative_speed_mps
    );

    // The same BSM seen by a host that faces east instead: the frame turns
    // with the host, the range does not.
    let host_east = HostState { heading_deg: 90.0, ..host };
    let rotated = bsm_to_detection(&host_east, &bsm, 0.1).unwrap();
    println!(
        "same target, host facing east: px = {:.2} m, py = {:.2} m (range {:.2} m)",
        rotated.px,
        rotated.py,
        rotated.px.hypot(rotated.py)
    );
}
