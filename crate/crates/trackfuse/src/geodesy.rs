//! Coordinate transforms that bring V2V global positions into the host
//! vehicle frame.
//!
//! The chain is: WGS84 geodetic -> UTM grid (transverse Mercator series,
//! sub-centimeter in zone) -> ENU displacement remote-minus-host -> rigid
//! rotation by the host compass heading into the vehicle frame.
//!
//! Conventions:
//! - Headings are degrees clockwise from true North (the J2735 BSM
//!   convention). A target straight ahead of the host always maps to zero
//!   lateral offset, whatever the heading.
//! - Vehicle frame: `px` longitudinal (positive forward), `py` lateral
//!   (positive left).

use serde::{Deserialize, Serialize};

use crate::types::{BsmRecord, HostState, Sensor, SensorDetection};

// WGS84 ellipsoid
const WGS84_A: f64 = 6378137.0;
const WGS84_F: f64 = 1.0 / 298.257223563;
const UTM_K0: f64 = 0.9996;
const FALSE_EASTING: f64 = 500000.0;
const FALSE_NORTHING_SOUTH: f64 = 10000000.0;

/// Errors from the geodesy operations.
#[derive(Debug, Clone, PartialEq)]
pub enum GeodesyError {
    /// Coordinate outside its legal range; carries the field name and value.
    OutOfRange { field: &'static str, value: f64 },
    /// Latitude outside the UTM band [-80, 84].
    OutsideUtmBand { lat: f64 },
    /// Pairwise operation on coordinates from different UTM zones.
    ZoneMismatch { host: UtmZone, remote: UtmZone },
    /// Host pose older than the allowed staleness relative to the BSM.
    StaleHostPose { host_t: f64, bsm_t: f64 },
}

impl std::fmt::Display for GeodesyError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GeodesyError::OutOfRange { field, value } => {
                write!(f, "{field} = {value} is out of range")
            }
            GeodesyError::OutsideUtmBand { lat } => {
                write!(f, "lat = {lat} is outside the UTM band [-80, 84]")
            }
            GeodesyError::ZoneMismatch { host, remote } => write!(
                f,
                "UTM zone mismatch (host {host}, remote {remote}); \
                 re-project the remote point into the host zone first"
            ),
            GeodesyError::StaleHostPose { host_t, bsm_t } => write!(
                f,
                "host pose at t={host_t} is stale for BSM at t={bsm_t}"
            ),
        }
    }
}

impl std::error::Error for GeodesyError {}

/// A WGS84 geodetic position in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    /// Validates `lat` in [-90, 90] and `lon` in [-180, 180].
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeodesyError> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(GeodesyError::OutOfRange { field: "lat", value: lat });
        }
        if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
            return Err(GeodesyError::OutOfRange { field: "lon", value: lon });
        }
        Ok(Self { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

/// UTM zone designator: zone number plus hemisphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtmZone {
    pub number: u8,
    pub north: bool,
}

impl UtmZone {
    pub fn new(number: u8, north: bool) -> Self {
        debug_assert!((1..=60).contains(&number));
        Self { number, north }
    }

    /// Longitude of the zone's central meridian, degrees.
    pub fn central_meridian_deg(&self) -> f64 {
        f64::from(self.number) * 6.0 - 183.0
    }

    /// Zone containing a geodetic point.
    pub fn for_point(p: &GeoPoint) -> Self {
        let mut number = ((p.lon() + 180.0) / 6.0).floor() as i32 + 1;
        number = number.clamp(1, 60); // lon = 180 exactly
        Self::new(number as u8, p.lat() >= 0.0)
    }
}

impl std::fmt::Display for UtmZone {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{}", self.number, if self.north { 'N' } else { 'S' })
    }
}

/// A UTM grid coordinate: easting/northing in meters plus the zone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtmCoord {
    pub easting: f64,
    pub northing: f64,
    pub zone: UtmZone,
}

/// Host pose in UTM: grid position plus compass heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HostPose {
    pub position: UtmCoord,
    /// Degrees clockwise from true North, in [0, 360).
    pub heading_deg: f64,
}

/// A point expressed in the host vehicle frame, with its range cached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleFramePoint {
    /// Longitudinal offset, meters, positive forward.
    pub px: f64,
    /// Lateral offset, meters, positive left.
    pub py: f64,
    /// Euclidean range, meters.
    pub range: f64,
}

impl VehicleFramePoint {
    pub fn new(px: f64, py: f64) -> Self {
        Self { px, py, range: px.hypot(py) }
    }
}

/// Converts a geodetic point to UTM in its natural zone.
///
/// Standard WGS84 transverse Mercator series (false easting 500 km, false
/// northing 10 000 km in the southern hemisphere), accurate to < 1 cm in
/// zone. Latitudes outside [-80, 84] are rejected.
pub fn deg2utm(p: &GeoPoint) -> Result<UtmCoord, GeodesyError> {
    let zone = UtmZone::for_point(p);
    deg2utm_in_zone(p, zone)
}

/// Converts a geodetic point to UTM in a caller-chosen zone (extended
/// transverse Mercator). Used to re-project a remote vehicle that sits just
/// across a zone boundary into the host's zone.
pub fn deg2utm_in_zone(p: &GeoPoint, zone: UtmZone) -> Result<UtmCoord, GeodesyError> {
    if !(-80.0..=84.0).contains(&p.lat()) {
        return Err(GeodesyError::OutsideUtmBand { lat: p.lat() });
    }

    let e2 = WGS84_F * (2.0 - WGS84_F);
    let ep2 = e2 / (1.0 - e2);

    let phi = p.lat().to_radians();
    let mut dlon = p.lon() - zone.central_meridian_deg();
    // Shortest way around the antimeridian, relevant only for forced zones.
    if dlon > 180.0 {
        dlon -= 360.0;
    } else if dlon < -180.0 {
        dlon += 360.0;
    }
    let lam = dlon.to_radians();

    let sin_phi = phi.sin();
    let cos_phi = phi.cos();
    let tan_phi = phi.tan();

    let n = WGS84_A / (1.0 - e2 * sin_phi * sin_phi).sqrt();
    let t = tan_phi * tan_phi;
    let c = ep2 * cos_phi * cos_phi;
    let a = cos_phi * lam;

    let m = WGS84_A
        * ((1.0 - e2 / 4.0 - 3.0 * e2 * e2 / 64.0 - 5.0 * e2 * e2 * e2 / 256.0) * phi
            - (3.0 * e2 / 8.0 + 3.0 * e2 * e2 / 32.0 + 45.0 * e2 * e2 * e2 / 1024.0)
                * (2.0 * phi).sin()
            + (15.0 * e2 * e2 / 256.0 + 45.0 * e2 * e2 * e2 / 1024.0) * (4.0 * phi).sin()
            - (35.0 * e2 * e2 * e2 / 3072.0) * (6.0 * phi).sin());

    let a2 = a * a;
    let a3 = a2 * a;
    let a4 = a3 * a;
    let a5 = a4 * a;
    let a6 = a5 * a;

    let x = UTM_K0
        * n
        * (a + (1.0 - t + c) * a3 / 6.0
            + (5.0 - 18.0 * t + t * t + 72.0 * c - 58.0 * ep2) * a5 / 120.0);
    let y = UTM_K0
        * (m + n
            * tan_phi
            * (a2 / 2.0
                + (5.0 - t + 9.0 * c + 4.0 * c * c) * a4 / 24.0
                + (61.0 - 58.0 * t + t * t + 600.0 * c - 330.0 * ep2) * a6 / 720.0));

    let easting = x + FALSE_EASTING;
    let northing = if zone.north { y } else { y + FALSE_NORTHING_SOUTH };

    Ok(UtmCoord { easting, northing, zone })
}

/// Inverse of [`deg2utm`]: UTM grid coordinate back to geodetic degrees.
///
/// Round-trips with the forward series to about a millimeter in zone.
pub fn utm_to_geo(c: &UtmCoord) -> Result<GeoPoint, GeodesyError> {
    if !(1..=60).contains(&c.zone.number) {
        return Err(GeodesyError::OutOfRange {
            field: "zone",
            value: f64::from(c.zone.number),
        });
    }

    let e2 = WGS84_F * (2.0 - WGS84_F);
    let ep2 = e2 / (1.0 - e2);
    let e1 = (1.0 - (1.0 - e2).sqrt()) / (1.0 + (1.0 - e2).sqrt());

    let x = c.easting - FALSE_EASTING;
    let y = if c.zone.north { c.northing } else { c.northing - FALSE_NORTHING_SOUTH };

    let m = y / UTM_K0;
    let mu = m / (WGS84_A * (1.0 - e2 / 4.0 - 3.0 * e2 * e2 / 64.0 - 5.0 * e2 * e2 * e2 / 256.0));

    let e1_2 = e1 * e1;
    let e1_3 = e1_2 * e1;
    let e1_4 = e1_3 * e1;
    let phi1 = mu
        + (3.0 * e1 / 2.0 - 27.0 * e1_3 / 32.0) * (2.0 * mu).sin()
        + (21.0 * e1_2 / 16.0 - 55.0 * e1_4 / 32.0) * (4.0 * mu).sin()
        + (151.0 * e1_3 / 96.0) * (6.0 * mu).sin()
        + (1097.0 * e1_4 / 512.0) * (8.0 * mu).sin();

    let sin1 = phi1.sin();
    let cos1 = phi1.cos();
    let tan1 = phi1.tan();

    let c1 = ep2 * cos1 * cos1;
    let t1 = tan1 * tan1;
    let n1 = WGS84_A / (1.0 - e2 * sin1 * sin1).sqrt();
    let r1 = WGS84_A * (1.0 - e2) / (1.0 - e2 * sin1 * sin1).powf(1.5);
    let d = x / (n1 * UTM_K0);

    let d2 = d * d;
    let d3 = d2 * d;
    let d4 = d3 * d;
    let d5 = d4 * d;
    let d6 = d5 * d;

    let phi = phi1
        - (n1 * tan1 / r1)
            * (d2 / 2.0
                - (5.0 + 3.0 * t1 + 10.0 * c1 - 4.0 * c1 * c1 - 9.0 * ep2) * d4 / 24.0
                + (61.0 + 90.0 * t1 + 298.0 * c1 + 45.0 * t1 * t1 - 252.0 * ep2 - 3.0 * c1 * c1)
                    * d6
                    / 720.0);
    let lam = (d - (1.0 + 2.0 * t1 + c1) * d3 / 6.0
        + (5.0 - 2.0 * c1 + 28.0 * t1 - 3.0 * c1 * c1 + 8.0 * ep2 + 24.0 * t1 * t1) * d5 / 120.0)
        / cos1;

    let lat = phi.to_degrees();
    let lon = c.zone.central_meridian_deg() + lam.to_degrees();
    GeoPoint::new(lat, lon)
}

/// ENU displacement of the remote point relative to the host, meters.
///
/// Both coordinates must already be in the same UTM zone; mismatched zones
/// are rejected so the caller re-projects first (see [`deg2utm_in_zone`]).
pub fn relative_displacement(hv: &UtmCoord, rv: &UtmCoord) -> Result<(f64, f64), GeodesyError> {
    if hv.zone != rv.zone {
        return Err(GeodesyError::ZoneMismatch { host: hv.zone, remote: rv.zone });
    }
    Ok((rv.easting - hv.easting, rv.northing - hv.northing))
}

/// Rotates an ENU displacement into the host vehicle frame.
///
/// With compass heading `theta` (clockwise from North), the host's forward
/// unit vector in ENU is (sin theta, cos theta) and its left unit vector is
/// (-cos theta, sin theta). A target on the heading ray therefore lands at
/// `py = 0` exactly.
pub fn global_to_vehicle(de: f64, dn: f64, pose: &HostPose) -> VehicleFramePoint {
    let theta = pose.heading_deg.to_radians();
    let (sin_t, cos_t) = theta.sin_cos();
    let px = de * sin_t + dn * cos_t;
    let py = -de * cos_t + dn * sin_t;
    VehicleFramePoint::new(px, py)
}

/// Inverse of [`global_to_vehicle`]: vehicle-frame offsets back to an ENU
/// displacement.
pub fn vehicle_to_global(px: f64, py: f64, heading_deg: f64) -> (f64, f64) {
    let theta = heading_deg.to_radians();
    let (sin_t, cos_t) = theta.sin_cos();
    let de = px * sin_t - py * cos_t;
    let dn = px * cos_t + py * sin_t;
    (de, dn)
}

/// Wraps an angle in degrees to (-180, 180].
pub fn wrap_degrees(deg: f64) -> f64 {
    let mut x = deg % 360.0;
    if x <= -180.0 {
        x += 360.0;
    } else if x > 180.0 {
        x -= 360.0;
    }
    x
}

/// Normalizes a heading to [0, 360).
pub fn normalize_heading(deg: f64) -> f64 {
    let mut x = deg % 360.0;
    if x < 0.0 {
        x += 360.0;
    }
    x
}

/// Transforms one BSM into a normalized detection in the host frame.
///
/// Composes deg2utm for host and remote (re-projecting the remote into the
/// host's zone when they differ), the ENU displacement, and the heading
/// rotation; fills in the relative heading and relative speed gate fields.
///
/// The host pose must be timestamped within `max_host_staleness_s` of the
/// BSM, otherwise a staleness error carrying both timestamps is returned.
pub fn bsm_to_detection(
    host: &HostState,
    bsm: &BsmRecord,
    max_host_staleness_s: f64,
) -> Result<SensorDetection, GeodesyError> {
    if (bsm.t - host.t).abs() > max_host_staleness_s {
        return Err(GeodesyError::StaleHostPose { host_t: host.t, bsm_t: bsm.t });
    }

    let hv = deg2utm(&host.position)?;
    let rv = deg2utm_in_zone(&bsm.position, hv.zone)?;
    let (de, dn) = relative_displacement(&hv, &rv)?;
    let pose = HostPose { position: hv, heading_deg: normalize_heading(host.heading_deg) };
    let point = global_to_vehicle(de, dn, &pose);

    Ok(SensorDetection {
        sensor: Sensor::V2v,
        target_id: bsm.vehicle_id,
        t: bsm.t,
        px: point.px,
        py: point.py,
        relative_heading_deg: wrap_degrees(bsm.heading_deg - host.heading_deg),
        relative_speed_mps: bsm.speed_mps - host.speed_mps,
        length_m: bsm.length_m,
        width_m: bsm.width_m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn geo(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn equator_central_meridian_is_false_easting_origin() {
        let c = deg2utm(&geo(0.0, 3.0)).unwrap();
        assert!((c.easting - 500000.0).abs() < 1e-6, "easting {}", c.easting);
        assert!(c.northing.abs() < 1e-6, "northing {}", c.northing);
        assert_eq!(c.zone, UtmZone::new(31, true));
    }

    #[test]
    fn reference_point_matches_independent_oracle() {
        // Reference computed with an independent transverse-Mercator
        // implementation (6th-order Krueger series).
        let c = deg2utm(&geo(40.0, -83.0)).unwrap();
        assert!((c.easting - 329274.5057).abs() < 0.01, "easting {}", c.easting);
        assert!((c.northing - 4429672.9731).abs() < 0.01, "northing {}", c.northing);
        assert_eq!(c.zone, UtmZone::new(17, true));
    }

    #[test]
    fn meridian_pair_100m_apart() {
        // Second point is 100 m due north (geodesic) of the first.
        let a = deg2utm(&geo(40.0, -81.05)).unwrap();
        let b = deg2utm(&geo(40.000900619833, -81.05)).unwrap();
        assert!(((b.northing - a.northing) - 100.0).abs() < 0.1);
    }

    #[test]
    fn out_of_band_latitude_rejected() {
        let err = deg2utm(&geo(-85.0, 10.0)).unwrap_err();
        assert!(matches!(err, GeodesyError::OutsideUtmBand { lat } if lat == -85.0));
    }

    #[test]
    fn invalid_geopoint_rejected() {
        let err = GeoPoint::new(91.0, 0.0).unwrap_err();
        assert!(matches!(err, GeodesyError::OutOfRange { field: "lat", .. }));
        let err = GeoPoint::new(0.0, 181.0).unwrap_err();
        assert!(matches!(err, GeodesyError::OutOfRange { field: "lon", .. }));
    }

    #[test]
    fn northing_monotone_in_latitude() {
        let mut prev = f64::NEG_INFINITY;
        for i in 0..50 {
            let lat = -75.0 + 3.0 * i as f64;
            if lat > 83.0 {
                break;
            }
            let c = deg2utm_in_zone(&geo(lat, -81.0), UtmZone::new(17, true)).unwrap();
            assert!(c.northing > prev, "northing not monotone at lat {lat}");
            prev = c.northing;
        }
    }

    #[test]
    fn utm_roundtrip_millimeter() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let lat = rng.gen_range(-79.0..83.0);
            let lon = rng.gen_range(-179.0..179.0);
            let p = geo(lat, lon);
            let c = deg2utm(&p).unwrap();
            let q = utm_to_geo(&c).unwrap();
            let c2 = deg2utm(&q).unwrap();
            assert!((c.easting - c2.easting).abs() < 2e-3);
            assert!((c.northing - c2.northing).abs() < 2e-3);
        }
    }

    #[test]
    fn displacement_componentwise() {
        let z = UtmZone::new(17, true);
        let hv = UtmCoord { easting: 500000.0, northing: 4400000.0, zone: z };
        let rv = UtmCoord { easting: 500010.0, northing: 4400020.0, zone: z };
        assert_eq!(relative_displacement(&hv, &hv).unwrap(), (0.0, 0.0));
        assert_eq!(relative_displacement(&hv, &rv).unwrap(), (10.0, 20.0));
        let (de, dn) = relative_displacement(&rv, &hv).unwrap();
        assert_eq!((de, dn), (-10.0, -20.0));
    }

    #[test]
    fn displacement_rejects_zone_mismatch() {
        let hv = UtmCoord { easting: 500000.0, northing: 4400000.0, zone: UtmZone::new(17, true) };
        let rv = UtmCoord { easting: 500000.0, northing: 4400000.0, zone: UtmZone::new(18, true) };
        assert!(matches!(
            relative_displacement(&hv, &rv),
            Err(GeodesyError::ZoneMismatch { .. })
        ));
    }

    fn pose(heading_deg: f64) -> HostPose {
        HostPose {
            position: UtmCoord {
                easting: 500000.0,
                northing: 4400000.0,
                zone: UtmZone::new(17, true),
            },
            heading_deg,
        }
    }

    #[test]
    fn dead_ahead_north() {
        let p = global_to_vehicle(0.0, 10.0, &pose(0.0));
        assert!((p.px - 10.0).abs() < 1e-12);
        assert!(p.py.abs() < 1e-12);
    }

    #[test]
    fn dead_ahead_east() {
        let p = global_to_vehicle(10.0, 0.0, &pose(90.0));
        assert!((p.px - 10.0).abs() < 1e-12);
        assert!(p.py.abs() < 1e-12);
    }

    #[test]
    fn left_is_positive_lateral() {
        // Host faces North; a target due West is on its left.
        let p = global_to_vehicle(-5.0, 0.0, &pose(0.0));
        assert!(p.px.abs() < 1e-12);
        assert!((p.py - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_is_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let de = rng.gen_range(-200.0..200.0);
            let dn = rng.gen_range(-200.0..200.0);
            let th = rng.gen_range(0.0..360.0);
            let p = global_to_vehicle(de, dn, &pose(th));
            let norm_in = f64::hypot(de, dn);
            assert!((p.range - norm_in).abs() < 1e-9);
            assert!((p.range - f64::hypot(p.px, p.py)).abs() < 1e-9);
        }
    }

    #[test]
    fn vehicle_to_global_inverts_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..500 {
            let de = rng.gen_range(-200.0..200.0);
            let dn = rng.gen_range(-200.0..200.0);
            let th = rng.gen_range(0.0..360.0);
            let p = global_to_vehicle(de, dn, &pose(th));
            let (de2, dn2) = vehicle_to_global(p.px, p.py, th);
            assert!((de - de2).abs() < 1e-9);
            assert!((dn - dn2).abs() < 1e-9);
        }
    }

    #[test]
    fn wrap_degrees_half_open() {
        assert_eq!(wrap_degrees(180.0), 180.0);
        assert_eq!(wrap_degrees(-180.0), 180.0);
        assert_eq!(wrap_degrees(540.0), 180.0);
        assert!((wrap_degrees(190.0) - (-170.0)).abs() < 1e-12);
        assert!((wrap_degrees(-190.0) - 170.0).abs() < 1e-12);
    }

    fn host_at(lat: f64, lon: f64, heading: f64) -> HostState {
        HostState { t: 0.0, position: geo(lat, lon), heading_deg: heading, speed_mps: 10.0 }
    }

    fn bsm_at(lat: f64, lon: f64, heading: f64, t: f64) -> BsmRecord {
        BsmRecord {
            t,
            vehicle_id: 7,
            position: geo(lat, lon),
            heading_deg: heading,
            speed_mps: 10.0,
            length_m: 4.7,
            width_m: 1.8,
        }
    }

    #[test]
    fn identical_positions_give_zero_detection() {
        let host = host_at(40.0, -81.05, 33.0);
        let bsm = bsm_at(40.0, -81.05, 33.0, 0.0);
        let d = bsm_to_detection(&host, &bsm, 0.1).unwrap();
        assert!(d.px.abs() < 1e-9);
        assert!(d.py.abs() < 1e-9);
        assert_eq!(d.relative_heading_deg, 0.0);
        assert_eq!(d.relative_speed_mps, 0.0);
        assert_eq!(d.sensor, Sensor::V2v);
        assert_eq!(d.target_id, 7);
    }

    #[test]
    fn stale_host_pose_rejected() {
        let host = host_at(40.0, -81.05, 0.0);
        let bsm = bsm_at(40.0, -81.05, 0.0, 0.35);
        let err = bsm_to_detection(&host, &bsm, 0.1).unwrap_err();
        assert!(matches!(err, GeodesyError::StaleHostPose { host_t, bsm_t }
            if host_t == 0.0 && bsm_t == 0.35));
    }

    #[test]
    fn cross_zone_bsm_reprojected() {
        // Host just west of the 17/16 boundary (-84), remote just east of it.
        // The remote is re-projected into the host's zone instead of erroring.
        let host = host_at(40.0, -84.001, 90.0);
        let bsm = bsm_at(40.0, -83.999, 90.0, 0.0);
        let d = bsm_to_detection(&host, &bsm, 0.1).unwrap();
        // ~0.002 deg of longitude at lat 40 is ~170.8 m due east. At 3 deg
        // from the central meridian, grid north deviates from true north by
        // ~1.9 deg, so a small lateral component is expected.
        let range = d.px.hypot(d.py);
        assert!((range - 170.8).abs() < 0.5, "range {range}");
        assert!(d.px > 170.0, "px {}", d.px);
        assert!(d.py.abs() < 7.0, "py {}", d.py);
    }
}
