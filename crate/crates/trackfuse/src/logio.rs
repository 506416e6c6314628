//! Sensor log file formats: one UTF-8 CSV per sensor stream on a common
//! clock, plus the ground-truth map as JSON.
//!
//! - `camera.csv`: t_s, target_id, px_m, py_m, rel_heading_deg,
//!   rel_speed_mps, length_m, width_m
//! - `v2v.csv`: t_s, vehicle_id, lat_deg, lon_deg, heading_deg, speed_mps,
//!   length_m, width_m
//! - `host.csv`: t_s, lat_deg, lon_deg, heading_deg, speed_mps
//! - `truth.json`: serialized ground-truth map (written by the simulator;
//!   optional on ingest)

use std::path::{Path, PathBuf};

use crate::geodesy::GeoPoint;
use crate::metrics::GroundTruthMap;
use crate::types::{BsmRecord, HostState, Sensor, SensorDetection, SensorLog};

pub const CAMERA_FILE: &str = "camera.csv";
pub const V2V_FILE: &str = "v2v.csv";
pub const HOST_FILE: &str = "host.csv";
pub const TRUTH_FILE: &str = "truth.json";

/// Errors from reading or writing log files.
#[derive(Debug)]
pub enum LogIoError {
    Io { path: PathBuf, source: std::io::Error },
    /// Header is missing required columns.
    Header { path: PathBuf, missing: Vec<String> },
    /// A data row failed to parse or validate; 1-based row index counted
    /// over data rows.
    Row { path: PathBuf, row: usize, column: String, message: String },
    /// Per-file timestamps must be non-decreasing.
    Order { path: PathBuf, row: usize, t: f64, prev: f64 },
    Truth { path: PathBuf, message: String },
}

impl std::fmt::Display for LogIoError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LogIoError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            LogIoError::Header { path, missing } => {
                write!(f, "{}: header missing columns {missing:?}", path.display())
            }
            LogIoError::Row { path, row, column, message } => {
                write!(f, "{}: row {row}, column {column}: {message}", path.display())
            }
            LogIoError::Order { path, row, t, prev } => write!(
                f,
                "{}: row {row}: timestamp {t} precedes previous {prev}",
                path.display()
            ),
            LogIoError::Truth { path, message } => {
                write!(f, "{}: {message}", path.display())
            }
        }
    }
}

impl std::error::Error for LogIoError {}

struct ColumnMap {
    indices: Vec<usize>,
}

impl ColumnMap {
    fn resolve(
        path: &Path,
        headers: &csv::StringRecord,
        required: &[&str],
    ) -> Result<Self, LogIoError> {
        let mut indices = Vec::with_capacity(required.len());
        let mut missing = Vec::new();
        for name in required {
            match headers.iter().position(|h| h.trim() == *name) {
                Some(i) => indices.push(i),
                None => missing.push(name.to_string()),
            }
        }
        if !missing.is_empty() {
            return Err(LogIoError::Header { path: path.to_path_buf(), missing });
        }
        Ok(Self { indices })
    }

    fn field<'r>(
        &self,
        path: &Path,
        record: &'r csv::StringRecord,
        row: usize,
        col: usize,
        name: &str,
    ) -> Result<&'r str, LogIoError> {
        record.get(self.indices[col]).ok_or_else(|| LogIoError::Row {
            path: path.to_path_buf(),
            row,
            column: name.to_string(),
            message: "missing field".to_string(),
        })
    }
}

fn parse_f64(path: &Path, row: usize, column: &str, raw: &str) -> Result<f64, LogIoError> {
    raw.trim().parse::<f64>().map_err(|e| LogIoError::Row {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        message: format!("'{raw}' is not a number: {e}"),
    })
}

fn parse_u32(path: &Path, row: usize, column: &str, raw: &str) -> Result<u32, LogIoError> {
    raw.trim().parse::<u32>().map_err(|e| LogIoError::Row {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        message: format!("'{raw}' is not an id: {e}"),
    })
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>, LogIoError> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => LogIoError::Io { path: path.to_path_buf(), source },
            other => LogIoError::Io {
                path: path.to_path_buf(),
                source: std::io::Error::other(format!("{other:?}")),
            },
        })
}

fn geo_point(
    path: &Path,
    row: usize,
    lat: f64,
    lon: f64,
) -> Result<GeoPoint, LogIoError> {
    GeoPoint::new(lat, lon).map_err(|e| {
        let column = match e {
            crate::geodesy::GeodesyError::OutOfRange { field, .. } => match field {
                "lat" => "lat_deg",
                "lon" => "lon_deg",
                other => other,
            },
            _ => "lat_deg/lon_deg",
        };
        LogIoError::Row {
            path: path.to_path_buf(),
            row,
            column: column.to_string(),
            message: e.to_string(),
        }
    })
}

fn read_camera(path: &Path) -> Result<Vec<SensorDetection>, LogIoError> {
    let mut reader = open_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| LogIoError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e.to_string()),
        })?
        .clone();
    let cols = ColumnMap::resolve(
        path,
        &headers,
        &[
            "t_s",
            "target_id",
            "px_m",
            "py_m",
            "rel_heading_deg",
            "rel_speed_mps",
            "length_m",
            "width_m",
        ],
    )?;

    let mut out = Vec::new();
    let mut prev_t = f64::NEG_INFINITY;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| LogIoError::Row {
            path: path.to_path_buf(),
            row,
            column: "-".to_string(),
            message: e.to_string(),
        })?;
        let get = |col: usize, name: &str| cols.field(path, &record, row, col, name);
        let t = parse_f64(path, row, "t_s", get(0, "t_s")?)?;
        if t < prev_t {
            return Err(LogIoError::Order { path: path.to_path_buf(), row, t, prev: prev_t });
        }
        prev_t = t;
        out.push(SensorDetection {
            sensor: Sensor::Camera,
            target_id: parse_u32(path, row, "target_id", get(1, "target_id")?)?,
            t,
            px: parse_f64(path, row, "px_m", get(2, "px_m")?)?,
            py: parse_f64(path, row, "py_m", get(3, "py_m")?)?,
            relative_heading_deg: parse_f64(
                path,
                row,
                "rel_heading_deg",
                get(4, "rel_heading_deg")?,
            )?,
            relative_speed_mps: parse_f64(path, row, "rel_speed_mps", get(5, "rel_speed_mps")?)?,
            length_m: parse_f64(path, row, "length_m", get(6, "length_m")?)?,
            width_m: parse_f64(path, row, "width_m", get(7, "width_m")?)?,
        });
    }
    Ok(out)
}

fn read_v2v(path: &Path) -> Result<Vec<BsmRecord>, LogIoError> {
    let mut reader = open_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| LogIoError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e.to_string()),
        })?
        .clone();
    let cols = ColumnMap::resolve(
        path,
        &headers,
        &[
            "t_s",
            "vehicle_id",
            "lat_deg",
            "lon_deg",
            "heading_deg",
            "speed_mps",
            "length_m",
            "width_m",
        ],
    )?;

    let mut out = Vec::new();
    let mut prev_t = f64::NEG_INFINITY;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| LogIoError::Row {
            path: path.to_path_buf(),
            row,
            column: "-".to_string(),
            message: e.to_string(),
        })?;
        let get = |col: usize, name: &str| cols.field(path, &record, row, col, name);
        let t = parse_f64(path, row, "t_s", get(0, "t_s")?)?;
        if t < prev_t {
            return Err(LogIoError::Order { path: path.to_path_buf(), row, t, prev: prev_t });
        }
        prev_t = t;
        let lat = parse_f64(path, row, "lat_deg", get(2, "lat_deg")?)?;
        let lon = parse_f64(path, row, "lon_deg", get(3, "lon_deg")?)?;
        out.push(BsmRecord {
            t,
            vehicle_id: parse_u32(path, row, "vehicle_id", get(1, "vehicle_id")?)?,
            position: geo_point(path, row, lat, lon)?,
            heading_deg: parse_f64(path, row, "heading_deg", get(4, "heading_deg")?)?,
            speed_mps: parse_f64(path, row, "speed_mps", get(5, "speed_mps")?)?,
            length_m: parse_f64(path, row, "length_m", get(6, "length_m")?)?,
            width_m: parse_f64(path, row, "width_m", get(7, "width_m")?)?,
        });
    }
    Ok(out)
}

fn read_host(path: &Path) -> Result<Vec<HostState>, LogIoError> {
    let mut reader = open_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| LogIoError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e.to_string()),
        })?
        .clone();
    let cols = ColumnMap::resolve(
        path,
        &headers,
        &["t_s", "lat_deg", "lon_deg", "heading_deg", "speed_mps"],
    )?;

    let mut out = Vec::new();
    let mut prev_t = f64::NEG_INFINITY;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| LogIoError::Row {
            path: path.to_path_buf(),
            row,
            column: "-".to_string(),
            message: e.to_string(),
        })?;
        let get = |col: usize, name: &str| cols.field(path, &record, row, col, name);
        let t = parse_f64(path, row, "t_s", get(0, "t_s")?)?;
        if t < prev_t {
            return Err(LogIoError::Order { path: path.to_path_buf(), row, t, prev: prev_t });
        }
        prev_t = t;
        let lat = parse_f64(path, row, "lat_deg", get(1, "lat_deg")?)?;
        let lon = parse_f64(path, row, "lon_deg", get(2, "lon_deg")?)?;
        out.push(HostState {
            t,
            position: geo_point(path, row, lat, lon)?,
            heading_deg: parse_f64(path, row, "heading_deg", get(3, "heading_deg")?)?,
            speed_mps: parse_f64(path, row, "speed_mps", get(4, "speed_mps")?)?,
        });
    }
    Ok(out)
}

/// Reads a sensor log directory (camera.csv, v2v.csv, host.csv).
pub fn ingest_log(dir: &Path) -> Result<SensorLog, LogIoError> {
    Ok(SensorLog {
        camera: read_camera(&dir.join(CAMERA_FILE))?,
        bsm: read_v2v(&dir.join(V2V_FILE))?,
        host: read_host(&dir.join(HOST_FILE))?,
        camera_provenance: Vec::new(),
    })
}

/// Writes a sensor log directory, creating it if needed.
pub fn write_log(dir: &Path, log: &SensorLog) -> Result<(), LogIoError> {
    std::fs::create_dir_all(dir)
        .map_err(|source| LogIoError::Io { path: dir.to_path_buf(), source })?;
    let io_err = |path: &Path| {
        let p = path.to_path_buf();
        move |e: std::io::Error| LogIoError::Io { path: p.clone(), source: e }
    };

    let path = dir.join(CAMERA_FILE);
    let mut text = String::from(
        "t_s,target_id,px_m,py_m,rel_heading_deg,rel_speed_mps,length_m,width_m\n",
    );
    for d in &log.camera {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            d.t,
            d.target_id,
            d.px,
            d.py,
            d.relative_heading_deg,
            d.relative_speed_mps,
            d.length_m,
            d.width_m
        ));
    }
    std::fs::write(&path, text).map_err(io_err(&path))?;

    let path = dir.join(V2V_FILE);
    let mut text =
        String::from("t_s,vehicle_id,lat_deg,lon_deg,heading_deg,speed_mps,length_m,width_m\n");
    for b in &log.bsm {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            b.t,
            b.vehicle_id,
            b.position.lat(),
            b.position.lon(),
            b.heading_deg,
            b.speed_mps,
            b.length_m,
            b.width_m
        ));
    }
    std::fs::write(&path, text).map_err(io_err(&path))?;

    let path = dir.join(HOST_FILE);
    let mut text = String::from("t_s,lat_deg,lon_deg,heading_deg,speed_mps\n");
    for h in &log.host {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            h.t,
            h.position.lat(),
            h.position.lon(),
            h.heading_deg,
            h.speed_mps
        ));
    }
    std::fs::write(&path, text).map_err(io_err(&path))?;

    Ok(())
}

pub fn write_truth(dir: &Path, truth: &GroundTruthMap) -> Result<(), LogIoError> {
    let path = dir.join(TRUTH_FILE);
    let text = serde_json::to_string(truth)
        .map_err(|e| LogIoError::Truth { path: path.clone(), message: e.to_string() })?;
    std::fs::write(&path, text).map_err(|source| LogIoError::Io { path, source })
}

/// Reads truth.json if present; `Ok(None)` when the file does not exist.
pub fn read_truth(dir: &Path) -> Result<Option<GroundTruthMap>, LogIoError> {
    let path = dir.join(TRUTH_FILE);
    match std::fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| LogIoError::Truth { path, message: e.to_string() }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(source) => Err(LogIoError::Io { path, source }),
    }
}
