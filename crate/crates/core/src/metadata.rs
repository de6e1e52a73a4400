//! Per-image geotag metadata: parsing, validation, yaw normalization.
//!
//! The canonical input is a manifest file (CSV with a header row, or a JSON
//! array), not binary EXIF. Extracting the manifest from real drone imagery is
//! a pre-processing step; the tag mapping for DJI aircraft is:
//!
//! | manifest field     | DJI source tag                               |
//! |--------------------|----------------------------------------------|
//! | `latitude`         | EXIF `GPSLatitude` (+ `GPSLatitudeRef`)      |
//! | `longitude`        | EXIF `GPSLongitude` (+ `GPSLongitudeRef`)    |
//! | `altitude_m`       | XMP `drone-dji:RelativeAltitude`             |
//! | `yaw_deg`          | XMP `drone-dji:FlightYawDegree` (gimbal yaw  |
//! |                    | `drone-dji:GimbalYawDegree` is an alternative|
//! |                    | source for gimbal-locked captures)           |
//! | `focal_px`         | EXIF `FocalLength` (mm) / sensor width (mm)  |
//! |                    | × `width_px`                                 |
//! | `width_px`         | EXIF `ExifImageWidth`                        |
//! | `height_px`        | EXIF `ExifImageHeight`                       |
//! | `gimbal_pitch_deg` | XMP `drone-dji:GimbalPitchDegree`            |
//!
//! Frames whose gimbal pitch strays more than a tolerance from nadir (−90°)
//! are rejected outright: the projection model assumes vertical imaging and
//! would silently corrupt positions on tilted frames.

use std::collections::HashSet;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Default tolerance around nadir (−90° gimbal pitch) before a frame is
/// rejected, degrees.
pub const DEFAULT_NADIR_TOLERANCE_DEG: f64 = 5.0;

/// Gimbal pitch of a straight-down camera, degrees.
pub const NADIR_PITCH_DEG: f64 = -90.0;

/// Pose and camera parameters of one drone photo.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageMeta {
    /// Opaque identifier, unique within a manifest.
    pub image_id: String,
    /// Drone position at capture, decimal degrees WGS84.
    pub latitude: f64,
    pub longitude: f64,
    /// Relative altitude above ground, meters.
    pub altitude_m: f64,
    /// Flight yaw, degrees clockwise from true north, in [−180, 180].
    pub yaw_deg: f64,
    /// Calibrated focal length, pixels.
    pub focal_px: f64,
    pub width_px: u32,
    pub height_px: u32,
    /// Gimbal pitch, degrees (−90 = nadir). Absent when the source had no
    /// gimbal telemetry; such frames are assumed nadir.
    pub gimbal_pitch_deg: Option<f64>,
}

/// Manifest file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifestFormat {
    Csv,
    Json,
}

/// Normalize an arbitrary finite yaw angle to (−180, 180].
///
/// The result is congruent to the input modulo 360. The boundary maps to
/// +180 (so −180 normalizes to +180); fixed convention for reproducibility.
pub fn normalize_yaw(raw_deg: f64) -> Result<f64> {
    if !raw_deg.is_finite() {
        return Err(Error::Validation {
            record: "yaw".into(),
            message: format!("yaw must be finite, got {raw_deg}"),
        });
    }
    let r = raw_deg.rem_euclid(360.0);
    Ok(if r > 180.0 { r - 360.0 } else { r })
}

/// Raw manifest row before validation. All fields optional so that missing
/// ones can be reported by name instead of as a generic deserialize failure.
#[derive(Debug, Deserialize)]
struct RawImageMeta {
    image_id: Option<String>,
    latitude: Option<f64>,
    longitude: Option<f64>,
    altitude_m: Option<f64>,
    yaw_deg: Option<f64>,
    focal_px: Option<f64>,
    width_px: Option<u32>,
    height_px: Option<u32>,
    #[serde(default)]
    gimbal_pitch_deg: Option<f64>,
}

fn require<T>(value: Option<T>, record: &str, field: &'static str) -> Result<T> {
    value.ok_or_else(|| Error::MissingField {
        record: record.to_string(),
        field,
    })
}

fn validate(raw: RawImageMeta, index: usize, nadir_tolerance_deg: f64) -> Result<ImageMeta> {
    let record_label = match &raw.image_id {
        Some(id) if !id.is_empty() => format!("{index} (image_id `{id}`)"),
        _ => index.to_string(),
    };
    let rec = record_label.as_str();

    let image_id = require(raw.image_id, rec, "image_id")?;
    if image_id.is_empty() {
        return Err(Error::Validation {
            record: rec.into(),
            message: "image_id must be non-empty".into(),
        });
    }
    let latitude = require(raw.latitude, rec, "latitude")?;
    let longitude = require(raw.longitude, rec, "longitude")?;
    let altitude_m = require(raw.altitude_m, rec, "altitude_m")?;
    let yaw_raw = require(raw.yaw_deg, rec, "yaw_deg")?;
    let focal_px = require(raw.focal_px, rec, "focal_px")?;
    let width_px = require(raw.width_px, rec, "width_px")?;
    let height_px = require(raw.height_px, rec, "height_px")?;

    let invalid = |message: String| Error::Validation {
        record: rec.into(),
        message,
    };

    if !latitude.is_finite() || !(-90.0..=90.0).contains(&latitude) {
        return Err(invalid(format!("latitude {latitude} outside [-90, 90]")));
    }
    if !longitude.is_finite() || !(-180.0..=180.0).contains(&longitude) {
        return Err(invalid(format!("longitude {longitude} outside [-180, 180]")));
    }
    if !altitude_m.is_finite() || altitude_m <= 0.0 {
        return Err(invalid("altitude_m must be > 0".into()));
    }
    if !focal_px.is_finite() || focal_px <= 0.0 {
        return Err(invalid("focal_px must be > 0".into()));
    }
    if width_px == 0 {
        return Err(invalid("width_px must be > 0".into()));
    }
    if height_px == 0 {
        return Err(invalid("height_px must be > 0".into()));
    }
    let yaw_deg = normalize_yaw(yaw_raw).map_err(|_| invalid(format!("yaw_deg {yaw_raw} is not finite")))?;
    if let Some(pitch) = raw.gimbal_pitch_deg {
        if !pitch.is_finite() {
            return Err(invalid("gimbal_pitch_deg must be finite".into()));
        }
        if (pitch - NADIR_PITCH_DEG).abs() > nadir_tolerance_deg {
            return Err(invalid(format!(
                "gimbal_pitch_deg {pitch} deviates more than {nadir_tolerance_deg}° from nadir (-90°)"
            )));
        }
    }

    Ok(ImageMeta {
        image_id,
        latitude,
        longitude,
        altitude_m,
        yaw_deg,
        focal_px,
        width_px,
        height_px,
        gimbal_pitch_deg: raw.gimbal_pitch_deg,
    })
}

/// Parse and validate a manifest with the default nadir tolerance.
pub fn parse_manifest(bytes: &[u8], format: ManifestFormat) -> Result<Vec<ImageMeta>> {
    parse_manifest_with(bytes, format, DEFAULT_NADIR_TOLERANCE_DEG)
}

/// Parse and validate a manifest.
///
/// Records come back in file order; every record satisfies the `ImageMeta`
/// invariants and image ids are unique across the manifest.
pub fn parse_manifest_with(
    bytes: &[u8],
    format: ManifestFormat,
    nadir_tolerance_deg: f64,
) -> Result<Vec<ImageMeta>> {
    let raws: Vec<RawImageMeta> = match format {
        ManifestFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .trim(csv::Trim::All)
                .from_reader(bytes);
            let mut rows = Vec::new();
            for (i, row) in reader.deserialize::<RawImageMeta>().enumerate() {
                rows.push(row.map_err(|e| csv_error(e, i))?);
            }
            rows
        }
        ManifestFormat::Json => {
            serde_json::from_slice(bytes).map_err(|e| Error::Parse {
                location: format!("line {} column {}", e.line(), e.column()),
                message: e.to_string(),
            })?
        }
    };

    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(raws.len());
    for (i, raw) in raws.into_iter().enumerate() {
        let meta = validate(raw, i, nadir_tolerance_deg)?;
        if !seen.insert(meta.image_id.clone()) {
            return Err(Error::DuplicateImageId(meta.image_id));
        }
        out.push(meta);
    }
    Ok(out)
}

fn csv_error(e: csv::Error, record_index: usize) -> Error {
    let location = e
        .position()
        .map(|p| format!("line {}", p.line()))
        .unwrap_or_else(|| format!("record {record_index}"));
    Error::Parse {
        location,
        message: e.to_string(),
    }
}
