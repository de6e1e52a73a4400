//! Canonical wire formats for every pipeline artifact.
//!
//! All writers are deterministic: fixed field order, `\n` line endings, a
//! trailing newline, and shortest-round-trip float formatting. Identical
//! in-memory values therefore serialize to identical bytes, and emit →
//! parse → emit is byte-stable, which the CLI relies on for reproducible
//! outputs and the tests rely on for golden comparisons.
//!
//! GeoJSON coordinates follow the standard `[longitude, latitude]` order.

use serde::{Deserialize, Serialize};

use crate::detections::{Detection, TreeClass};
use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::geodesy::GeoPoint;
use crate::inventory::{InventoryReport, TreeRecord};
use crate::metadata::ImageMeta;
use crate::projection::GeolocatedDetection;
use crate::simulator::{DetectionSource, GroundTruthTree};

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fn csv_to_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w).expect("serializing to an in-memory CSV buffer cannot fail");
    let bytes = w.into_inner().expect("flushing an in-memory CSV buffer cannot fail");
    String::from_utf8(bytes).expect("CSV output is UTF-8")
}

fn json_to_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value)
        .expect("serializing pipeline artifacts to JSON cannot fail");
    s.push('\n');
    s
}

fn parse_json<'a, T: Deserialize<'a>>(bytes: &'a [u8], what: &str) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|e| Error::Parse {
        location: format!("{what}: line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })
}

fn class_from_label(label: &str, record: usize) -> Result<TreeClass> {
    TreeClass::from_label(label).ok_or_else(|| Error::Validation {
        record: record.to_string(),
        message: format!("unknown class_label `{label}`"),
    })
}

/// Read a whole file, attaching the path to any failure.
pub fn read_file(path: &std::path::Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Write a whole file, attaching the path to any failure.
pub fn write_file(path: &std::path::Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ManifestRow<'a> {
    image_id: &'a str,
    latitude: f64,
    longitude: f64,
    altitude_m: f64,
    yaw_deg: f64,
    focal_px: f64,
    width_px: u32,
    height_px: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    gimbal_pitch_deg: Option<f64>,
}

#[derive(Serialize)]
struct ManifestCsvRow<'a> {
    image_id: &'a str,
    latitude: f64,
    longitude: f64,
    altitude_m: f64,
    yaw_deg: f64,
    focal_px: f64,
    width_px: u32,
    height_px: u32,
    gimbal_pitch_deg: Option<f64>,
}

fn manifest_row(m: &ImageMeta) -> ManifestRow<'_> {
    ManifestRow {
        image_id: &m.image_id,
        latitude: m.latitude,
        longitude: m.longitude,
        altitude_m: m.altitude_m,
        yaw_deg: m.yaw_deg,
        focal_px: m.focal_px,
        width_px: m.width_px,
        height_px: m.height_px,
        gimbal_pitch_deg: m.gimbal_pitch_deg,
    }
}

pub fn manifest_to_csv(manifest: &[ImageMeta]) -> String {
    csv_to_string(|w| {
        for m in manifest {
            w.serialize(ManifestCsvRow {
                image_id: &m.image_id,
                latitude: m.latitude,
                longitude: m.longitude,
                altitude_m: m.altitude_m,
                yaw_deg: m.yaw_deg,
                focal_px: m.focal_px,
                width_px: m.width_px,
                height_px: m.height_px,
                gimbal_pitch_deg: m.gimbal_pitch_deg,
            })?;
        }
        // Header-only output still needs the header row.
        if manifest.is_empty() {
            w.write_record([
                "image_id",
                "latitude",
                "longitude",
                "altitude_m",
                "yaw_deg",
                "focal_px",
                "width_px",
                "height_px",
                "gimbal_pitch_deg",
            ])?;
        }
        Ok(())
    })
}

pub fn manifest_to_json(manifest: &[ImageMeta]) -> String {
    let rows: Vec<ManifestRow<'_>> = manifest.iter().map(manifest_row).collect();
    json_to_string(&rows)
}

// ---------------------------------------------------------------------------
// Detections
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct DetectionRow<'a> {
    image_id: &'a str,
    class_label: &'static str,
    confidence: f64,
    bbox: [f64; 4],
}

pub fn detections_to_json(detections: &[Detection]) -> String {
    let rows: Vec<DetectionRow<'_>> = detections
        .iter()
        .map(|d| DetectionRow {
            image_id: &d.image_id,
            class_label: d.class.label(),
            confidence: d.confidence,
            bbox: [d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max],
        })
        .collect();
    json_to_string(&rows)
}

// ---------------------------------------------------------------------------
// GeoJSON scaffolding
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct FeatureCollection<P> {
    #[serde(rename = "type")]
    kind: String,
    features: Vec<Feature<P>>,
}

#[derive(Serialize, Deserialize)]
struct Feature<P> {
    #[serde(rename = "type")]
    kind: String,
    geometry: PointGeometry,
    properties: P,
}

#[derive(Serialize, Deserialize)]
struct PointGeometry {
    #[serde(rename = "type")]
    kind: String,
    /// `[longitude, latitude]`.
    coordinates: [f64; 2],
}

fn feature<P>(position: &GeoPoint, properties: P) -> Feature<P> {
    Feature {
        kind: "Feature".into(),
        geometry: PointGeometry {
            kind: "Point".into(),
            coordinates: [position.longitude, position.latitude],
        },
        properties,
    }
}

fn collection<P>(features: Vec<Feature<P>>) -> FeatureCollection<P> {
    FeatureCollection {
        kind: "FeatureCollection".into(),
        features,
    }
}

fn check_geojson<P>(fc: &FeatureCollection<P>) -> Result<()> {
    let bad = |message: String| Error::Validation {
        record: "GeoJSON".into(),
        message,
    };
    if fc.kind != "FeatureCollection" {
        return Err(bad(format!("expected FeatureCollection, got `{}`", fc.kind)));
    }
    for (i, f) in fc.features.iter().enumerate() {
        if f.kind != "Feature" {
            return Err(bad(format!("feature {i}: expected Feature, got `{}`", f.kind)));
        }
        if f.geometry.kind != "Point" {
            return Err(bad(format!(
                "feature {i}: expected Point geometry, got `{}`",
                f.geometry.kind
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Geolocated detections
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct GeolocatedProps {
    image_id: String,
    class_label: String,
    confidence: f64,
    detection_index: usize,
}

#[derive(Serialize, Deserialize)]
struct GeolocatedCsvRow {
    detection_index: usize,
    image_id: String,
    class_label: String,
    confidence: f64,
    latitude: f64,
    longitude: f64,
}

pub fn geolocated_to_geojson(located: &[GeolocatedDetection]) -> String {
    let features = located
        .iter()
        .map(|g| {
            feature(
                &g.position,
                GeolocatedProps {
                    image_id: g.image_id.clone(),
                    class_label: g.class.label().into(),
                    confidence: g.confidence,
                    detection_index: g.detection_index,
                },
            )
        })
        .collect();
    json_to_string(&collection(features))
}

pub fn geolocated_to_csv(located: &[GeolocatedDetection]) -> String {
    csv_to_string(|w| {
        if located.is_empty() {
            w.write_record([
                "detection_index",
                "image_id",
                "class_label",
                "confidence",
                "latitude",
                "longitude",
            ])?;
        }
        for g in located {
            w.serialize(GeolocatedCsvRow {
                detection_index: g.detection_index,
                image_id: g.image_id.clone(),
                class_label: g.class.label().into(),
                confidence: g.confidence,
                latitude: g.position.latitude,
                longitude: g.position.longitude,
            })?;
        }
        Ok(())
    })
}

pub fn parse_geolocated_geojson(bytes: &[u8]) -> Result<Vec<GeolocatedDetection>> {
    let fc: FeatureCollection<GeolocatedProps> = parse_json(bytes, "geolocated GeoJSON")?;
    check_geojson(&fc)?;
    fc.features
        .into_iter()
        .enumerate()
        .map(|(i, f)| {
            let class = class_from_label(&f.properties.class_label, i)?;
            let [lon, lat] = f.geometry.coordinates;
            let position = GeoPoint::new(lat, lon)?;
            if !f.properties.confidence.is_finite()
                || !(0.0..=1.0).contains(&f.properties.confidence)
            {
                return Err(Error::Validation {
                    record: i.to_string(),
                    message: format!("confidence {} outside [0, 1]", f.properties.confidence),
                });
            }
            Ok(GeolocatedDetection {
                detection_index: f.properties.detection_index,
                image_id: f.properties.image_id,
                class,
                confidence: f.properties.confidence,
                position,
            })
        })
        .collect()
}

pub fn parse_geolocated_csv(bytes: &[u8]) -> Result<Vec<GeolocatedDetection>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<GeolocatedCsvRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            location: format!("record {i}"),
            message: e.to_string(),
        })?;
        let class = class_from_label(&row.class_label, i)?;
        out.push(GeolocatedDetection {
            detection_index: row.detection_index,
            image_id: row.image_id,
            class,
            confidence: row.confidence,
            position: GeoPoint::new(row.latitude, row.longitude)?,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Inventory
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct InventoryProps {
    tree_id: u64,
    class_label: String,
    support: usize,
    mean_confidence: f64,
}

#[derive(Serialize, Deserialize)]
struct InventoryCsvRow {
    tree_id: u64,
    class_label: String,
    latitude: f64,
    longitude: f64,
    support: usize,
    mean_confidence: f64,
}

pub fn inventory_to_geojson(records: &[TreeRecord]) -> String {
    let features = records
        .iter()
        .map(|r| {
            feature(
                &r.position,
                InventoryProps {
                    tree_id: r.tree_id,
                    class_label: r.class.label().into(),
                    support: r.support,
                    mean_confidence: r.mean_confidence,
                },
            )
        })
        .collect();
    json_to_string(&collection(features))
}

pub fn inventory_to_csv(records: &[TreeRecord]) -> String {
    csv_to_string(|w| {
        if records.is_empty() {
            w.write_record([
                "tree_id",
                "class_label",
                "latitude",
                "longitude",
                "support",
                "mean_confidence",
            ])?;
        }
        for r in records {
            w.serialize(InventoryCsvRow {
                tree_id: r.tree_id,
                class_label: r.class.label().into(),
                latitude: r.position.latitude,
                longitude: r.position.longitude,
                support: r.support,
                mean_confidence: r.mean_confidence,
            })?;
        }
        Ok(())
    })
}

fn inventory_record(
    i: usize,
    tree_id: u64,
    class_label: &str,
    position: GeoPoint,
    support: usize,
    mean_confidence: f64,
) -> Result<TreeRecord> {
    let class = class_from_label(class_label, i)?;
    let invalid = |message: String| Error::Validation {
        record: i.to_string(),
        message,
    };
    if support == 0 {
        return Err(invalid("support must be >= 1".into()));
    }
    if !mean_confidence.is_finite() || !(0.0..=1.0).contains(&mean_confidence) {
        return Err(invalid(format!("mean_confidence {mean_confidence} outside [0, 1]")));
    }
    Ok(TreeRecord {
        tree_id,
        class,
        position,
        support,
        mean_confidence,
        // Wire formats carry only the support count, not the member list.
        member_indices: Vec::new(),
    })
}

pub fn parse_inventory_geojson(bytes: &[u8]) -> Result<Vec<TreeRecord>> {
    let fc: FeatureCollection<InventoryProps> = parse_json(bytes, "inventory GeoJSON")?;
    check_geojson(&fc)?;
    fc.features
        .into_iter()
        .enumerate()
        .map(|(i, f)| {
            let [lon, lat] = f.geometry.coordinates;
            inventory_record(
                i,
                f.properties.tree_id,
                &f.properties.class_label,
                GeoPoint::new(lat, lon)?,
                f.properties.support,
                f.properties.mean_confidence,
            )
        })
        .collect()
}

pub fn parse_inventory_csv(bytes: &[u8]) -> Result<Vec<TreeRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<InventoryCsvRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            location: format!("record {i}"),
            message: e.to_string(),
        })?;
        out.push(inventory_record(
            i,
            row.tree_id,
            &row.class_label,
            GeoPoint::new(row.latitude, row.longitude)?,
            row.support,
            row.mean_confidence,
        )?);
    }
    Ok(out)
}

pub fn report_to_json(report: &InventoryReport) -> String {
    json_to_string(report)
}

pub fn parse_report_json(bytes: &[u8]) -> Result<InventoryReport> {
    parse_json(bytes, "inventory report")
}

// ---------------------------------------------------------------------------
// Ground truth
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TruthCsvRow {
    tree_id: u64,
    class_label: String,
    latitude: f64,
    longitude: f64,
    height_m: f64,
}

pub fn truth_to_csv(truth: &[GroundTruthTree]) -> String {
    csv_to_string(|w| {
        if truth.is_empty() {
            w.write_record(["tree_id", "class_label", "latitude", "longitude", "height_m"])?;
        }
        for t in truth {
            w.serialize(TruthCsvRow {
                tree_id: t.tree_id,
                class_label: t.class.label().into(),
                latitude: t.position.latitude,
                longitude: t.position.longitude,
                height_m: t.height_m,
            })?;
        }
        Ok(())
    })
}

pub fn parse_truth_csv(bytes: &[u8]) -> Result<Vec<GroundTruthTree>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<TruthCsvRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            location: format!("record {i}"),
            message: e.to_string(),
        })?;
        let class = class_from_label(&row.class_label, i)?;
        if !row.height_m.is_finite() || row.height_m < 0.0 {
            return Err(Error::Validation {
                record: i.to_string(),
                message: format!("height_m must be finite and >= 0, got {}", row.height_m),
            });
        }
        out.push(GroundTruthTree {
            tree_id: row.tree_id,
            class,
            position: GeoPoint::new(row.latitude, row.longitude)?,
            height_m: row.height_m,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Provenance
// ---------------------------------------------------------------------------

/// Literal used in the provenance CSV for detections without a source tree.
pub const FALSE_POSITIVE_LITERAL: &str = "FALSE_POSITIVE";

pub fn provenance_to_csv(provenance: &[DetectionSource]) -> String {
    csv_to_string(|w| {
        w.write_record(["detection_index", "source"])?;
        for (i, src) in provenance.iter().enumerate() {
            let source = match src {
                DetectionSource::Tree(id) => id.to_string(),
                DetectionSource::FalsePositive => FALSE_POSITIVE_LITERAL.to_string(),
            };
            w.write_record([i.to_string(), source])?;
        }
        Ok(())
    })
}

pub fn parse_provenance_csv(bytes: &[u8]) -> Result<Vec<(usize, DetectionSource)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            location: "header".into(),
            message: e.to_string(),
        })?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["detection_index", "source"] {
        return Err(Error::Parse {
            location: "header".into(),
            message: format!("expected `detection_index,source`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            location: format!("record {i}"),
            message: e.to_string(),
        })?;
        let index: usize = row
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse {
                location: format!("record {i}"),
                message: "detection_index must be a non-negative integer".into(),
            })?;
        let source = match row.get(1) {
            Some(FALSE_POSITIVE_LITERAL) => DetectionSource::FalsePositive,
            Some(s) => DetectionSource::Tree(s.parse().map_err(|_| Error::Parse {
                location: format!("record {i}"),
                message: format!("source must be a tree id or {FALSE_POSITIVE_LITERAL}, got `{s}`"),
            })?),
            None => {
                return Err(Error::Parse {
                    location: format!("record {i}"),
                    message: "missing source column".into(),
                })
            }
        };
        out.push((index, source));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Eval report
// ---------------------------------------------------------------------------

pub fn eval_report_to_json(report: &EvalReport) -> String {
    json_to_string(report)
}

pub fn parse_eval_report_json(bytes: &[u8]) -> Result<EvalReport> {
    parse_json(bytes, "eval report")
}
