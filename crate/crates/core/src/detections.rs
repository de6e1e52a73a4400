//! Per-image detector output: bounding boxes, labels, confidences.
//!
//! Detections arrive as JSON, either one array or JSON-lines with one object
//! per line. The detector itself (a CNN in production, the simulator in
//! tests) is outside this crate; confidences are treated as opaque scores in
//! [0, 1] and never re-interpreted, only thresholded and averaged.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::metadata::ImageMeta;

/// Object classes the pipeline understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TreeClass {
    Palm,
    OtherTree,
}

impl TreeClass {
    /// Canonical wire label.
    pub fn label(self) -> &'static str {
        match self {
            TreeClass::Palm => "palm",
            TreeClass::OtherTree => "other_tree",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "palm" => Some(TreeClass::Palm),
            "other_tree" => Some(TreeClass::OtherTree),
            _ => None,
        }
    }
}

impl std::fmt::Display for TreeClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// A pixel position; x grows right, y grows down, origin at the top-left
/// corner of the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPoint {
    pub x: f64,
    pub y: f64,
}

/// Axis-aligned bounding box in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    /// Center of the box. For tree crowns imaged near-nadir this is the best
    /// single-pixel estimate of the stem apex.
    pub fn center(&self) -> PixelPoint {
        PixelPoint {
            x: (self.x_min + self.x_max) / 2.0,
            y: (self.y_min + self.y_max) / 2.0,
        }
    }
}

/// One validated detection.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// Id of the image the box was found in; must match a manifest record.
    pub image_id: String,
    pub class: TreeClass,
    /// Detector score in [0, 1], treated as opaque.
    pub confidence: f64,
    pub bbox: BBox,
}

#[derive(Debug, Deserialize)]
struct RawDetection {
    image_id: Option<String>,
    class_label: Option<String>,
    confidence: Option<f64>,
    bbox: Option<[f64; 4]>,
}

fn require<T>(value: Option<T>, record: &str, field: &'static str) -> Result<T> {
    value.ok_or_else(|| Error::MissingField {
        record: record.to_string(),
        field,
    })
}

fn validate(raw: RawDetection, index: usize) -> Result<Detection> {
    let rec = index.to_string();
    let image_id = require(raw.image_id, &rec, "image_id")?;
    let class_label = require(raw.class_label, &rec, "class_label")?;
    let confidence = require(raw.confidence, &rec, "confidence")?;
    let bbox = require(raw.bbox, &rec, "bbox")?;

    let invalid = |message: String| Error::Validation {
        record: rec.clone(),
        message,
    };

    if image_id.is_empty() {
        return Err(invalid("image_id must be non-empty".into()));
    }
    let class = TreeClass::from_label(&class_label)
        .ok_or_else(|| invalid(format!("unknown class_label `{class_label}`")))?;
    if !confidence.is_finite() || !(0.0..=1.0).contains(&confidence) {
        return Err(invalid(format!("confidence {confidence} outside [0, 1]")));
    }
    let [x_min, y_min, x_max, y_max] = bbox;
    if !(x_min.is_finite() && y_min.is_finite() && x_max.is_finite() && y_max.is_finite()) {
        return Err(invalid("bbox coordinates must be finite".into()));
    }
    if x_min >= x_max || y_min >= y_max {
        return Err(invalid(format!(
            "bbox [{x_min}, {y_min}, {x_max}, {y_max}] has non-positive extent"
        )));
    }
    if x_min < 0.0 || y_min < 0.0 {
        return Err(invalid(format!(
            "bbox [{x_min}, {y_min}, {x_max}, {y_max}] extends past the image origin"
        )));
    }

    Ok(Detection {
        image_id,
        class,
        confidence,
        bbox: BBox {
            x_min,
            y_min,
            x_max,
            y_max,
        },
    })
}

/// Parse detections from a JSON array, or from JSON-lines when the document
/// does not start with `[`.
///
/// Index order in the returned vec matches document order and is the
/// detection's stable identity for the rest of the pipeline.
pub fn parse_detections(bytes: &[u8]) -> Result<Vec<Detection>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        location: format!("byte {}", e.valid_up_to()),
        message: "detections file is not valid UTF-8".into(),
    })?;
    let raws: Vec<RawDetection> = if text.trim_start().starts_with('[') {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?
    } else {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let raw = serde_json::from_str(line).map_err(|e| Error::Parse {
                location: format!("line {} column {}", lineno + 1, e.column()),
                message: e.to_string(),
            })?;
            rows.push(raw);
        }
        rows
    };

    raws.into_iter()
        .enumerate()
        .map(|(i, raw)| validate(raw, i))
        .collect()
}

/// Center of a detection's bounding box.
pub fn bbox_center(d: &Detection) -> PixelPoint {
    d.bbox.center()
}

/// Check every detection against the manifest: the referenced image must
/// exist and the box must lie within that image's pixel bounds.
pub fn cross_validate(detections: &[Detection], manifest: &[ImageMeta]) -> Result<()> {
    let by_id: std::collections::HashMap<&str, &ImageMeta> = manifest
        .iter()
        .map(|m| (m.image_id.as_str(), m))
        .collect();
    for (index, det) in detections.iter().enumerate() {
        let Some(meta) = by_id.get(det.image_id.as_str()) else {
            return Err(Error::OrphanDetection {
                index,
                image_id: det.image_id.clone(),
            });
        };
        let (w, h) = (meta.width_px as f64, meta.height_px as f64);
        if det.bbox.x_max > w || det.bbox.y_max > h {
            return Err(Error::Validation {
                record: index.to_string(),
                message: format!(
                    "bbox exceeds {}x{} bounds of image `{}`",
                    meta.width_px, meta.height_px, det.image_id
                ),
            });
        }
    }
    Ok(())
}
