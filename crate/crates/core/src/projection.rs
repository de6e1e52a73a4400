//! Pixel-to-ground projection for nadir imagery.
//!
//! Under a vertical camera, a pixel `p` pixels from the image center subtends
//! a ground distance of `p / F_c * H` where `F_c` is the focal length in
//! pixels and `H` the relative altitude: the image plane and the ground are
//! parallel, so the scale factor is uniform across the frame. The camera
//! frame axes follow the sensor: `right` along +x (image columns), `forward`
//! along −y (image rows grow downward, the top of the frame points the way
//! the aircraft flies). Flight yaw, measured clockwise from true north,
//! rotates that frame into east/north.
//!
//! Crown centers sit at the tree summit, not on the ground, so the raw
//! projection overshoots: the summit, the drone, and the summit's ground
//! image are similar triangles with ratio `(H − h) / H` for tree height `h`.
//! Shrinking the horizontal offset by that ratio recovers the stem position.

use crate::detections::{Detection, TreeClass};
use crate::error::{Error, Result};
use crate::geodesy::{geo_apply, EnuOffset, GeoPoint};
use crate::metadata::ImageMeta;

/// Horizontal offset in the camera frame, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraOffset {
    /// Along image +x: to the aircraft's right.
    pub right_m: f64,
    /// Along image −y: ahead of the aircraft.
    pub forward_m: f64,
}

/// Per-class assumed heights and filtering for geolocation.
#[derive(Debug, Clone, PartialEq)]
pub struct GeolocationParams {
    /// Assumed palm height, meters.
    pub palm_height_m: f64,
    /// Assumed height for other trees, meters.
    pub other_tree_height_m: f64,
    /// Detections scoring strictly below this are dropped.
    pub confidence_threshold: f64,
}

impl Default for GeolocationParams {
    fn default() -> Self {
        GeolocationParams {
            palm_height_m: 8.0,
            other_tree_height_m: 5.0,
            confidence_threshold: 0.0,
        }
    }
}

impl GeolocationParams {
    pub fn class_height_m(&self, class: TreeClass) -> f64 {
        match class {
            TreeClass::Palm => self.palm_height_m,
            TreeClass::OtherTree => self.other_tree_height_m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, h) in [
            ("palm_height_m", self.palm_height_m),
            ("other_tree_height_m", self.other_tree_height_m),
        ] {
            if !h.is_finite() || h < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {h}")));
            }
        }
        if !self.confidence_threshold.is_finite()
            || !(0.0..=1.0).contains(&self.confidence_threshold)
        {
            return Err(Error::Config(format!(
                "confidence_threshold must be in [0, 1], got {}",
                self.confidence_threshold
            )));
        }
        Ok(())
    }
}

/// A detection with the ground position it projects to.
#[derive(Debug, Clone, PartialEq)]
pub struct GeolocatedDetection {
    /// Index of the detection in the input file; stable identity across the
    /// pipeline even when low-confidence detections are filtered out.
    pub detection_index: usize,
    pub image_id: String,
    pub class: TreeClass,
    pub confidence: f64,
    pub position: GeoPoint,
}

/// Ground offset of a pixel from the point directly beneath the drone,
/// camera frame, assuming the imaged object lies on the ground plane.
pub fn pixel_to_offset(x: f64, y: f64, meta: &ImageMeta) -> CameraOffset {
    let x_c = meta.width_px as f64 / 2.0;
    let y_c = meta.height_px as f64 / 2.0;
    let scale = meta.altitude_m / meta.focal_px;
    CameraOffset {
        right_m: (x - x_c) * scale,
        forward_m: (y_c - y) * scale,
    }
}

/// Rotate a camera-frame offset into east/north by the flight yaw
/// (degrees clockwise from true north).
pub fn rotate_to_enu(offset: CameraOffset, yaw_deg: f64) -> EnuOffset {
    let (sin, cos) = yaw_deg.to_radians().sin_cos();
    EnuOffset {
        east_m: offset.right_m * cos + offset.forward_m * sin,
        north_m: -offset.right_m * sin + offset.forward_m * cos,
    }
}

/// Shrink a ground offset toward the drone to account for the imaged point
/// sitting `tree_height_m` above ground.
///
/// Errors when the tree is as tall as the flight altitude or taller; the
/// similar-triangle construction degenerates there.
pub fn height_correct(
    offset: EnuOffset,
    altitude_m: f64,
    tree_height_m: f64,
) -> Result<EnuOffset> {
    if tree_height_m < 0.0 || !tree_height_m.is_finite() {
        return Err(Error::Range(format!(
            "tree height must be finite and >= 0, got {tree_height_m}"
        )));
    }
    if tree_height_m >= altitude_m {
        return Err(Error::DegenerateGeometry(format!(
            "tree height {tree_height_m} m >= flight altitude {altitude_m} m"
        )));
    }
    let ratio = (altitude_m - tree_height_m) / altitude_m;
    Ok(EnuOffset {
        east_m: offset.east_m * ratio,
        north_m: offset.north_m * ratio,
    })
}

/// Project one detection's bounding-box center to a ground position.
pub fn geolocate(
    detection: &Detection,
    meta: &ImageMeta,
    params: &GeolocationParams,
) -> Result<GeoPoint> {
    let center = detection.bbox.center();
    let cam = pixel_to_offset(center.x, center.y, meta);
    let enu = rotate_to_enu(cam, meta.yaw_deg);
    let corrected = height_correct(enu, meta.altitude_m, params.class_height_m(detection.class))?;
    let origin = GeoPoint::new(meta.latitude, meta.longitude)?;
    geo_apply(origin, corrected)
}

/// Geolocate a detection list against its manifest.
///
/// Detections scoring below the confidence threshold are skipped; surviving
/// records keep their original indices. Detections referencing unknown
/// images are an error (run [`crate::detections::cross_validate`] first for
/// a friendlier batch report).
pub fn geolocate_all(
    detections: &[Detection],
    manifest: &[ImageMeta],
    params: &GeolocationParams,
) -> Result<Vec<GeolocatedDetection>> {
    params.validate()?;
    let by_id: std::collections::HashMap<&str, &ImageMeta> = manifest
        .iter()
        .map(|m| (m.image_id.as_str(), m))
        .collect();
    let mut out = Vec::new();
    for (index, det) in detections.iter().enumerate() {
        if det.confidence < params.confidence_threshold {
            continue;
        }
        let meta = by_id
            .get(det.image_id.as_str())
            .ok_or_else(|| Error::OrphanDetection {
                index,
                image_id: det.image_id.clone(),
            })?;
        let position = geolocate(det, meta, params)?;
        out.push(GeolocatedDetection {
            detection_index: index,
            image_id: det.image_id.clone(),
            class: det.class,
            confidence: det.confidence,
            position,
        });
    }
    Ok(out)
}
