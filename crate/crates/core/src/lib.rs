//! Tree inventory from geotagged nadir drone imagery.
//!
//! Converts per-image object detections (bounding boxes with class labels)
//! plus drone pose metadata into a deduplicated GPS inventory of individual
//! trees. The pipeline is purely geometric: pixel offsets from the image
//! center are scaled by altitude over focal length, rotated from the camera
//! frame into east/north by flight yaw, shrunk toward the drone to account
//! for tree height, and applied to the drone's geotag. Detections of the same
//! physical tree from overlapping frames are then merged by proximity
//! clustering, yielding one record per tree.
//!
//! A built-in flight simulator generates synthetic sorties with known ground
//! truth; it exercises the exact inverse of the projection model, so the full
//! pipeline can be verified end to end to numerical precision in the
//! noise-free case and statistically under sensor noise.

pub mod config;
pub mod detections;
pub mod error;
pub mod eval;
pub mod geodesy;
pub mod inventory;
pub mod io;
pub mod metadata;
pub mod projection;
pub mod simulator;

pub use error::{Error, Result};
pub use geodesy::{geo_apply, geo_offset, EnuOffset, GeoPoint};
pub use metadata::{normalize_yaw, parse_manifest, ImageMeta, ManifestFormat};
