//! WGS84 geographic coordinates and local east-north tangent-plane offsets.
//!
//! The conversion uses a small-offset curvilinear model: degrees are scaled to
//! meters by the WGS84 meridional and prime-vertical radii of curvature
//! evaluated at the origin latitude. For the sub-kilometer extents of a single
//! drone survey the model error is far below GPS noise (≪ 1 cm at 1 km), and
//! unlike a full ECEF→ENU chain every value is directly checkable against
//! published ellipsoid constants.
//!
//! Conventions:
//! - Degrees at the API boundary, radians internally.
//! - Curvature is always evaluated at the *origin* point of a conversion.
//! - Offsets beyond [`MAX_OFFSET_M`] (10 km) per axis are rejected rather than
//!   silently degraded.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// WGS84 semi-major axis, meters.
pub const WGS84_A: f64 = 6_378_137.0;
/// WGS84 flattening.
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;
/// WGS84 first eccentricity squared, e² = f(2 − f).
pub const WGS84_E2: f64 = WGS84_F * (2.0 - WGS84_F);

/// Largest per-axis offset the small-offset model accepts, meters.
pub const MAX_OFFSET_M: f64 = 10_000.0;

/// A WGS84 geographic position in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub latitude: f64,
    pub longitude: f64,
}

impl GeoPoint {
    /// Validated constructor: latitude in [−90, 90], longitude in [−180, 180],
    /// both finite.
    pub fn new(latitude: f64, longitude: f64) -> Result<Self> {
        if !latitude.is_finite() || !(-90.0..=90.0).contains(&latitude) {
            return Err(Error::Range(format!(
                "latitude {latitude} outside [-90, 90]"
            )));
        }
        if !longitude.is_finite() || !(-180.0..=180.0).contains(&longitude) {
            return Err(Error::Range(format!(
                "longitude {longitude} outside [-180, 180]"
            )));
        }
        Ok(GeoPoint {
            latitude,
            longitude,
        })
    }
}

/// A local tangent-plane offset in meters, east and north of some origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnuOffset {
    pub east_m: f64,
    pub north_m: f64,
}

impl EnuOffset {
    pub fn new(east_m: f64, north_m: f64) -> Self {
        EnuOffset { east_m, north_m }
    }

    /// Euclidean norm of the planar offset.
    pub fn norm(&self) -> f64 {
        self.east_m.hypot(self.north_m)
    }
}

/// Meridional radius of curvature M(φ), meters. φ in radians.
///
/// M(φ) = a(1 − e²) / (1 − e² sin²φ)^(3/2)
pub fn meridional_radius(lat_rad: f64) -> f64 {
    let s2 = lat_rad.sin() * lat_rad.sin();
    WGS84_A * (1.0 - WGS84_E2) / (1.0 - WGS84_E2 * s2).powf(1.5)
}

/// Prime-vertical radius of curvature N(φ), meters. φ in radians.
///
/// N(φ) = a / sqrt(1 − e² sin²φ)
pub fn prime_vertical_radius(lat_rad: f64) -> f64 {
    let s2 = lat_rad.sin() * lat_rad.sin();
    WGS84_A / (1.0 - WGS84_E2 * s2).sqrt()
}

/// East-north offset in meters from `origin` to `target`.
///
/// east  = Δλ · N(φ₀) · cos φ₀
/// north = Δφ · M(φ₀)
///
/// Curvature is evaluated at the origin latitude. Offsets beyond 10 km per
/// axis are rejected: the small-offset model is not meant for them.
pub fn geo_offset(origin: GeoPoint, target: GeoPoint) -> Result<EnuOffset> {
    let o = GeoPoint::new(origin.latitude, origin.longitude)?;
    let t = GeoPoint::new(target.latitude, target.longitude)?;

    let lat0 = o.latitude.to_radians();
    let east_m = (t.longitude - o.longitude).to_radians() * prime_vertical_radius(lat0) * lat0.cos();
    let north_m = (t.latitude - o.latitude).to_radians() * meridional_radius(lat0);

    if east_m.abs() > MAX_OFFSET_M || north_m.abs() > MAX_OFFSET_M {
        return Err(Error::Range(format!(
            "offset ({east_m:.1} m, {north_m:.1} m) exceeds {MAX_OFFSET_M} m per axis"
        )));
    }
    Ok(EnuOffset { east_m, north_m })
}

/// Apply an east-north offset in meters to `origin`. Exact local inverse of
/// [`geo_offset`] for the same origin.
pub fn geo_apply(origin: GeoPoint, offset: EnuOffset) -> Result<GeoPoint> {
    let o = GeoPoint::new(origin.latitude, origin.longitude)?;
    if !offset.east_m.is_finite() || !offset.north_m.is_finite() {
        return Err(Error::Range("offset components must be finite".into()));
    }
    if offset.east_m.abs() > MAX_OFFSET_M || offset.north_m.abs() > MAX_OFFSET_M {
        return Err(Error::Range(format!(
            "offset ({:.1} m, {:.1} m) exceeds {MAX_OFFSET_M} m per axis",
            offset.east_m, offset.north_m
        )));
    }

    let lat0 = o.latitude.to_radians();
    let dlat = (offset.north_m / meridional_radius(lat0)).to_degrees();
    let dlon = (offset.east_m / (prime_vertical_radius(lat0) * lat0.cos())).to_degrees();

    let latitude = o.latitude + dlat;
    if !(-90.0..=90.0).contains(&latitude) {
        return Err(Error::Range(format!(
            "resulting latitude {latitude} outside [-90, 90]"
        )));
    }
    let mut longitude = o.longitude + dlon;
    // Wrap the antimeridian so results stay in [-180, 180].
    if longitude > 180.0 {
        longitude -= 360.0;
    } else if longitude < -180.0 {
        longitude += 360.0;
    }
    Ok(GeoPoint {
        latitude,
        longitude,
    })
}
