//! Pipeline tunables, loadable from a JSON file.
//!
//! Every knob the pipeline exposes lives here with a documented default, so
//! a bare run needs no config file at all and a config file only needs the
//! fields it wants to change.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::GeolocationParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Assumed palm height for the distance correction, meters.
    pub avg_palm_height_m: f64,
    /// Assumed height of non-palm trees, meters.
    pub avg_other_tree_height_m: f64,
    /// Same-class detections within this distance merge into one tree.
    pub merge_radius_m: f64,
    /// Detections scoring below this are dropped before geolocation.
    pub confidence_threshold: f64,
    /// Maximum distance at which a predicted tree can match a truth tree.
    pub match_radius_m: f64,
    /// Allowed gimbal pitch deviation from nadir before a frame is rejected.
    pub nadir_tolerance_deg: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            avg_palm_height_m: 8.0,
            avg_other_tree_height_m: 5.0,
            merge_radius_m: 4.0,
            confidence_threshold: 0.0,
            match_radius_m: 4.0,
            nadir_tolerance_deg: 5.0,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let config: PipelineConfig = serde_json::from_slice(bytes).map_err(|e| Error::Config(
            format!("line {} column {}: {e}", e.line(), e.column()),
        ))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.geolocation_params().validate()?;
        for (name, v) in [
            ("merge_radius_m", self.merge_radius_m),
            ("match_radius_m", self.match_radius_m),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if !self.nadir_tolerance_deg.is_finite() || self.nadir_tolerance_deg < 0.0 {
            return Err(Error::Config(format!(
                "nadir_tolerance_deg must be >= 0, got {}",
                self.nadir_tolerance_deg
            )));
        }
        Ok(())
    }

    pub fn geolocation_params(&self) -> GeolocationParams {
        GeolocationParams {
            palm_height_m: self.avg_palm_height_m,
            other_tree_height_m: self.avg_other_tree_height_m,
            confidence_threshold: self.confidence_threshold,
        }
    }
}
