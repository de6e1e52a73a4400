//! Synthetic orchards and drone sorties: the pipeline's verification oracle.
//!
//! The simulator lays out a jittered tree grid, plans a lawnmower flight
//! over it, projects every tree summit into every frame using the exact
//! inverse of the projection module's equations, and emits the manifest,
//! detections, ground truth and provenance files the pipeline consumes.
//! With all noise zero, running the detections back through geolocation
//! recovers every tree base to well under a micrometer; with noise enabled,
//! the error statistics are predictable from the configured sigmas.
//!
//! Projection is evaluated in each frame's own tangent plane
//! (`geo_offset` from the true drone position), not in one orchard-wide
//! plane. The pipeline applies offsets at the drone geotag, so only the
//! per-drone frame makes simulation and geolocation exact mutual inverses;
//! a shared plane would leak meridian-convergence error (~10⁻⁴ m at
//! mid-latitudes over 100 m baselines) into the zero-noise oracle.
//!
//! # Noise model
//!
//! Continuous channels are Gaussian, misses and false positives Bernoulli.
//! The three metadata channels are sortie-wide biases, drawn once per
//! flight and applied to every frame's recorded values: GPS as one
//! Gaussian per horizontal axis, yaw and altitude as one Gaussian each.
//! Over the minutes of a single flight these sensors are dominated by
//! slowly varying systematic error, not white noise: GNSS by atmospheric
//! and ephemeris bias common to all frames, magnetometer heading by
//! calibration bias, and barometric altitude by the takeoff reference
//! offset. Fully independent per-frame draws would overstate the relative
//! error between overlapping frames by an order of magnitude and be
//! unrepresentative of real flight logs. Pixel noise, the detector's box
//! localization jitter, is genuinely independent and is drawn per
//! detection.
//!
//! Every noise channel draws from its own RNG stream, so toggling one
//! channel's parameters never perturbs the draws of another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::detections::{BBox, Detection, TreeClass};
use crate::error::{Error, Result};
use crate::geodesy::{geo_apply, geo_offset, EnuOffset, GeoPoint};
use crate::io;
use crate::metadata::{normalize_yaw, ImageMeta};

// ---------------------------------------------------------------------------
// Scenario schema
// ---------------------------------------------------------------------------

/// Tree height distribution: uniform on [mean − spread, mean + spread].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreeHeightSpec {
    pub mean_m: f64,
    pub spread_m: f64,
}

impl Default for TreeHeightSpec {
    fn default() -> Self {
        TreeHeightSpec {
            mean_m: 8.0,
            spread_m: 0.0,
        }
    }
}

/// Flight plan parameters. Lines are flown in a lawnmower pattern: parallel
/// strips spaced for the requested side overlap, frames triggered along each
/// strip for the requested forward overlap, heading alternating by 180°
/// between adjacent lines when `alternate_lines` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlightSpec {
    pub altitude_m: f64,
    pub forward_overlap_frac: f64,
    pub side_overlap_frac: f64,
    /// Heading of even-numbered lines, degrees clockwise from north.
    pub base_yaw_deg: f64,
    pub alternate_lines: bool,
}

impl Default for FlightSpec {
    fn default() -> Self {
        FlightSpec {
            altitude_m: 60.0,
            forward_overlap_frac: 0.75,
            side_overlap_frac: 0.6,
            base_yaw_deg: 0.0,
            alternate_lines: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraSpec {
    pub focal_px: f64,
    pub width_px: u32,
    pub height_px: u32,
    /// Edge length of the square box drawn around each projected summit.
    pub bbox_size_px: f64,
}

impl Default for CameraSpec {
    fn default() -> Self {
        CameraSpec {
            focal_px: 3600.0,
            width_px: 4000,
            height_px: 3000,
            bbox_size_px: 80.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    /// Sortie-wide GNSS bias sigma, meters per horizontal axis.
    pub gps_sigma_m: f64,
    /// Sortie-wide heading bias sigma, degrees.
    pub yaw_sigma_deg: f64,
    /// Sortie-wide altimeter bias sigma, meters.
    pub alt_sigma_m: f64,
    /// Per-detection box-center sigma, pixels per axis.
    pub pixel_sigma_px: f64,
    /// Probability that an in-frame tree goes undetected.
    pub miss_rate: f64,
    /// Probability that a frame gains one spurious detection.
    pub false_positive_rate: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            gps_sigma_m: 0.0,
            yaw_sigma_deg: 0.0,
            alt_sigma_m: 0.0,
            pixel_sigma_px: 0.0,
            miss_rate: 0.0,
            false_positive_rate: 0.0,
        }
    }
}

/// Complete description of a synthetic survey. Deserializes from JSON with
/// every field optional (defaults below describe a 10×10 palm orchard under
/// a 60 m Mavic-class flight).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimScenario {
    pub seed: u64,
    pub rows: u32,
    pub cols: u32,
    /// Orchard grid pitch, meters.
    pub spacing_m: f64,
    /// Uniform positional jitter amplitude as a fraction of the pitch:
    /// each tree moves up to `jitter_frac * spacing_m / 2` per axis.
    pub jitter_frac: f64,
    pub tree_height_m: TreeHeightSpec,
    pub origin: GeoPoint,
    pub flight: FlightSpec,
    pub camera: CameraSpec,
    pub noise: NoiseSpec,
}

impl Default for SimScenario {
    fn default() -> Self {
        SimScenario {
            seed: 0,
            rows: 10,
            cols: 10,
            spacing_m: 8.0,
            jitter_frac: 0.3,
            tree_height_m: TreeHeightSpec::default(),
            origin: GeoPoint {
                latitude: 24.1,
                longitude: 47.3,
            },
            flight: FlightSpec::default(),
            camera: CameraSpec::default(),
            noise: NoiseSpec::default(),
        }
    }
}

impl SimScenario {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let scenario: SimScenario = serde_json::from_slice(bytes).map_err(|e| Error::Parse {
            location: format!("scenario: line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scenario(m));
        if !(self.spacing_m.is_finite() && self.spacing_m > 0.0) {
            return bad(format!("spacing_m must be > 0, got {}", self.spacing_m));
        }
        if !(0.0..=1.0).contains(&self.jitter_frac) {
            return bad(format!("jitter_frac must be in [0, 1], got {}", self.jitter_frac));
        }
        let th = &self.tree_height_m;
        if !(th.mean_m.is_finite() && th.spread_m.is_finite())
            || th.spread_m < 0.0
            || th.mean_m - th.spread_m < 0.0
        {
            return bad(format!(
                "tree heights must stay >= 0 (mean {}, spread {})",
                th.mean_m, th.spread_m
            ));
        }
        let f = &self.flight;
        if !(f.altitude_m.is_finite() && f.altitude_m > 0.0) {
            return bad(format!("altitude_m must be > 0, got {}", f.altitude_m));
        }
        if f.altitude_m <= th.mean_m + th.spread_m {
            return bad(format!(
                "altitude {} m does not clear the tallest tree ({} m)",
                f.altitude_m,
                th.mean_m + th.spread_m
            ));
        }
        for (name, ov) in [
            ("forward_overlap_frac", f.forward_overlap_frac),
            ("side_overlap_frac", f.side_overlap_frac),
        ] {
            if !ov.is_finite() || !(0.0..1.0).contains(&ov) {
                return bad(format!("{name} must be in [0, 1), got {ov}"));
            }
        }
        if !f.base_yaw_deg.is_finite() {
            return bad("base_yaw_deg must be finite".into());
        }
        let c = &self.camera;
        if !(c.focal_px.is_finite() && c.focal_px > 0.0) {
            return bad(format!("focal_px must be > 0, got {}", c.focal_px));
        }
        if c.width_px == 0 || c.height_px == 0 {
            return bad("camera dimensions must be > 0".into());
        }
        if !(c.bbox_size_px.is_finite() && c.bbox_size_px > 0.0)
            || c.bbox_size_px >= c.width_px.min(c.height_px) as f64
        {
            return bad(format!(
                "bbox_size_px must be in (0, min(width, height)), got {}",
                c.bbox_size_px
            ));
        }
        let n = &self.noise;
        for (name, sigma) in [
            ("gps_sigma_m", n.gps_sigma_m),
            ("yaw_sigma_deg", n.yaw_sigma_deg),
            ("alt_sigma_m", n.alt_sigma_m),
            ("pixel_sigma_px", n.pixel_sigma_px),
        ] {
            if !sigma.is_finite() || sigma < 0.0 {
                return bad(format!("{name} must be >= 0, got {sigma}"));
            }
        }
        for (name, rate) in [
            ("miss_rate", n.miss_rate),
            ("false_positive_rate", n.false_positive_rate),
        ] {
            if !rate.is_finite() || !(0.0..=1.0).contains(&rate) {
                return bad(format!("{name} must be in [0, 1], got {rate}"));
            }
        }
        GeoPoint::new(self.origin.latitude, self.origin.longitude)?;
        if u64::from(self.rows) * u64::from(self.cols) > 1_000_000 {
            return bad(format!("orchard of {}x{} trees is too large", self.rows, self.cols));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Result types
// ---------------------------------------------------------------------------

/// Where a simulated detection came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionSource {
    /// A real tree, by ground-truth id.
    Tree(u64),
    FalsePositive,
}

/// One tree of the synthetic orchard.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthTree {
    /// 1-based, row-major over the grid.
    pub tree_id: u64,
    pub class: TreeClass,
    /// Base (stem) position.
    pub position: GeoPoint,
    pub height_m: f64,
}

/// Everything a sortie produces. `provenance[i]` is the source of
/// `detections[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub manifest: Vec<ImageMeta>,
    pub detections: Vec<Detection>,
    pub ground_truth: Vec<GroundTruthTree>,
    pub provenance: Vec<DetectionSource>,
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

// One RNG stream per noise channel (stream 0 is left unused).
const STREAM_JITTER: u64 = 1;
const STREAM_HEIGHT: u64 = 2;
const STREAM_GPS: u64 = 3;
const STREAM_YAW: u64 = 4;
const STREAM_ALT: u64 = 5;
const STREAM_PIXEL: u64 = 6;
const STREAM_MISS: u64 = 7;
const STREAM_FP: u64 = 8;

fn channel(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw on [-1, 1] that always consumes exactly one value, so
/// parameter changes never shift the stream.
fn symmetric_unit(rng: &mut ChaCha8Rng) -> f64 {
    2.0 * rng.random::<f64>() - 1.0
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    z * sigma
}

struct SimTree {
    id: u64,
    position: GeoPoint,
    height_m: f64,
}

/// Confidence assigned to detections of real trees.
const REAL_CONFIDENCE: f64 = 0.9;
/// Confidence assigned to injected false positives.
const FALSE_POSITIVE_CONFIDENCE: f64 = 0.5;

/// Run a scenario. Deterministic: the same scenario (seed included) always
/// yields an identical `SimResult`.
pub fn generate(scenario: &SimScenario) -> Result<SimResult> {
    scenario.validate()?;
    let origin = GeoPoint::new(scenario.origin.latitude, scenario.origin.longitude)?;
    let cam = &scenario.camera;
    let flight = &scenario.flight;
    let noise = &scenario.noise;
    let altitude = flight.altitude_m;

    // --- Orchard ---------------------------------------------------------
    let mut jitter_rng = channel(scenario.seed, STREAM_JITTER);
    let mut height_rng = channel(scenario.seed, STREAM_HEIGHT);
    let jitter_amp = scenario.jitter_frac * scenario.spacing_m / 2.0;
    let (rows, cols) = (scenario.rows as i64, scenario.cols as i64);
    let mut trees = Vec::with_capacity((rows * cols) as usize);
    for r in 0..rows {
        for c in 0..cols {
            let east = (c as f64 - (cols - 1) as f64 / 2.0) * scenario.spacing_m
                + jitter_amp * symmetric_unit(&mut jitter_rng);
            let north = (r as f64 - (rows - 1) as f64 / 2.0) * scenario.spacing_m
                + jitter_amp * symmetric_unit(&mut jitter_rng);
            let height_m = scenario.tree_height_m.mean_m
                + scenario.tree_height_m.spread_m * symmetric_unit(&mut height_rng);
            trees.push(SimTree {
                id: (r * cols + c) as u64 + 1,
                position: geo_apply(origin, EnuOffset { east_m: east, north_m: north })?,
                height_m,
            });
        }
    }

    // --- Flight plan -----------------------------------------------------
    // Footprint on the ground and the spacings that realize the overlaps.
    let footprint_w = altitude * cam.width_px as f64 / cam.focal_px;
    let footprint_h = altitude * cam.height_px as f64 / cam.focal_px;
    let side_step = footprint_w * (1.0 - flight.side_overlap_frac);
    let forward_step = footprint_h * (1.0 - flight.forward_overlap_frac);

    // The lattice is planned in a survey frame (u across-track, v
    // along-track) rotated by the base yaw; covering the orchard's
    // half-diagonal keeps every tree inside regardless of that rotation,
    // and one extra step of margin on each side guarantees multi-frame
    // coverage of border trees.
    let half_e = ((cols - 1).max(0) as f64 * scenario.spacing_m
        + scenario.jitter_frac * scenario.spacing_m)
        / 2.0;
    let half_n = ((rows - 1).max(0) as f64 * scenario.spacing_m
        + scenario.jitter_frac * scenario.spacing_m)
        / 2.0;
    let half_diag = (half_e * half_e + half_n * half_n).sqrt();
    let u_half = half_diag + side_step;
    let v_half = half_diag + forward_step;
    let n_lines = (2.0 * u_half / side_step).ceil() as i64 + 1;
    let n_triggers = (2.0 * v_half / forward_step).ceil() as i64 + 1;
    if n_lines * n_triggers > 100_000 {
        return Err(Error::Scenario(format!(
            "flight plan of {} frames is too large",
            n_lines * n_triggers
        )));
    }
    let (sin0, cos0) = flight.base_yaw_deg.to_radians().sin_cos();
    // Along-track unit vector (heading of even lines) and its right-hand
    // across-track companion, in east/north.
    let v_hat = (sin0, cos0);
    let u_hat = (cos0, -sin0);

    // --- Frames ----------------------------------------------------------
    let mut gps_rng = channel(scenario.seed, STREAM_GPS);
    let mut yaw_rng = channel(scenario.seed, STREAM_YAW);
    let mut alt_rng = channel(scenario.seed, STREAM_ALT);
    let mut pixel_rng = channel(scenario.seed, STREAM_PIXEL);
    let mut miss_rng = channel(scenario.seed, STREAM_MISS);
    let mut fp_rng = channel(scenario.seed, STREAM_FP);

    // Sortie-wide sensor biases (see module docs).
    let gps_bias = EnuOffset {
        east_m: gaussian(&mut gps_rng, noise.gps_sigma_m),
        north_m: gaussian(&mut gps_rng, noise.gps_sigma_m),
    };
    let yaw_bias = gaussian(&mut yaw_rng, noise.yaw_sigma_deg);
    let alt_bias = gaussian(&mut alt_rng, noise.alt_sigma_m);

    let (w_px, h_px) = (cam.width_px as f64, cam.height_px as f64);
    let half_box = cam.bbox_size_px / 2.0;
    let mut manifest = Vec::with_capacity((n_lines * n_triggers) as usize);
    let mut detections = Vec::new();
    let mut provenance = Vec::new();
    let mut frame_index = 0u64;

    for line in 0..n_lines {
        let u = (line as f64 - (n_lines - 1) as f64 / 2.0) * side_step;
        let reversed = line % 2 == 1;
        let true_yaw = if reversed && flight.alternate_lines {
            flight.base_yaw_deg + 180.0
        } else {
            flight.base_yaw_deg
        };
        let (sin_yaw, cos_yaw) = true_yaw.to_radians().sin_cos();
        let triggers: Box<dyn Iterator<Item = i64>> = if reversed {
            Box::new((0..n_triggers).rev())
        } else {
            Box::new(0..n_triggers)
        };
        for trigger in triggers {
            let v = (trigger as f64 - (n_triggers - 1) as f64 / 2.0) * forward_step;
            let drone_true = geo_apply(
                origin,
                EnuOffset {
                    east_m: u_hat.0 * u + v_hat.0 * v,
                    north_m: u_hat.1 * u + v_hat.1 * v,
                },
            )?;
            let image_id = format!("img_{frame_index:04}");

            // Recorded metadata: true pose corrupted by the sortie biases.
            let recorded_pos = geo_apply(drone_true, gps_bias)?;
            let recorded_yaw = normalize_yaw(true_yaw + yaw_bias)?;
            let recorded_alt = altitude + alt_bias;
            manifest.push(ImageMeta {
                image_id: image_id.clone(),
                latitude: recorded_pos.latitude,
                longitude: recorded_pos.longitude,
                altitude_m: recorded_alt,
                yaw_deg: recorded_yaw,
                focal_px: cam.focal_px,
                width_px: cam.width_px,
                height_px: cam.height_px,
                gimbal_pitch_deg: Some(-90.0),
            });

            // Real trees, in tree-id order. Pixel and miss draws happen for
            // every candidate so the streams stay aligned across parameter
            // changes.
            for tree in &trees {
                let noise_x = gaussian(&mut pixel_rng, noise.pixel_sigma_px);
                let noise_y = gaussian(&mut pixel_rng, noise.pixel_sigma_px);
                let missed = miss_rng.random::<f64>() < noise.miss_rate;

                // Summit apparent offset in this frame's own tangent plane:
                // the geolocation chain inverts exactly this construction.
                let base = geo_offset(drone_true, tree.position)?;
                let magnify = altitude / (altitude - tree.height_m);
                let east = base.east_m * magnify;
                let north = base.north_m * magnify;
                let right = east * cos_yaw - north * sin_yaw;
                let forward = east * sin_yaw + north * cos_yaw;
                let x = w_px / 2.0 + right * cam.focal_px / altitude + noise_x;
                let y = h_px / 2.0 - forward * cam.focal_px / altitude + noise_y;
                let bbox = BBox {
                    x_min: x - half_box,
                    y_min: y - half_box,
                    x_max: x + half_box,
                    y_max: y + half_box,
                };
                // Cull, never clamp, boxes that do not fit the frame.
                if bbox.x_min < 0.0 || bbox.y_min < 0.0 || bbox.x_max > w_px || bbox.y_max > h_px
                {
                    continue;
                }
                if missed {
                    continue;
                }
                detections.push(Detection {
                    image_id: image_id.clone(),
                    class: TreeClass::Palm,
                    confidence: REAL_CONFIDENCE,
                    bbox,
                });
                provenance.push(DetectionSource::Tree(tree.id));
            }

            // At most one spurious detection per frame.
            if fp_rng.random::<f64>() < noise.false_positive_rate {
                let x = fp_rng.random_range(half_box..w_px - half_box);
                let y = fp_rng.random_range(half_box..h_px - half_box);
                let class = if fp_rng.random::<f64>() < 0.5 {
                    TreeClass::Palm
                } else {
                    TreeClass::OtherTree
                };
                detections.push(Detection {
                    image_id: image_id.clone(),
                    class,
                    confidence: FALSE_POSITIVE_CONFIDENCE,
                    bbox: BBox {
                        x_min: x - half_box,
                        y_min: y - half_box,
                        x_max: x + half_box,
                        y_max: y + half_box,
                    },
                });
                provenance.push(DetectionSource::FalsePositive);
            }
            frame_index += 1;
        }
    }

    let ground_truth = trees
        .into_iter()
        .map(|t| GroundTruthTree {
            tree_id: t.id,
            class: TreeClass::Palm,
            position: t.position,
            height_m: t.height_m,
        })
        .collect();

    Ok(SimResult {
        manifest,
        detections,
        ground_truth,
        provenance,
    })
}

/// File names written by [`emit`].
pub const MANIFEST_FILE: &str = "manifest.csv";
pub const DETECTIONS_FILE: &str = "detections.json";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";
pub const PROVENANCE_FILE: &str = "provenance.csv";

/// Write a sortie's artifacts into `dir` in the pipeline's canonical
/// formats, creating the directory if needed.
pub fn emit(result: &SimResult, dir: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    io::write_file(&dir.join(MANIFEST_FILE), &io::manifest_to_csv(&result.manifest))?;
    io::write_file(
        &dir.join(DETECTIONS_FILE),
        &io::detections_to_json(&result.detections),
    )?;
    io::write_file(
        &dir.join(GROUND_TRUTH_FILE),
        &io::truth_to_csv(&result.ground_truth),
    )?;
    io::write_file(
        &dir.join(PROVENANCE_FILE),
        &io::provenance_to_csv(&result.provenance),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::{geolocate_all, GeolocationParams};
    use std::collections::{HashMap, HashSet};

    fn zero_noise_scenario(seed: u64) -> SimScenario {
        SimScenario {
            seed,
            ..SimScenario::default()
        }
    }

    /// Params matching the simulated orchard (all palms at the scenario's
    /// mean height).
    fn matched_params(s: &SimScenario) -> GeolocationParams {
        GeolocationParams {
            palm_height_m: s.tree_height_m.mean_m,
            other_tree_height_m: 5.0,
            confidence_threshold: 0.0,
        }
    }

    fn max_geolocation_error_m(s: &SimScenario) -> f64 {
        let result = generate(s).unwrap();
        let located =
            geolocate_all(&result.detections, &result.manifest, &matched_params(s)).unwrap();
        let truth: HashMap<u64, GeoPoint> = result
            .ground_truth
            .iter()
            .map(|t| (t.tree_id, t.position))
            .collect();
        let mut worst: f64 = 0.0;
        assert!(!located.is_empty());
        for g in &located {
            let DetectionSource::Tree(id) = result.provenance[g.detection_index] else {
                continue;
            };
            let err = geo_offset(g.position, truth[&id]).unwrap().norm();
            worst = worst.max(err);
        }
        worst
    }

    #[test]
    fn zero_noise_inverse_recovers_every_tree() {
        let worst = max_geolocation_error_m(&zero_noise_scenario(7));
        assert!(worst < 1e-6, "worst zero-noise error {worst} m");
    }

    // The per-frame tangent construction must stay exact away from the
    // equator and with rotated flight lines, where a shared-plane
    // simulator would show meridian-convergence error around 1e-4 m.
    #[test]
    fn zero_noise_inverse_survives_latitude_and_heading() {
        let mut s = zero_noise_scenario(11);
        s.origin = GeoPoint {
            latitude: 51.5,
            longitude: -0.12,
        };
        s.flight.base_yaw_deg = 37.0;
        s.tree_height_m = TreeHeightSpec {
            mean_m: 9.5,
            spread_m: 0.0,
        };
        let worst = max_geolocation_error_m(&s);
        assert!(worst < 1e-6, "worst error {worst} m");
    }

    #[test]
    fn same_seed_identical_results() {
        let s = SimScenario {
            noise: NoiseSpec {
                gps_sigma_m: 1.0,
                yaw_sigma_deg: 1.0,
                alt_sigma_m: 0.5,
                pixel_sigma_px: 5.0,
                miss_rate: 0.1,
                false_positive_rate: 0.05,
            },
            ..zero_noise_scenario(3)
        };
        assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
        let different = generate(&SimScenario { seed: 4, ..s.clone() }).unwrap();
        assert_ne!(generate(&s).unwrap().detections, different.detections);
    }

    #[test]
    fn tree_at_nadir_projects_to_frame_center() {
        // Single tree, no jitter: the grid degenerates to the origin, and
        // the central frame of the lawnmower sits exactly above it.
        let s = SimScenario {
            rows: 1,
            cols: 1,
            jitter_frac: 0.0,
            ..zero_noise_scenario(0)
        };
        let result = generate(&s).unwrap();
        assert_eq!(result.ground_truth.len(), 1);
        // Find the frame whose drone position equals the origin.
        let central = result
            .manifest
            .iter()
            .find(|m| {
                (m.latitude - s.origin.latitude).abs() < 1e-12
                    && (m.longitude - s.origin.longitude).abs() < 1e-12
            })
            .expect("lawnmower lattice includes a frame over the orchard center");
        let det = result
            .detections
            .iter()
            .find(|d| d.image_id == central.image_id)
            .expect("tree detected in its nadir frame");
        let c = det.bbox.center();
        assert!((c.x - 2000.0).abs() < 1e-9, "center x {}", c.x);
        assert!((c.y - 1500.0).abs() < 1e-9, "center y {}", c.y);
    }

    #[test]
    fn every_tree_seen_from_at_least_two_frames() {
        let result = generate(&zero_noise_scenario(5)).unwrap();
        let mut frames_per_tree: HashMap<u64, HashSet<&str>> = HashMap::new();
        for (det, src) in result.detections.iter().zip(&result.provenance) {
            if let DetectionSource::Tree(id) = src {
                frames_per_tree
                    .entry(*id)
                    .or_default()
                    .insert(det.image_id.as_str());
            }
        }
        assert_eq!(frames_per_tree.len(), 100, "every tree detected at least once");
        for (id, frames) in &frames_per_tree {
            assert!(frames.len() >= 2, "tree {id} seen in only {} frame(s)", frames.len());
        }
    }

    #[test]
    fn detections_always_inside_image_bounds() {
        let s = SimScenario {
            noise: NoiseSpec {
                pixel_sigma_px: 40.0,
                ..NoiseSpec::default()
            },
            ..zero_noise_scenario(9)
        };
        let result = generate(&s).unwrap();
        assert!(!result.detections.is_empty());
        for d in &result.detections {
            assert!(d.bbox.x_min >= 0.0 && d.bbox.y_min >= 0.0);
            assert!(d.bbox.x_max <= 4000.0 && d.bbox.y_max <= 3000.0);
        }
        // And they pass the pipeline's own cross-validation.
        crate::detections::cross_validate(&result.detections, &result.manifest).unwrap();
    }

    #[test]
    fn more_overlap_never_loses_support() {
        let base = zero_noise_scenario(13);
        let denser = SimScenario {
            flight: FlightSpec {
                // Halved spacing on both axes.
                forward_overlap_frac: 0.875,
                side_overlap_frac: 0.8,
                ..base.flight
            },
            ..base.clone()
        };
        let support = |s: &SimScenario| -> HashMap<u64, usize> {
            let result = generate(s).unwrap();
            let mut counts = HashMap::new();
            for src in &result.provenance {
                if let DetectionSource::Tree(id) = src {
                    *counts.entry(*id).or_insert(0) += 1;
                }
            }
            counts
        };
        let sparse = support(&base);
        let dense = support(&denser);
        for (id, &n) in &sparse {
            assert!(
                dense.get(id).copied().unwrap_or(0) >= n,
                "tree {id}: support fell from {n} to {:?}",
                dense.get(id)
            );
        }
    }

    #[test]
    fn noise_channels_are_independent_streams() {
        let base = SimScenario {
            noise: NoiseSpec {
                yaw_sigma_deg: 1.0,
                alt_sigma_m: 0.5,
                ..NoiseSpec::default()
            },
            ..zero_noise_scenario(17)
        };
        let reference = generate(&base).unwrap();

        // GPS noise touches only the recorded geotags.
        let with_gps = generate(&SimScenario {
            noise: NoiseSpec {
                gps_sigma_m: 2.0,
                ..base.noise
            },
            ..base.clone()
        })
        .unwrap();
        assert_eq!(reference.detections, with_gps.detections);
        assert_eq!(reference.ground_truth, with_gps.ground_truth);
        for (a, b) in reference.manifest.iter().zip(&with_gps.manifest) {
            assert_eq!(a.yaw_deg, b.yaw_deg);
            assert_eq!(a.altitude_m, b.altitude_m);
            assert_ne!((a.latitude, a.longitude), (b.latitude, b.longitude));
        }

        // Pixel noise touches only the boxes; the yaw/alt draws and the
        // ground truth stay bit-identical.
        let with_pixel = generate(&SimScenario {
            noise: NoiseSpec {
                pixel_sigma_px: 0.01,
                ..base.noise
            },
            ..base.clone()
        })
        .unwrap();
        assert_eq!(reference.manifest, with_pixel.manifest);
        assert_eq!(reference.ground_truth, with_pixel.ground_truth);
        assert_eq!(reference.provenance, with_pixel.provenance);
        assert_ne!(reference.detections, with_pixel.detections);

        // Misses only remove detections; survivors keep identical boxes.
        let with_miss = generate(&SimScenario {
            noise: NoiseSpec {
                miss_rate: 0.3,
                ..base.noise
            },
            ..base.clone()
        })
        .unwrap();
        assert_eq!(reference.manifest, with_miss.manifest);
        let surviving: HashSet<String> = with_miss
            .detections
            .iter()
            .map(|d| format!("{}|{:?}", d.image_id, d.bbox))
            .collect();
        let all: HashSet<String> = reference
            .detections
            .iter()
            .map(|d| format!("{}|{:?}", d.image_id, d.bbox))
            .collect();
        assert!(surviving.is_subset(&all));
        assert!(surviving.len() < all.len());
    }

    #[test]
    fn false_positives_marked_in_provenance() {
        let s = SimScenario {
            noise: NoiseSpec {
                false_positive_rate: 0.5,
                ..NoiseSpec::default()
            },
            ..zero_noise_scenario(19)
        };
        let result = generate(&s).unwrap();
        let fp_count = result
            .provenance
            .iter()
            .filter(|p| **p == DetectionSource::FalsePositive)
            .count();
        let frames = result.manifest.len();
        // Bernoulli(0.5) per frame: expect roughly half, and never more
        // than one per frame.
        assert!(fp_count > frames / 5 && fp_count < frames, "{fp_count} of {frames}");
        assert_eq!(result.provenance.len(), result.detections.len());
        // Real trees always resolve to an existing ground-truth id.
        let ids: HashSet<u64> = result.ground_truth.iter().map(|t| t.tree_id).collect();
        for p in &result.provenance {
            if let DetectionSource::Tree(id) = p {
                assert!(ids.contains(id));
            }
        }
    }

    #[test]
    fn empty_orchard_is_valid() {
        let s = SimScenario {
            rows: 0,
            cols: 0,
            ..zero_noise_scenario(0)
        };
        let result = generate(&s).unwrap();
        assert!(result.ground_truth.is_empty());
        assert!(result.detections.is_empty());
        assert!(!result.manifest.is_empty(), "frames still fly over bare ground");
    }

    #[test]
    fn invalid_scenarios_rejected() {
        let tall_trees = SimScenario {
            tree_height_m: TreeHeightSpec {
                mean_m: 60.0,
                spread_m: 0.0,
            },
            ..SimScenario::default()
        };
        assert!(matches!(generate(&tall_trees), Err(Error::Scenario(_))));

        let bad_overlap = SimScenario {
            flight: FlightSpec {
                forward_overlap_frac: 1.0,
                ..FlightSpec::default()
            },
            ..SimScenario::default()
        };
        assert!(bad_overlap.validate().is_err());

        let bad_rate = SimScenario {
            noise: NoiseSpec {
                miss_rate: 1.5,
                ..NoiseSpec::default()
            },
            ..SimScenario::default()
        };
        assert!(bad_rate.validate().is_err());
    }

    #[test]
    fn scenario_json_round_trip_and_defaults() {
        let full = SimScenario::default();
        let text = full.to_json();
        let parsed = SimScenario::from_json(text.as_bytes()).unwrap();
        assert_eq!(parsed, full);

        // An empty object is the default scenario.
        let empty = SimScenario::from_json(b"{}").unwrap();
        assert_eq!(empty, SimScenario::default());

        // Partial override keeps the remaining defaults.
        let partial = SimScenario::from_json(br#"{"seed": 5, "noise": {"gps_sigma_m": 1.0}}"#).unwrap();
        assert_eq!(partial.seed, 5);
        assert_eq!(partial.noise.gps_sigma_m, 1.0);
        assert_eq!(partial.noise.miss_rate, 0.0);
        assert_eq!(partial.rows, 10);

        // Typos are rejected rather than silently ignored.
        assert!(SimScenario::from_json(br#"{"seeds": 5}"#).is_err());
    }

    #[test]
    fn emit_round_trips_through_the_parsers() {
        let dir = tempfile::tempdir().unwrap();
        let s = SimScenario {
            noise: NoiseSpec {
                gps_sigma_m: 1.0,
                false_positive_rate: 0.2,
                ..NoiseSpec::default()
            },
            ..zero_noise_scenario(23)
        };
        let result = generate(&s).unwrap();
        emit(&result, dir.path()).unwrap();

        let manifest = crate::metadata::parse_manifest(
            &io::read_file(&dir.path().join(MANIFEST_FILE)).unwrap(),
            crate::metadata::ManifestFormat::Csv,
        )
        .unwrap();
        assert_eq!(manifest, result.manifest);

        let detections = crate::detections::parse_detections(
            &io::read_file(&dir.path().join(DETECTIONS_FILE)).unwrap(),
        )
        .unwrap();
        assert_eq!(detections, result.detections);

        let truth =
            io::parse_truth_csv(&io::read_file(&dir.path().join(GROUND_TRUTH_FILE)).unwrap())
                .unwrap();
        assert_eq!(truth, result.ground_truth);

        let provenance =
            io::parse_provenance_csv(&io::read_file(&dir.path().join(PROVENANCE_FILE)).unwrap())
                .unwrap();
        let expected: Vec<(usize, DetectionSource)> =
            result.provenance.iter().copied().enumerate().collect();
        assert_eq!(provenance, expected);
    }
}
