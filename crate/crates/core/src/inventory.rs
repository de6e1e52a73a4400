//! Deduplication of multi-frame detections into unique tree records.
//!
//! Overlapping flight lines photograph every tree several times, so the
//! geolocated detection list contains each physical tree once per covering
//! frame. Same-class detections whose ground distance is at most the merge
//! radius are linked, and the transitive closure of that relation (computed
//! with a union-find over a spatial grid) defines the trees: one connected
//! component, one tree.
//!
//! Single-linkage semantics are intentional: two trees can in principle merge
//! through an intermediate detection. In orchard geometry (~8 m pitch) with
//! geolocation error well under half the pitch this does not occur; the
//! merge radius is configurable for other regimes.
//!
//! All distances are Euclidean in a single east/north tangent plane anchored
//! at the centroid of the input points, which is accurate for survey extents
//! far below the geodesy module's 10 km limit.

use std::collections::HashMap;

use crate::detections::TreeClass;
use crate::error::{Error, Result};
use crate::geodesy::{geo_apply, geo_offset, EnuOffset, GeoPoint};
use crate::projection::GeolocatedDetection;

/// One input point for clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPoint {
    pub position: GeoPoint,
    pub class: TreeClass,
    /// Detector confidence, used to weight the cluster centroid.
    pub confidence: f64,
    /// Caller-side identity (detection index); preserved in `member_indices`.
    pub index: usize,
}

impl ClusterPoint {
    pub fn from_geolocated(g: &GeolocatedDetection) -> Self {
        ClusterPoint {
            position: g.position,
            class: g.class,
            confidence: g.confidence,
            index: g.detection_index,
        }
    }
}

/// One deduplicated tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeRecord {
    /// Sequential id starting at 1, in ascending order of the smallest
    /// member detection index.
    pub tree_id: u64,
    pub class: TreeClass,
    /// Confidence-weighted centroid of member positions (uniform weights
    /// when every member confidence is zero).
    pub position: GeoPoint,
    /// Number of member detections.
    pub support: usize,
    /// Unweighted mean of member confidences.
    pub mean_confidence: f64,
    /// Detection indices of the members, ascending.
    pub member_indices: Vec<usize>,
}

/// Aggregate counts over an inventory.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InventoryReport {
    pub palm_count: usize,
    pub other_tree_count: usize,
    pub total_trees: usize,
    /// Detections merged into the records (Σ support).
    pub total_detections: usize,
    pub merge_radius_m: f64,
}

// ---------------------------------------------------------------------------
// Union-find
// ---------------------------------------------------------------------------

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Clustering
// ---------------------------------------------------------------------------

fn grid_cell(e: f64, n: f64, cell_m: f64) -> (i64, i64) {
    ((e / cell_m).floor() as i64, (n / cell_m).floor() as i64)
}

/// Merge points into unique tree records.
///
/// Two same-class points are linked when their tangent-plane distance is at
/// most `merge_radius_m`; connected components of that relation become
/// records. The partition is independent of input order (ids follow member
/// indices, not positions in the slice). Empty input yields an empty list.
pub fn cluster(points: &[ClusterPoint], merge_radius_m: f64) -> Result<Vec<TreeRecord>> {
    if !merge_radius_m.is_finite() || merge_radius_m <= 0.0 {
        return Err(Error::Config(format!(
            "merge_radius_m must be finite and > 0, got {merge_radius_m}"
        )));
    }
    if points.is_empty() {
        return Ok(Vec::new());
    }

    // Tangent plane anchored at the centroid of the inputs.
    let n = points.len() as f64;
    let origin = GeoPoint::new(
        points.iter().map(|p| p.position.latitude).sum::<f64>() / n,
        points.iter().map(|p| p.position.longitude).sum::<f64>() / n,
    )?;
    let enu: Vec<EnuOffset> = points
        .iter()
        .map(|p| geo_offset(origin, p.position))
        .collect::<Result<_>>()?;

    // Grid index with cell edge = merge radius: any pair within the radius
    // lies in the same or an adjacent cell, so scanning the 3x3 neighborhood
    // finds every candidate.
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, off) in enu.iter().enumerate() {
        grid.entry(grid_cell(off.east_m, off.north_m, merge_radius_m))
            .or_default()
            .push(i);
    }

    let r2 = merge_radius_m * merge_radius_m;
    let mut sets = DisjointSet::new(points.len());
    for (i, off) in enu.iter().enumerate() {
        let (ce, cn) = grid_cell(off.east_m, off.north_m, merge_radius_m);
        for de in -1..=1 {
            for dn in -1..=1 {
                let Some(bucket) = grid.get(&(ce + de, cn + dn)) else {
                    continue;
                };
                for &j in bucket {
                    if j <= i || points[j].class != points[i].class {
                        continue;
                    }
                    let dx = enu[j].east_m - off.east_m;
                    let dy = enu[j].north_m - off.north_m;
                    if dx * dx + dy * dy <= r2 {
                        sets.union(i, j);
                    }
                }
            }
        }
    }

    // Collect components, ordered by smallest member detection index.
    let mut components: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..points.len() {
        let root = sets.find(i);
        components.entry(root).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = components.into_values().collect();
    for group in &mut groups {
        group.sort_by_key(|&i| points[i].index);
    }
    groups.sort_by_key(|g| points[g[0]].index);

    let mut records = Vec::with_capacity(groups.len());
    for (seq, group) in groups.iter().enumerate() {
        let total_weight: f64 = group.iter().map(|&i| points[i].confidence).sum();
        // All-zero confidences fall back to uniform weights.
        let uniform = total_weight == 0.0;
        let denom = if uniform {
            group.len() as f64
        } else {
            total_weight
        };
        let mut east = 0.0;
        let mut north = 0.0;
        for &i in group {
            let w = if uniform { 1.0 } else { points[i].confidence };
            east += enu[i].east_m * w;
            north += enu[i].north_m * w;
        }
        let centroid = geo_apply(
            origin,
            EnuOffset {
                east_m: east / denom,
                north_m: north / denom,
            },
        )?;
        let mean_confidence =
            group.iter().map(|&i| points[i].confidence).sum::<f64>() / group.len() as f64;
        records.push(TreeRecord {
            tree_id: seq as u64 + 1,
            class: points[group[0]].class,
            position: centroid,
            support: group.len(),
            mean_confidence,
            member_indices: group.iter().map(|&i| points[i].index).collect(),
        });
    }
    Ok(records)
}

/// Aggregate counts over clustered records.
pub fn build_inventory(records: &[TreeRecord], merge_radius_m: f64) -> InventoryReport {
    let palm_count = records.iter().filter(|r| r.class == TreeClass::Palm).count();
    InventoryReport {
        palm_count,
        other_tree_count: records.len() - palm_count,
        total_trees: records.len(),
        total_detections: records.iter().map(|r| r.support).sum(),
        merge_radius_m,
    }
}
