//! Survey evaluation: geolocation error statistics and spatial
//! precision/recall of the deduplicated inventory.
//!
//! The error triple (mean, max, population standard deviation) is the form
//! field campaigns report for geolocation accuracy. Precision/recall here
//! compares inventoried tree positions against surveyed ground truth by
//! greedy spatial matching; it evaluates the end-to-end inventory, which is
//! a different quantity from a detector's image-space IoU metrics (no
//! detector runs inside this crate).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesy::{geo_offset, GeoPoint};
use crate::inventory::TreeRecord;
use crate::simulator::GroundTruthTree;

/// Distance statistics over matched estimate/truth pairs, meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean_m: f64,
    pub max_m: f64,
    /// Population standard deviation (divisor n, not n − 1): the triple
    /// (mean, max, std) is then jointly reproducible from one sample set.
    pub std_m: f64,
    pub n: usize,
}

impl ErrorStats {
    /// Statistics of a non-empty distance multiset.
    pub fn from_distances(distances: &[f64]) -> Result<Self> {
        if distances.is_empty() {
            return Err(Error::EmptyInput(
                "error statistics are undefined for an empty pairing".into(),
            ));
        }
        for &d in distances {
            if !d.is_finite() || d < 0.0 {
                return Err(Error::Range(format!("distance {d} is not a finite non-negative value")));
            }
        }
        let n = distances.len() as f64;
        let mean = distances.iter().sum::<f64>() / n;
        let max = distances.iter().fold(0.0_f64, |acc, &d| acc.max(d));
        let variance = distances.iter().map(|&d| (d - mean) * (d - mean)).sum::<f64>() / n;
        Ok(ErrorStats {
            mean_m: mean,
            max_m: max,
            std_m: variance.sqrt(),
            n: distances.len(),
        })
    }
}

/// Spatial matching outcome. Serialized field names follow the report
/// schema: `tp`, `fp`, `fn`, `precision`, `recall`, `match_radius_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    #[serde(rename = "tp")]
    pub true_positives: usize,
    #[serde(rename = "fp")]
    pub false_positives: usize,
    #[serde(rename = "fn")]
    pub false_negatives: usize,
    /// TP / (TP + FP); 1.0 when nothing was predicted.
    pub precision: f64,
    /// TP / (TP + FN); 1.0 when there is no truth.
    pub recall: f64,
    pub match_radius_m: f64,
}

/// Full evaluation payload: error statistics over the matched pairs (absent
/// when nothing matched) plus the match counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub error_stats: Option<ErrorStats>,
    #[serde(rename = "match")]
    pub match_report: MatchReport,
}

/// Distance statistics over explicitly paired estimates and truth points.
///
/// `pairing` holds `(estimate index, truth index)` pairs; every referenced
/// index must be in bounds and the pairing must be non-empty. Distances are
/// Euclidean in the tangent plane anchored at each pair's truth point.
pub fn geolocation_errors(
    estimates: &[GeoPoint],
    truth: &[GeoPoint],
    pairing: &[(usize, usize)],
) -> Result<ErrorStats> {
    let mut distances = Vec::with_capacity(pairing.len());
    for &(e, t) in pairing {
        let estimate = estimates.get(e).ok_or_else(|| {
            Error::Range(format!("pairing references estimate {e} of {}", estimates.len()))
        })?;
        let truth_point = truth.get(t).ok_or_else(|| {
            Error::Range(format!("pairing references truth point {t} of {}", truth.len()))
        })?;
        distances.push(geo_offset(*truth_point, *estimate)?.norm());
    }
    ErrorStats::from_distances(&distances)
}

fn ratio_or_one(numerator: usize, denominator: usize) -> f64 {
    if denominator == 0 {
        1.0
    } else {
        numerator as f64 / denominator as f64
    }
}

/// Greedy same-class matching by ascending pair distance; ties broken by
/// (predicted index, truth index). Returns the report plus the matched
/// (predicted, truth) index pairs.
pub fn match_trees_with_pairs(
    predicted: &[TreeRecord],
    truth: &[GroundTruthTree],
    match_radius_m: f64,
) -> Result<(MatchReport, Vec<(usize, usize)>)> {
    if !match_radius_m.is_finite() || match_radius_m <= 0.0 {
        return Err(Error::Config(format!(
            "match_radius_m must be finite and > 0, got {match_radius_m}"
        )));
    }
    let mut candidates = Vec::new();
    for (i, p) in predicted.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            if p.class != t.class {
                continue;
            }
            let d = geo_offset(t.position, p.position)?.norm();
            if d <= match_radius_m {
                candidates.push((d, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut predicted_matched = vec![false; predicted.len()];
    let mut truth_matched = vec![false; truth.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if !predicted_matched[i] && !truth_matched[j] {
            predicted_matched[i] = true;
            truth_matched[j] = true;
            pairs.push((i, j));
        }
    }

    let tp = pairs.len();
    let report = MatchReport {
        true_positives: tp,
        false_positives: predicted.len() - tp,
        false_negatives: truth.len() - tp,
        precision: ratio_or_one(tp, predicted.len()),
        recall: ratio_or_one(tp, truth.len()),
        match_radius_m,
    };
    Ok((report, pairs))
}

/// Greedy same-class spatial matching; see [`match_trees_with_pairs`].
pub fn match_trees(
    predicted: &[TreeRecord],
    truth: &[GroundTruthTree],
    match_radius_m: f64,
) -> Result<MatchReport> {
    match_trees_with_pairs(predicted, truth, match_radius_m).map(|(report, _)| report)
}

/// Match an inventory against ground truth and compute error statistics
/// over the matched pairs. With zero matches the error block is absent.
pub fn evaluate_inventory(
    predicted: &[TreeRecord],
    truth: &[GroundTruthTree],
    match_radius_m: f64,
) -> Result<EvalReport> {
    let (match_report, pairs) = match_trees_with_pairs(predicted, truth, match_radius_m)?;
    let error_stats = if pairs.is_empty() {
        None
    } else {
        let estimates: Vec<GeoPoint> = predicted.iter().map(|p| p.position).collect();
        let truth_points: Vec<GeoPoint> = truth.iter().map(|t| t.position).collect();
        Some(geolocation_errors(&estimates, &truth_points, &pairs)?)
    };
    Ok(EvalReport {
        error_stats,
        match_report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detections::TreeClass;
    use crate::geodesy::{geo_apply, EnuOffset};
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const ORIGIN: GeoPoint = GeoPoint {
        latitude: 24.1,
        longitude: 47.3,
    };

    fn at(east_m: f64, north_m: f64) -> GeoPoint {
        geo_apply(ORIGIN, EnuOffset { east_m, north_m }).unwrap()
    }

    fn predicted(id: u64, class: TreeClass, east_m: f64, north_m: f64) -> TreeRecord {
        TreeRecord {
            tree_id: id,
            class,
            position: at(east_m, north_m),
            support: 1,
            mean_confidence: 0.9,
            member_indices: vec![id as usize],
        }
    }

    fn truth(id: u64, class: TreeClass, east_m: f64, north_m: f64) -> GroundTruthTree {
        GroundTruthTree {
            tree_id: id,
            class,
            position: at(east_m, north_m),
            height_m: 8.0,
        }
    }

    #[test]
    fn perfect_estimates_zero_stats() {
        let points = vec![at(0.0, 0.0), at(5.0, 5.0), at(-3.0, 7.0)];
        let pairing: Vec<(usize, usize)> = (0..3).map(|i| (i, i)).collect();
        let stats = geolocation_errors(&points, &points, &pairing).unwrap();
        assert_eq!(stats.n, 3);
        assert!(stats.mean_m < 1e-12);
        assert!(stats.max_m < 1e-12);
        assert!(stats.std_m < 1e-12);
    }

    // Distances {1, 2, 3}: mean 2, max 3, population std sqrt(2/3).
    #[test]
    fn hand_computed_distance_multiset() {
        let estimates = vec![at(1.0, 0.0), at(0.0, 2.0), at(-3.0, 0.0)];
        let truth_points = vec![at(0.0, 0.0)];
        let pairing = vec![(0, 0), (1, 0), (2, 0)];
        let stats = geolocation_errors(&estimates, &truth_points, &pairing).unwrap();
        assert!((stats.mean_m - 2.0).abs() < 1e-6, "mean {}", stats.mean_m);
        assert!((stats.max_m - 3.0).abs() < 1e-6, "max {}", stats.max_m);
        let expected_std = (2.0_f64 / 3.0).sqrt();
        assert!((stats.std_m - expected_std).abs() < 1e-6, "std {}", stats.std_m);
        // The rounded value the stats are usually quoted at.
        assert!((stats.std_m - 0.8165).abs() < 1e-4);
    }

    #[test]
    fn singleton_pair_stats() {
        let stats =
            geolocation_errors(&[at(4.9, 0.0)], &[at(0.0, 0.0)], &[(0, 0)]).unwrap();
        assert!((stats.mean_m - 4.9).abs() < 1e-9);
        assert!((stats.max_m - 4.9).abs() < 1e-9);
        assert!(stats.std_m.abs() < 1e-9);
        assert_eq!(stats.n, 1);
    }

    #[test]
    fn empty_pairing_is_an_error() {
        assert!(matches!(
            geolocation_errors(&[at(0.0, 0.0)], &[at(0.0, 0.0)], &[]),
            Err(Error::EmptyInput(_))
        ));
        assert!(ErrorStats::from_distances(&[]).is_err());
    }

    #[test]
    fn out_of_bounds_pairing_rejected() {
        let pts = vec![at(0.0, 0.0)];
        assert!(matches!(
            geolocation_errors(&pts, &pts, &[(1, 0)]),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            geolocation_errors(&pts, &pts, &[(0, 3)]),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn stats_invariant_under_global_translation() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let n = 40;
        let base: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)))
            .collect();
        let errs: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)))
            .collect();
        let pairing: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();

        let stats_at = |shift_e: f64, shift_n: f64| {
            let truth_points: Vec<GeoPoint> = base
                .iter()
                .map(|&(e, n)| at(e + shift_e, n + shift_n))
                .collect();
            let estimates: Vec<GeoPoint> = base
                .iter()
                .zip(&errs)
                .map(|(&(e, n), &(de, dn))| at(e + shift_e + de, n + shift_n + dn))
                .collect();
            geolocation_errors(&estimates, &truth_points, &pairing).unwrap()
        };
        // Translating the whole scene through the lat/lon chart perturbs
        // metre separations by about d * s * tan(lat) / R (~1e-4 m here),
        // so exact invariance is not expected, only closeness at that scale.
        let a = stats_at(0.0, 0.0);
        let b = stats_at(250.0, -400.0);
        assert!((a.mean_m - b.mean_m).abs() < 1e-3);
        assert!((a.max_m - b.max_m).abs() < 1e-3);
        assert!((a.std_m - b.std_m).abs() < 1e-3);
    }

    #[test]
    fn exact_match_perfect_scores() {
        let p = vec![
            predicted(1, TreeClass::Palm, 0.0, 0.0),
            predicted(2, TreeClass::Palm, 8.0, 0.0),
        ];
        let t = vec![
            truth(1, TreeClass::Palm, 0.0, 0.0),
            truth(2, TreeClass::Palm, 8.0, 0.0),
        ];
        let report = match_trees(&p, &t, 1.0).unwrap();
        assert_eq!(report.true_positives, 2);
        assert_eq!(report.false_positives, 0);
        assert_eq!(report.false_negatives, 0);
        assert_eq!(report.precision, 1.0);
        assert_eq!(report.recall, 1.0);
    }

    #[test]
    fn unmatched_truth_becomes_false_negative() {
        let p = vec![
            predicted(1, TreeClass::Palm, 0.0, 0.0),
            predicted(2, TreeClass::Palm, 8.0, 0.0),
            predicted(3, TreeClass::Palm, 16.0, 0.0),
        ];
        let t = vec![
            truth(1, TreeClass::Palm, 0.1, 0.0),
            truth(2, TreeClass::Palm, 8.1, 0.0),
            truth(3, TreeClass::Palm, 16.1, 0.0),
            truth(4, TreeClass::Palm, 60.0, 0.0),
        ];
        let report = match_trees(&p, &t, 2.0).unwrap();
        assert_eq!(report.true_positives, 3);
        assert_eq!(report.false_positives, 0);
        assert_eq!(report.false_negatives, 1);
        assert!((report.recall - 0.75).abs() < 1e-12);
        assert_eq!(report.precision, 1.0);
    }

    // Two predictions inside the radius of a single truth point: greedy
    // takes the closer one; the other stays unmatched. With one truth
    // point greedy and optimal assignment agree.
    #[test]
    fn duplicate_predictions_one_tp_one_fp() {
        let p = vec![
            predicted(1, TreeClass::Palm, 1.0, 0.0),
            predicted(2, TreeClass::Palm, -0.5, 0.0),
        ];
        let t = vec![truth(1, TreeClass::Palm, 0.0, 0.0)];
        let (report, pairs) = match_trees_with_pairs(&p, &t, 3.0).unwrap();
        assert_eq!(report.true_positives, 1);
        assert_eq!(report.false_positives, 1);
        assert_eq!(report.false_negatives, 0);
        // The closer prediction (index 1 at 0.5 m) wins.
        assert_eq!(pairs, vec![(1, 0)]);
    }

    #[test]
    fn class_mismatch_never_matches() {
        let p = vec![predicted(1, TreeClass::Palm, 0.0, 0.0)];
        let t = vec![truth(1, TreeClass::OtherTree, 0.0, 0.0)];
        let report = match_trees(&p, &t, 5.0).unwrap();
        assert_eq!(report.true_positives, 0);
        assert_eq!(report.false_positives, 1);
        assert_eq!(report.false_negatives, 1);
        assert_eq!(report.precision, 0.0);
        assert_eq!(report.recall, 0.0);
    }

    #[test]
    fn empty_sides_use_convention() {
        let report = match_trees(&[], &[], 4.0).unwrap();
        assert_eq!(report.precision, 1.0);
        assert_eq!(report.recall, 1.0);

        let t = vec![truth(1, TreeClass::Palm, 0.0, 0.0)];
        let report = match_trees(&[], &t, 4.0).unwrap();
        assert_eq!(report.precision, 1.0);
        assert_eq!(report.recall, 0.0);
    }

    #[test]
    fn cardinality_conservation_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        for _ in 0..30 {
            let np = rng.random_range(0..40);
            let nt = rng.random_range(0..40);
            let p: Vec<TreeRecord> = (0..np)
                .map(|i| {
                    predicted(
                        i as u64 + 1,
                        if rng.random_bool(0.8) { TreeClass::Palm } else { TreeClass::OtherTree },
                        rng.random_range(-40.0..40.0),
                        rng.random_range(-40.0..40.0),
                    )
                })
                .collect();
            let t: Vec<GroundTruthTree> = (0..nt)
                .map(|i| {
                    truth(
                        i as u64 + 1,
                        if rng.random_bool(0.8) { TreeClass::Palm } else { TreeClass::OtherTree },
                        rng.random_range(-40.0..40.0),
                        rng.random_range(-40.0..40.0),
                    )
                })
                .collect();
            let report = match_trees(&p, &t, 5.0).unwrap();
            assert_eq!(report.true_positives + report.false_positives, np);
            assert_eq!(report.true_positives + report.false_negatives, nt);
        }
    }

    #[test]
    fn counts_stable_under_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let p: Vec<TreeRecord> = (0..25)
            .map(|i| {
                predicted(
                    i as u64 + 1,
                    TreeClass::Palm,
                    rng.random_range(-30.0..30.0),
                    rng.random_range(-30.0..30.0),
                )
            })
            .collect();
        let t: Vec<GroundTruthTree> = (0..25)
            .map(|i| {
                truth(
                    i as u64 + 1,
                    TreeClass::Palm,
                    rng.random_range(-30.0..30.0),
                    rng.random_range(-30.0..30.0),
                )
            })
            .collect();
        let base = match_trees(&p, &t, 6.0).unwrap();
        for _ in 0..5 {
            let mut ps = p.clone();
            let mut ts = t.clone();
            ps.shuffle(&mut rng);
            ts.shuffle(&mut rng);
            let perm = match_trees(&ps, &ts, 6.0).unwrap();
            assert_eq!(base.true_positives, perm.true_positives);
            assert_eq!(base.false_positives, perm.false_positives);
            assert_eq!(base.false_negatives, perm.false_negatives);
        }
    }

    #[test]
    fn evaluate_combines_match_and_errors() {
        let p = vec![
            predicted(1, TreeClass::Palm, 1.0, 0.0),
            predicted(2, TreeClass::Palm, 50.0, 50.0),
        ];
        let t = vec![truth(1, TreeClass::Palm, 0.0, 0.0)];
        let report = evaluate_inventory(&p, &t, 4.0).unwrap();
        assert_eq!(report.match_report.true_positives, 1);
        assert_eq!(report.match_report.false_positives, 1);
        let stats = report.error_stats.expect("one matched pair");
        assert!((stats.mean_m - 1.0).abs() < 1e-6);
        assert_eq!(stats.n, 1);

        // No matches at all: the error block is absent, not zeroed.
        let far = vec![predicted(1, TreeClass::Palm, 200.0, 0.0)];
        let report = evaluate_inventory(&far, &t, 4.0).unwrap();
        assert!(report.error_stats.is_none());
        assert_eq!(report.match_report.true_positives, 0);
    }

    #[test]
    fn report_serializes_with_schema_names() {
        let report = EvalReport {
            error_stats: Some(ErrorStats {
                mean_m: 2.0,
                max_m: 3.0,
                std_m: 0.5,
                n: 4,
            }),
            match_report: MatchReport {
                true_positives: 9,
                false_positives: 1,
                false_negatives: 2,
                precision: 0.9,
                recall: 0.75,
                match_radius_m: 4.0,
            },
        };
        let value = serde_json::to_value(&report).unwrap();
        assert_eq!(value["error_stats"]["mean_m"], 2.0);
        assert_eq!(value["error_stats"]["n"], 4);
        assert_eq!(value["match"]["tp"], 9);
        assert_eq!(value["match"]["fn"], 2);
        assert_eq!(value["match"]["match_radius_m"], 4.0);
        let back: EvalReport = serde_json::from_value(value).unwrap();
        assert_eq!(back, report);
    }
}
