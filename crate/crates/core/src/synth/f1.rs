use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::spatial::SpatialHash;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Score {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Marks each reference point that has no ground-truth point within
/// `tolerance`, meaning it was pruned away.
pub fn should_be_removed(reference: &PointCloud, ground_truth: &PointCloud, tolerance: f64) -> Result<Vec<bool>> {
    if !(tolerance > 0.0) {
        return Err(Error::param("match_tolerance", "must be positive"));
    }
    let index = SpatialHash::new(ground_truth.positions().collect(), tolerance);
    Ok(reference.points.iter().map(|p| !index.any_within(&p.position(), tolerance)).collect())
}

/// Precision, recall and F1 of `predicted` against `truth`, per point.
pub fn f1_from_masks(predicted: &[bool], truth: &[bool]) -> Result<F1Score> {
    if predicted.len() != truth.len() {
        return Err(Error::Consistency(format!(
            "{} predictions for {} reference points",
            predicted.len(),
            truth.len()
        )));
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp + fn_ == 0 {
        return Err(Error::UndefinedRecall);
    }
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = tp as f64 / (tp + fn_) as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(F1Score {
        precision,
        recall,
        f1,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
    })
}

fn key(p: &crate::geometry::LabeledPoint) -> [u64; 3] {
    [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]
}

/// Scores a predicted removal against scan ground truth. Predicted points
/// are matched to reference points by exact coordinates.
pub fn evaluate_f1(
    predicted_removed: &PointCloud,
    reference: &PointCloud,
    ground_truth: &PointCloud,
    match_tolerance: f64,
) -> Result<F1Score> {
    let truth = should_be_removed(reference, ground_truth, match_tolerance)?;
    let removed: HashSet<[u64; 3]> = predicted_removed.points.iter().map(key).collect();
    let predicted: Vec<bool> = reference.points.iter().map(|p| removed.contains(&key(p))).collect();
    f1_from_masks(&predicted, &truth)
}
