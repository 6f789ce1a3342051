//! Interpolated average precision with greedy confidence-ordered matching.

use serde::{Deserialize, Serialize};

use super::metrics::iou;
use crate::geometry::BoundingBox;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub image_id: String,
    pub class: String,
    pub confidence: f64,
    pub bbox: BoundingBox,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub image_id: String,
    pub class: String,
    pub bbox: BoundingBox,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub confidence: f64,
    pub recall: f64,
    pub precision: f64,
    /// Max precision over all points with recall at least this one's.
    pub interpolated: f64,
}

/// Outcome of matching: for each prediction in confidence order, the index
/// of the truth it claimed and the IoU with it.
#[derive(Clone, Debug, PartialEq)]
pub struct Matching {
    /// Prediction indices sorted by descending confidence (stable).
    pub order: Vec<usize>,
    pub matched: Vec<Option<(usize, f64)>>,
}

impl Matching {
    pub fn true_positives(&self) -> usize {
        self.matched.iter().flatten().count()
    }
}

/// Sorts predictions by descending confidence (stable on ties) and lets each
/// claim the unmatched truth of the same class and image with the highest
/// IoU, provided that IoU reaches `iou_min`.
pub fn match_predictions(preds: &[Prediction], truths: &[Truth], iou_min: f64) -> Matching {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].confidence.total_cmp(&preds[a].confidence));
    let mut taken = vec![false; truths.len()];
    let matched = order
        .iter()
        .map(|&pi| {
            let p = &preds[pi];
            let mut best: Option<(usize, f64)> = None;
            for (ti, t) in truths.iter().enumerate() {
                if taken[ti] || t.class != p.class || t.image_id != p.image_id {
                    continue;
                }
                let v = iou(&p.bbox, &t.bbox);
                if v >= iou_min && best.is_none_or(|(_, b)| v > b) {
                    best = Some((ti, v));
                }
            }
            if let Some((ti, _)) = best {
                taken[ti] = true;
            }
            best
        })
        .collect();
    Matching { order, matched }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApCurve {
    pub ap: f64,
    pub points: Vec<PrPoint>,
}

/// Average precision of `preds` against `truths`, treating every class
/// present jointly (call once per class for per-class AP). Returns `None`
/// when there are no truths.
///
/// One PR point is emitted per distinct confidence; AP integrates the
/// interpolated precision over recall from 0 to 1.
pub fn average_precision(preds: &[Prediction], truths: &[Truth], iou_min: f64) -> Option<ApCurve> {
    assert!(iou_min > 0.0 && iou_min <= 1.0, "iou_min {iou_min} outside (0, 1]");
    if truths.is_empty() {
        return None;
    }
    let m = match_predictions(preds, truths, iou_min);
    let n_truth = truths.len() as f64;
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    for (i, &pi) in m.order.iter().enumerate() {
        if m.matched[i].is_some() {
            tp += 1;
        } else {
            fp += 1;
        }
        let group_ends = m
            .order
            .get(i + 1)
            .is_none_or(|&next| preds[next].confidence != preds[pi].confidence);
        if group_ends {
            points.push(PrPoint {
                confidence: preds[pi].confidence,
                recall: tp as f64 / n_truth,
                precision: tp as f64 / (tp + fp) as f64,
                interpolated: 0.0,
            });
        }
    }
    let mut running = 0.0f64;
    for p in points.iter_mut().rev() {
        running = running.max(p.precision);
        p.interpolated = running;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for p in &points {
        ap += (p.recall - prev_recall) * p.interpolated;
        prev_recall = p.recall;
    }
    Some(ApCurve { ap, points })
}
