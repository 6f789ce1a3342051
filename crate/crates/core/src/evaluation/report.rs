use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ap::{average_precision, match_predictions, Prediction, PrPoint, Truth};
use super::metrics::{f1, mean_ap};
use super::roc::{roc_auc, RocPoint};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: String,
    pub truths: usize,
    pub predictions: usize,
    pub ap: Option<f64>,
    pub auc: Option<f64>,
    /// Mean IoU over the true-positive matches of this class.
    pub mean_iou: Option<f64>,
    pub pr_points: Vec<PrPoint>,
    pub roc_points: Vec<RocPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iou_min: f64,
    pub classes: Vec<ClassReport>,
    pub map: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

/// Builds the report for `classes`. `scores` holds, per class, one
/// `(score, is_positive)` pair per scored sample for the ROC curve.
pub fn evaluate(
    classes: &[String],
    preds: &[Prediction],
    truths: &[Truth],
    scores: &BTreeMap<String, Vec<(f64, bool)>>,
    iou_min: f64,
) -> EvalReport {
    let mut reports = Vec::with_capacity(classes.len());
    let (mut tp_all, mut pred_all, mut truth_all) = (0usize, 0usize, 0usize);
    for class in classes {
        let p: Vec<Prediction> = preds.iter().filter(|p| &p.class == class).cloned().collect();
        let t: Vec<Truth> = truths.iter().filter(|t| &t.class == class).cloned().collect();
        let curve = average_precision(&p, &t, iou_min);
        let matching = match_predictions(&p, &t, iou_min);
        let ious: Vec<f64> = matching.matched.iter().flatten().map(|&(_, v)| v).collect();
        tp_all += ious.len();
        pred_all += p.len();
        truth_all += t.len();
        let roc = scores.get(class).and_then(|s| roc_auc(s));
        reports.push(ClassReport {
            class: class.clone(),
            truths: t.len(),
            predictions: p.len(),
            ap: curve.as_ref().map(|c| c.ap),
            auc: roc.as_ref().map(|r| r.auc),
            mean_iou: (!ious.is_empty()).then(|| ious.iter().sum::<f64>() / ious.len() as f64),
            pr_points: curve.map(|c| c.points).unwrap_or_default(),
            roc_points: roc.map(|r| r.points).unwrap_or_default(),
        });
    }
    let map = mean_ap(&reports.iter().map(|r| r.ap).collect::<Vec<_>>());
    let precision = (pred_all > 0).then(|| tp_all as f64 / pred_all as f64);
    let recall = (truth_all > 0).then(|| tp_all as f64 / truth_all as f64);
    let f1 = precision.zip(recall).and_then(|(p, r)| f1(p, r));
    EvalReport { iou_min, classes: reports, map, precision, recall, f1 }
}

impl EvalReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn write_pr_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record(["class", "confidence", "recall", "precision", "interpolated"])
            .map_err(|e| csv_error(path, e))?;
        for c in &self.classes {
            for p in &c.pr_points {
                w.write_record([
                    c.class.clone(),
                    p.confidence.to_string(),
                    p.recall.to_string(),
                    p.precision.to_string(),
                    p.interpolated.to_string(),
                ])
                .map_err(|e| csv_error(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_roc_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record(["class", "threshold", "fpr", "tpr"])
            .map_err(|e| csv_error(path, e))?;
        for c in &self.classes {
            for p in &c.roc_points {
                w.write_record([
                    c.class.clone(),
                    p.threshold.map_or(String::from("inf"), |t| t.to_string()),
                    p.fpr.to_string(),
                    p.tpr.to_string(),
                ])
                .map_err(|e| csv_error(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}
