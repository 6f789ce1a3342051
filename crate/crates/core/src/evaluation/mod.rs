//! Detection metrics: IoU, confusion rates, interpolated AP, mAP, F1 and
//! ROC/AUC, plus the JSON/CSV report.

mod ap;
mod metrics;
mod report;
mod roc;

pub use ap::{average_precision, match_predictions, ApCurve, Matching, PrPoint, Prediction, Truth};
pub use metrics::{confusion_metrics, f1, iou, mean_ap, ConfusionCounts, ConfusionMetrics};
pub use report::{evaluate, ClassReport, EvalReport};
pub use roc::{roc_auc, RocCurve, RocPoint};
