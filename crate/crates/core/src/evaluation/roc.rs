use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Scores at or above this are called positive; `None` at the origin.
    pub threshold: Option<f64>,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC curve from a sweep over the distinct scores, and its area by the
/// trapezoidal rule. `None` unless both labels occur.
pub fn roc_auc(scores: &[(f64, bool)]) -> Option<RocCurve> {
    let n_pos = scores.iter().filter(|s| s.1).count();
    let n_neg = scores.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = vec![RocPoint { threshold: None, fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    for (i, &(s, positive)) in sorted.iter().enumerate() {
        if positive {
            tp += 1;
        } else {
            fp += 1;
        }
        if sorted.get(i + 1).is_none_or(|next| next.0 != s) {
            points.push(RocPoint {
                threshold: Some(s),
                fpr: fp as f64 / n_neg as f64,
                tpr: tp as f64 / n_pos as f64,
            });
        }
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum();
    Some(RocCurve { points, auc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mann_whitney(scores: &[(f64, bool)]) -> f64 {
        let pos: Vec<f64> = scores.iter().filter(|s| s.1).map(|s| s.0).collect();
        let neg: Vec<f64> = scores.iter().filter(|s| !s.1).map(|s| s.0).collect();
        let mut u = 0.0;
        for &p in &pos {
            for &n in &neg {
                u += if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 };
            }
        }
        u / (pos.len() * neg.len()) as f64
    }

    #[test]
    fn examples() {
        let sep = [(0.9, true), (0.8, true), (0.2, false), (0.1, false)];
        assert_eq!(roc_auc(&sep).unwrap().auc, 1.0);
        let flat = [(0.5, true), (0.5, false), (0.5, true), (0.5, false)];
        assert_eq!(roc_auc(&flat).unwrap().auc, 0.5);
        assert!(roc_auc(&[(0.3, true)]).is_none());
        assert!(roc_auc(&[]).is_none());
        let curve = roc_auc(&sep).unwrap();
        assert_eq!(curve.points.first().map(|p| (p.fpr, p.tpr)), Some((0.0, 0.0)));
        assert_eq!(curve.points.last().map(|p| (p.fpr, p.tpr)), Some((1.0, 1.0)));
    }

    proptest! {
        #[test]
        fn matches_rank_statistic(raw in proptest::collection::vec((0u32..10, any::<bool>()), 2..=50)) {
            let scores: Vec<(f64, bool)> = raw.iter().map(|&(s, l)| (f64::from(s) / 10.0, l)).collect();
            if let Some(curve) = roc_auc(&scores) {
                prop_assert!((curve.auc - mann_whitney(&scores)).abs() < 1e-9);
                prop_assert!((0.0..=1.0).contains(&curve.auc));
            }
        }
    }
}
