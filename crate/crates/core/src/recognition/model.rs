//! Softmax regression baseline, trained by gradient descent on the
//! categorical cross-entropy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureSpec;
use super::labeling::ClassRegistry;
use crate::error::{Error, Result};

const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossEntropy {
    pub loss: f64,
    /// Set when a true-class probability was zero and got clamped.
    pub clamped: bool,
}

/// `-sum_i sum_j y_ij ln p_ij` over all samples.
pub fn cross_entropy(probs: &[Vec<f64>], onehot: &[Vec<f64>]) -> Result<CrossEntropy> {
    if probs.len() != onehot.len() {
        return Err(Error::InvalidArgument(format!(
            "{} probability rows against {} label rows",
            probs.len(),
            onehot.len()
        )));
    }
    let mut loss = 0.0;
    let mut clamped = false;
    for (i, (p, y)) in probs.iter().zip(onehot).enumerate() {
        if p.len() != y.len() {
            return Err(Error::InvalidArgument(format!("row {i}: width mismatch")));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 || p.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidArgument(format!(
                "row {i}: probabilities sum to {total}, not 1"
            )));
        }
        for (&pj, &yj) in p.iter().zip(y) {
            if yj == 0.0 {
                continue;
            }
            if pj < PROB_FLOOR {
                clamped = true;
            }
            loss -= yj * pj.max(PROB_FLOOR).ln();
        }
    }
    if clamped {
        log::warn!("cross-entropy clamped a zero probability at a true class");
    }
    Ok(CrossEntropy { loss, clamped })
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// L2 penalty on non-bias weights.
    pub l2: f64,
    /// Step size; `None` uses the reciprocal of the gradient's Lipschitz
    /// bound, which makes every step non-increasing in loss.
    pub step: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 400,
            l2: 1e-4,
            step: None,
            seed: 0,
        }
    }
}

/// Per-class weight rows, each `dim + 1` long with the bias last.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftmaxModel {
    pub registry: ClassRegistry,
    pub spec: FeatureSpec,
    pub weights: Vec<Vec<f64>>,
}

fn logits(weights: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .map(|w| {
            let (bias, rest) = w.split_last().expect("weight rows are nonempty");
            rest.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + bias
        })
        .collect()
}

/// Mean cross-entropy plus `l2/2 |W|^2` (bias excluded), and its gradient.
pub fn loss_and_gradient(
    weights: &[Vec<f64>],
    xs: &[Vec<f64>],
    ys: &[usize],
    l2: f64,
) -> (f64, Vec<Vec<f64>>) {
    let n = xs.len() as f64;
    let mut grad: Vec<Vec<f64>> = weights.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut loss = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let p = softmax(&logits(weights, x));
        loss -= p[y].max(PROB_FLOOR).ln();
        for (k, g) in grad.iter_mut().enumerate() {
            let d = p[k] - f64::from(u8::from(k == y));
            let (gb, gw) = g.split_last_mut().expect("weight rows are nonempty");
            for (gi, xi) in gw.iter_mut().zip(x) {
                *gi += d * xi;
            }
            *gb += d;
        }
    }
    loss /= n;
    for (g, w) in grad.iter_mut().zip(weights) {
        let last = w.len() - 1;
        for (i, (gi, wi)) in g.iter_mut().zip(w).enumerate() {
            *gi /= n;
            if i < last {
                *gi += l2 * wi;
                loss += 0.5 * l2 * wi * wi;
            }
        }
    }
    (loss, grad)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub model: SoftmaxModel,
    /// Training loss before the first step and after each epoch.
    pub losses: Vec<f64>,
}

/// Trains on precomputed feature vectors with labels indexing `registry`.
pub fn train_on_features(
    xs: &[Vec<f64>],
    ys: &[usize],
    registry: &ClassRegistry,
    spec: &FeatureSpec,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::InvalidArgument("training set is empty or misaligned".into()));
    }
    let dim = spec.dim();
    if let Some(x) = xs.iter().find(|x| x.len() != dim) {
        return Err(Error::InvalidArgument(format!(
            "feature length {} differs from spec dimension {dim}",
            x.len()
        )));
    }
    if let Some(&y) = ys.iter().find(|&&y| y >= registry.len()) {
        return Err(Error::InvalidArgument(format!("label {y} not in registry")));
    }
    let first = ys[0];
    if ys.iter().all(|&y| y == first) {
        return Err(Error::InvalidArgument(
            "training data holds a single class".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut weights: Vec<Vec<f64>> = (0..registry.len())
        .map(|_| (0..=dim).map(|_| rng.random_range(-1e-3..1e-3)).collect())
        .collect();
    let max_sq = xs
        .iter()
        .map(|x| x.iter().map(|v| v * v).sum::<f64>() + 1.0)
        .fold(0.0, f64::max);
    let step = config.step.unwrap_or(1.0 / (0.5 * max_sq + config.l2));

    let mut losses = Vec::with_capacity(config.epochs + 1);
    let (mut loss, mut grad) = loss_and_gradient(&weights, xs, ys, config.l2);
    losses.push(loss);
    for _ in 0..config.epochs {
        for (w, g) in weights.iter_mut().zip(&grad) {
            for (wi, gi) in w.iter_mut().zip(g) {
                *wi -= step * gi;
            }
        }
        (loss, grad) = loss_and_gradient(&weights, xs, ys, config.l2);
        losses.push(loss);
    }
    Ok(TrainOutcome {
        model: SoftmaxModel {
            registry: registry.clone(),
            spec: *spec,
            weights,
        },
        losses,
    })
}

impl SoftmaxModel {
    pub fn probabilities_for(&self, features: &[f64]) -> Vec<f64> {
        softmax(&logits(&self.weights, features))
    }

    pub fn validate(&self) -> Result<()> {
        if self.registry.is_empty() || self.weights.len() != self.registry.len() {
            return Err(Error::ModelFormat(format!(
                "{} weight rows for {} classes",
                self.weights.len(),
                self.registry.len()
            )));
        }
        let want = self.spec.dim() + 1;
        if self.weights.iter().any(|w| w.len() != want) {
            return Err(Error::ModelFormat(format!("weight rows must have {want} entries")));
        }
        Ok(())
    }
}
