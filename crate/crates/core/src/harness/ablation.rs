//! Grid over (K, M): detection quality and per-image time per cell.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::manifest::DatasetManifest;
use super::pipeline::{
    configured_model, evaluate_outcomes, prepare_scan, process_manifest, train_from_outcomes,
    write_json, FileError,
};
use crate::error::{Error, Result};
use crate::imaging::io::load_scan;
use crate::proposal::extract_proposals;
use crate::recognition::{classify, ProposalClassifier, SoftmaxModel};
use crate::tensor::TensorFamily;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub k: usize,
    pub m: usize,
    /// False when M exceeds K(K+1)/2; such cells carry no numbers.
    pub feasible: bool,
    pub map: Option<f64>,
    /// Mean over images of the median wall time of extract + classify.
    pub mean_time_ms: Option<f64>,
    pub images: usize,
    /// Why a feasible cell has no numbers, e.g. training found one class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub cells: Vec<AblationCell>,
    pub errors: Vec<FileError>,
}

impl AblationReport {
    pub fn cell(&self, k: usize, m: usize) -> Option<&AblationCell> {
        self.cells.iter().find(|c| c.k == k && c.m == m)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(["k", "m", "map", "mean_time_ms"]).map_err(io)?;
        let show = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"));
        for c in &self.cells {
            w.write_record([c.k.to_string(), c.m.to_string(), show(c.map), show(c.mean_time_ms)])
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn subset(manifest: &DatasetManifest, ids: &[String]) -> DatasetManifest {
    DatasetManifest {
        classes: manifest.classes.clone(),
        images: manifest
            .images
            .iter()
            .filter(|e| ids.contains(&e.id))
            .cloned()
            .collect(),
        base_dir: manifest.base_dir.clone(),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Times extract + classify per image on a single worker thread, so that
/// cells are compared by total work rather than by how well it spreads
/// over cores.
fn time_cell(
    config: &PipelineConfig,
    manifest: &DatasetManifest,
    model: Option<&dyn ProposalClassifier>,
) -> Result<Option<f64>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let params = config.extract_params();
    let mut per_image = Vec::new();
    for entry in manifest.sorted_images() {
        let Ok(scan) = load_scan(&manifest.resolve(entry)) else { continue };
        let mut runs = Vec::with_capacity(config.timing_runs);
        for _ in 0..config.timing_runs {
            let elapsed = pool.install(|| -> Result<f64> {
                let start = Instant::now();
                let prepared = prepare_scan(config, &scan)?;
                let ex = extract_proposals(&prepared, &params)?;
                if let Some(model) = model {
                    for p in &ex.proposals {
                        classify(model, p)?;
                    }
                }
                Ok(start.elapsed().as_secs_f64() * 1e3)
            })?;
            runs.push(elapsed);
        }
        per_image.push(median(runs));
    }
    Ok((!per_image.is_empty()).then(|| per_image.iter().sum::<f64>() / per_image.len() as f64))
}

/// Runs every (K, M) cell. With a classifier in the config, every image is
/// evaluated with it; otherwise each cell trains on the first half of the
/// images by id and evaluates on the rest.
pub fn run_ablation(
    config: &PipelineConfig,
    manifest: &DatasetManifest,
    k_values: &[usize],
    m_values: &[usize],
    out: Option<&Path>,
) -> Result<AblationReport> {
    if k_values.is_empty() || m_values.is_empty() {
        return Err(Error::InvalidArgument("ablation ranges must be nonempty".into()));
    }
    let fixed = config.classifier.as_ref().map(|_| configured_model(config)).transpose()?;
    let ids: Vec<String> = manifest.sorted_images().iter().map(|e| e.id.clone()).collect();
    let (train_set, test_set) = if fixed.is_some() {
        (None, manifest.clone())
    } else {
        if ids.len() < 2 {
            return Err(Error::InvalidArgument(
                "ablation without a model needs at least two images".into(),
            ));
        }
        let half = ids.len() / 2;
        (Some(subset(manifest, &ids[..half])), subset(manifest, &ids[half..]))
    };
    let registry = manifest.registry()?;

    let mut report = AblationReport::default();
    for &k in k_values {
        for &m in m_values {
            if k == 0 || m == 0 || m > TensorFamily::unique_count(k) {
                report.cells.push(AblationCell {
                    k,
                    m,
                    feasible: false,
                    map: None,
                    mean_time_ms: None,
                    images: 0,
                    note: None,
                });
                continue;
            }
            let cfg = PipelineConfig { k_count: k, m_count: m, ..config.clone() };
            let trained: SoftmaxModel;
            let model: &SoftmaxModel = match (&fixed, &train_set) {
                (Some(model), _) => model,
                (None, Some(train)) => {
                    let (outcomes, errors) = process_manifest(&cfg, train, None)?;
                    report.errors.extend(errors);
                    match train_from_outcomes(&cfg, train, &outcomes) {
                        Ok((model, _)) => trained = model,
                        Err(e) => {
                            log::warn!("K={k} M={m}: {e}");
                            report.cells.push(AblationCell {
                                k,
                                m,
                                feasible: true,
                                map: None,
                                mean_time_ms: time_cell(&cfg, &test_set, None)?,
                                images: 0,
                                note: Some(format!("training failed, timed extraction only: {e}")),
                            });
                            continue;
                        }
                    }
                    &trained
                }
                (None, None) => unreachable!("a training split exists without a model"),
            };
            let (outcomes, errors) = process_manifest(&cfg, &test_set, Some(model))?;
            report.errors.extend(errors);
            let metrics = evaluate_outcomes(&cfg, &test_set, &registry, &outcomes);
            let mean_time_ms = time_cell(&cfg, &test_set, Some(model))?;
            log::info!("K={k} M={m}: mAP {:?}, {:?} ms/image", metrics.map, mean_time_ms);
            report.cells.push(AblationCell {
                k,
                m,
                feasible: true,
                map: metrics.map,
                mean_time_ms,
                images: outcomes.len(),
                note: None,
            });
        }
    }
    report.errors.sort_by(|a, b| a.id.cmp(&b.id));
    report.errors.dedup();
    if let Some(out) = out {
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        report.write_csv(&out.join("ablation.csv"))?;
        write_json(&report, &out.join("ablation.json"))?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
