//! The batch commands: extract, train, classify and evaluate over a manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::manifest::{DatasetManifest, ImageEntry};
use super::overlay::overlay;
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, iou, EvalReport, Prediction, Truth};
use crate::geometry::BoundingBox;
use crate::imaging::io::{load_scan, save_scan};
use crate::imaging::{enhance_contrast, ScanImage};
use crate::proposal::{extract_proposals, ExtractionResult, Termination};
use crate::recognition::{
    assign_label, balance_classes, classify, label_for_box, load_model, save_model, train_baseline,
    ClassRegistry, Detection, LabeledProposal, ProposalClassifier, SoftmaxModel,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileError {
    pub id: String,
    pub path: String,
    pub message: String,
}

/// Everything computed for one image.
#[derive(Clone, Debug)]
pub struct ImageOutcome {
    pub entry: ImageEntry,
    /// The scan as loaded, before enhancement.
    pub scan: ScanImage,
    pub extraction: ExtractionResult,
    pub detections: Option<Vec<Detection>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalRecord {
    pub pass: usize,
    pub label: usize,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    pub id: String,
    pub rows: usize,
    pub cols: usize,
    pub passes_run: usize,
    pub terminated_by: Termination,
    pub foreground_per_pass: Vec<usize>,
    pub proposals: Vec<ProposalRecord>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub images: Vec<ImageReport>,
    pub errors: Vec<FileError>,
}

impl RunReport {
    pub fn has_errors(&self) -> bool {
        !self.errors.is_empty()
    }
}

/// Applies the configured contrast enhancement.
pub fn prepare_scan(config: &PipelineConfig, scan: &ScanImage) -> Result<ScanImage> {
    if config.enhance {
        enhance_contrast(scan, &config.grid, &config.equalize)
    } else {
        Ok(scan.clone())
    }
}

fn load_entry(manifest: &DatasetManifest, entry: &ImageEntry) -> Result<ScanImage> {
    let path = manifest.resolve(entry);
    let scan = load_scan(&path)?;
    for t in &entry.truths {
        if !t.bbox.fits_in(scan.rows(), scan.cols()) {
            return Err(Error::InvalidManifest(format!(
                "truth box {:?} lies outside the {}x{} image",
                t.bbox,
                scan.rows(),
                scan.cols()
            )));
        }
    }
    Ok(scan)
}

fn process_one(
    config: &PipelineConfig,
    manifest: &DatasetManifest,
    entry: &ImageEntry,
    classifier: Option<&dyn ProposalClassifier>,
) -> Result<ImageOutcome> {
    let scan = load_entry(manifest, entry)?;
    let prepared = prepare_scan(config, &scan)?;
    let extraction = extract_proposals(&prepared, &config.extract_params())?;
    let detections = classifier
        .map(|model| {
            extraction
                .proposals
                .iter()
                .map(|p| classify(model, p))
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    Ok(ImageOutcome { entry: entry.clone(), scan, extraction, detections })
}

/// Runs extraction (and classification when a model is given) on every
/// image in parallel. Outcomes and errors come back sorted by image id.
pub fn process_manifest(
    config: &PipelineConfig,
    manifest: &DatasetManifest,
    classifier: Option<&dyn ProposalClassifier>,
) -> Result<(Vec<ImageOutcome>, Vec<FileError>)> {
    config.validate()?;
    let entries = manifest.sorted_images();
    let results: Vec<(usize, Result<ImageOutcome>)> = entries
        .par_iter()
        .enumerate()
        .map(|(i, e)| (i, process_one(config, manifest, e, classifier)))
        .collect();
    let mut outcomes = Vec::new();
    let mut errors = Vec::new();
    for (i, r) in results {
        match r {
            Ok(o) => outcomes.push(o),
            Err(e) => {
                log::error!("{}: {e}", entries[i].id);
                errors.push(FileError {
                    id: entries[i].id.clone(),
                    path: manifest.resolve(entries[i]).display().to_string(),
                    message: e.to_string(),
                });
            }
        }
    }
    Ok((outcomes, errors))
}

fn image_report(outcome: &ImageOutcome, registry: Option<&ClassRegistry>) -> ImageReport {
    let ex = &outcome.extraction;
    let proposals = ex
        .proposals
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let det = outcome.detections.as_ref().map(|d| &d[i]);
            ProposalRecord {
                pass: p.pass_index,
                label: p.contour_label,
                bbox: p.bbox,
                class: det.and_then(|d| registry.and_then(|r| r.name(d.class_id)).map(str::to_string)),
                score: det.map(|d| d.score),
            }
        })
        .collect();
    ImageReport {
        id: outcome.entry.id.clone(),
        rows: outcome.scan.rows(),
        cols: outcome.scan.cols(),
        passes_run: ex.passes_run,
        terminated_by: ex.terminated_by,
        foreground_per_pass: ex.foreground_per_pass.clone(),
        proposals,
    }
}

pub fn build_report(
    outcomes: &[ImageOutcome],
    errors: Vec<FileError>,
    registry: Option<&ClassRegistry>,
) -> RunReport {
    RunReport {
        images: outcomes.iter().map(|o| image_report(o, registry)).collect(),
        errors,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn write_images(config: &PipelineConfig, outcomes: &[ImageOutcome], out: &Path) -> Result<()> {
    if config.write_overlays {
        let dir = out.join("overlays");
        create_dir(&dir)?;
        for o in outcomes {
            let boxes: Vec<BoundingBox> = o.extraction.proposals.iter().map(|p| p.bbox).collect();
            let truths: Vec<BoundingBox> = o.entry.truths.iter().map(|t| t.bbox).collect();
            let path = dir.join(format!("{}.png", o.entry.id));
            overlay(&o.scan, &boxes, &truths)
                .save(&path)
                .map_err(|e| Error::io(&path, std::io::Error::other(e)))?;
        }
    }
    if config.write_crops {
        let dir = out.join("crops");
        create_dir(&dir)?;
        for o in outcomes {
            for p in &o.extraction.proposals {
                let name = format!("{}_p{}_l{}.png", o.entry.id, p.pass_index, p.contour_label);
                save_scan(&p.crop, &dir.join(name))?;
            }
        }
    }
    Ok(())
}

/// Extracts proposals for every image; with `out`, writes
/// `proposals.json` plus overlays and crops as configured.
pub fn run_extract(
    config: &PipelineConfig,
    manifest: &DatasetManifest,
    out: Option<&Path>,
) -> Result<RunReport> {
    let (outcomes, errors) = process_manifest(config, manifest, None)?;
    let report = build_report(&outcomes, errors, None);
    if let Some(out) = out {
        create_dir(out)?;
        write_json(&report, &out.join("proposals.json"))?;
        write_images(config, &outcomes, out)?;
    }
    Ok(report)
}

/// Loads the classifier named in the config.
pub fn configured_model(config: &PipelineConfig) -> Result<SoftmaxModel> {
    let path = config
        .classifier
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("no classifier model configured".into()))?;
    load_model(path)
}

pub fn run_classify(
    config: &PipelineConfig,
    manifest: &DatasetManifest,
    model: &dyn ProposalClassifier,
    out: Option<&Path>,
) -> Result<RunReport> {
    let (outcomes, errors) = process_manifest(config, manifest, Some(model))?;
    let report = build_report(&outcomes, errors, Some(model.registry()));
    if let Some(out) = out {
        create_dir(out)?;
        write_json(&report, &out.join("detections.json"))?;
        write_images(config, &outcomes, out)?;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub samples: usize,
    pub per_class: BTreeMap<String, usize>,
    pub discarded_normals: usize,
    pub no_suspicious: bool,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub model_path: Option<PathBuf>,
    pub errors: Vec<FileError>,
}

/// Labels every proposal against the truths of its image.
pub fn label_outcomes(
    config: &PipelineConfig,
    manifest: &DatasetManifest,
    registry: &ClassRegistry,
    outcomes: &[ImageOutcome],
) -> Vec<LabeledProposal> {
    outcomes
        .iter()
        .flat_map(|o| {
            let truths = manifest.truth_ids(&o.entry, registry);
            o.extraction
                .proposals
                .iter()
                .map(move |p| assign_label(p, &truths, config.min_overlap_fraction))
        })
        .collect()
}

/// Trains the baseline on balanced labeled proposals from every image.
pub fn train_from_outcomes(
    config: &PipelineConfig,
    manifest: &DatasetManifest,
    outcomes: &[ImageOutcome],
) -> Result<(SoftmaxModel, TrainSummary)> {
    let registry = manifest.registry()?;
    let pool = label_outcomes(config, manifest, &registry, outcomes);
    if pool.is_empty() {
        return Err(Error::InvalidArgument("no proposals to train on".into()));
    }
    let balanced = balance_classes(&pool, |p| p.class_id == 0, config.seed)?;
    let mut train_config = config.train;
    train_config.seed = config.seed;
    let outcome = train_baseline(&balanced.kept, &registry, &config.features, &train_config)?;
    let mut per_class = BTreeMap::new();
    for p in &balanced.kept {
        let name = registry.name(p.class_id).unwrap_or("?").to_string();
        *per_class.entry(name).or_insert(0) += 1;
    }
    let summary = TrainSummary {
        samples: balanced.kept.len(),
        per_class,
        discarded_normals: balanced.discarded,
        no_suspicious: balanced.no_suspicious,
        initial_loss: outcome.losses[0],
        final_loss: *outcome.losses.last().unwrap_or(&f64::NAN),
        model_path: None,
        errors: Vec::new(),
    };
    Ok((outcome.model, summary))
}

pub fn run_train(
    config: &PipelineConfig,
    manifest: &DatasetManifest,
    model_path: &Path,
) -> Result<TrainSummary> {
    let (outcomes, errors) = process_manifest(config, manifest, None)?;
    let (model, mut summary) = train_from_outcomes(config, manifest, &outcomes)?;
    save_model(&model, model_path)?;
    summary.model_path = Some(model_path.to_path_buf());
    summary.errors = errors;
    Ok(summary)
}

/// How well proposals cover the truths: for each truth, the proposal with
/// the highest IoU is its match.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalQuality {
    pub truths: usize,
    /// Truths whose best proposal reaches the IoU threshold.
    pub recalled: usize,
    pub recall: Option<f64>,
    pub mean_best_iou: Option<f64>,
    /// Truths whose best proposal was classified as the truth's class.
    pub correctly_classified: usize,
    pub accuracy: Option<f64>,
}

pub fn proposal_quality(
    outcomes: &[ImageOutcome],
    registry: &ClassRegistry,
    iou_min: f64,
) -> ProposalQuality {
    let (mut truths, mut recalled, mut correct) = (0usize, 0usize, 0usize);
    let mut iou_sum = 0.0;
    for o in outcomes {
        for t in &o.entry.truths {
            truths += 1;
            let best = o
                .extraction
                .proposals
                .iter()
                .enumerate()
                .map(|(i, p)| (i, iou(&p.bbox, &t.bbox)))
                .fold(None, |acc: Option<(usize, f64)>, (i, v)| match acc {
                    Some((_, b)) if b >= v => acc,
                    _ => Some((i, v)),
                });
            let Some((i, v)) = best else { continue };
            iou_sum += v;
            recalled += usize::from(v >= iou_min);
            if let Some(d) = o.detections.as_ref().map(|d| &d[i]) {
                correct += usize::from(registry.name(d.class_id) == Some(t.class.as_str()));
            }
        }
    }
    let frac = |n: usize| (truths > 0).then(|| n as f64 / truths as f64);
    ProposalQuality {
        truths,
        recalled,
        recall: frac(recalled),
        mean_best_iou: (truths > 0).then(|| iou_sum / truths as f64),
        correctly_classified: correct,
        accuracy: frac(correct),
    }
}

/// Detection metrics over classified outcomes. Proposals classified as
/// normal are not detections. Each item class also gets a one-vs-rest ROC
/// over all proposals, scored by that class's probability against the
/// proposal's assigned label.
pub fn evaluate_outcomes(
    config: &PipelineConfig,
    manifest: &DatasetManifest,
    registry: &ClassRegistry,
    outcomes: &[ImageOutcome],
) -> EvalReport {
    let mut preds = Vec::new();
    let mut truths = Vec::new();
    let mut scores: BTreeMap<String, Vec<(f64, bool)>> = BTreeMap::new();
    let empty = Vec::new();
    for o in outcomes {
        let truth_ids = manifest.truth_ids(&o.entry, registry);
        for t in &o.entry.truths {
            truths.push(Truth { image_id: o.entry.id.clone(), class: t.class.clone(), bbox: t.bbox });
        }
        for d in o.detections.as_ref().unwrap_or(&empty) {
            let (label, _) = label_for_box(&d.proposal.bbox, &truth_ids, config.min_overlap_fraction);
            for (c, name) in registry.names().iter().enumerate().skip(1) {
                let p = d.probabilities.get(c).copied().unwrap_or(0.0);
                scores.entry(name.clone()).or_default().push((p, label == c));
            }
            if d.class_id != 0 {
                preds.push(Prediction {
                    image_id: o.entry.id.clone(),
                    class: registry.name(d.class_id).unwrap_or("?").to_string(),
                    confidence: d.score,
                    bbox: d.proposal.bbox,
                });
            }
        }
    }
    evaluate(registry.items(), &preds, &truths, &scores, config.iou_min)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub metrics: EvalReport,
    pub proposals: ProposalQuality,
    pub errors: Vec<FileError>,
}

/// Extracts, classifies and scores every image; with `out`, writes
/// `detections.json`, `evaluation.json`, `pr.csv` and `roc.csv`.
pub fn run_evaluate(
    config: &PipelineConfig,
    manifest: &DatasetManifest,
    model: &dyn ProposalClassifier,
    out: Option<&Path>,
) -> Result<Evaluation> {
    let (outcomes, errors) = process_manifest(config, manifest, Some(model))?;
    let registry = model.registry();
    if registry.names() != manifest.registry()?.names() {
        return Err(Error::InvalidArgument(format!(
            "model classes {:?} differ from manifest classes {:?}",
            registry.items(),
            manifest.classes
        )));
    }
    let metrics = evaluate_outcomes(config, manifest, registry, &outcomes);
    let proposals = proposal_quality(&outcomes, registry, config.iou_min);
    if let Some(out) = out {
        create_dir(out)?;
        let report = build_report(&outcomes, errors.clone(), Some(registry));
        write_json(&report, &out.join("detections.json"))?;
        metrics.write_pr_csv(&out.join("pr.csv"))?;
        metrics.write_roc_csv(&out.join("roc.csv"))?;
        write_images(config, &outcomes, out)?;
    }
    let evaluation = Evaluation { metrics, proposals, errors };
    if let Some(out) = out {
        write_json(&evaluation, &out.join("evaluation.json"))?;
    }
    Ok(evaluation)
}
