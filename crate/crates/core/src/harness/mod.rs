//! Configuration, manifests, synthetic scenes and the batch commands.

mod ablation;
mod config;
mod manifest;
mod overlay;
mod pipeline;
mod synth;

pub use ablation::{run_ablation, AblationCell, AblationReport};
pub use config::PipelineConfig;
pub use manifest::{write_synthetic_corpus, DatasetManifest, ImageEntry, TruthEntry};
pub use overlay::{draw_box, overlay, PROPOSAL_COLOR, TRUTH_COLOR};
pub use pipeline::{
    build_report, configured_model, evaluate_outcomes, label_outcomes, prepare_scan,
    process_manifest, proposal_quality, run_classify, run_evaluate, run_extract, run_train,
    train_from_outcomes, write_json, Evaluation, FileError, ImageOutcome, ImageReport,
    ProposalQuality, ProposalRecord, RunReport, TrainSummary,
};
pub use synth::{make_synthetic, SceneShape, SceneSpec, ShapeKind, SyntheticScene};
