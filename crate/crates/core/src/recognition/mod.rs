//! Training labels for proposals, class balancing, and the pluggable
//! proposal classifier with its softmax-regression baseline.

mod balance;
mod classify;
mod features;
mod labeling;
mod model;

pub use balance::{balance_classes, balance_classes_to, Balanced};
pub use classify::{
    classify, decode_model, encode_model, load_model, save_model, train_baseline, Detection,
    ProposalClassifier, MODEL_VERSION,
};
pub use features::{extract_features, resize_bilinear, FeatureSpec};
pub use labeling::{assign_label, label_for_box, ClassRegistry, LabeledProposal, SourceRule, NORMAL};
pub use model::{
    cross_entropy, loss_and_gradient, softmax, train_on_features, CrossEntropy, SoftmaxModel,
    TrainConfig, TrainOutcome,
};
