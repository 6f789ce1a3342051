//! Object proposals for grayscale scans from cascaded structure tensors.
//!
//! The pipeline enhances contrast per patch, builds the family of
//! orientation-pair gradient tensors, fuses the strongest into a coherent
//! map, and repeatedly extracts and in-paints the components it finds.
//! Proposals are then labeled and classified, and detections scored with
//! the usual AP/mAP/ROC metrics.

pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod harness;
pub mod imaging;
pub mod proposal;
pub mod recognition;
pub mod tensor;

pub use error::{Error, Result};
pub use geometry::BoundingBox;
