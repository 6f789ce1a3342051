//! Proposal extraction: contour maps, component labeling, bounding boxes,
//! Dirichlet in-painting and the multi-pass loop tying them together.

mod contour;
mod extract;
mod inpaint;
mod label;

pub use contour::{contour_map, otsu_bin, otsu_threshold, BinaryMap, ContourParams, OTSU_BINS};
pub use extract::{extract_proposals, ExtractParams, ExtractionResult, Proposal, Termination};
pub use inpaint::{inpaint, inpaint_in_place, inpaint_with, InpaintParams, InpaintStats};
pub use label::{bounding_box, label_components, LabelMap};
