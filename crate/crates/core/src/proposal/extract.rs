//! The multi-pass extraction loop.

use serde::{Deserialize, Serialize};

use super::contour::{contour_map, ContourParams};
use super::inpaint::{inpaint_in_place, InpaintParams};
use super::label::label_components;
use crate::error::{Error, Result};
use crate::evaluation::iou;
use crate::geometry::BoundingBox;
use crate::imaging::{DiffusionParams, ScanImage};
use crate::tensor::{build_family, select_coherent, SelectionRule, TensorFamily};

/// A cropped region hypothesized to hold one object.
#[derive(Clone, Debug, PartialEq)]
pub struct Proposal {
    pub bbox: BoundingBox,
    pub crop: ScanImage,
    /// 1-based pass of the extraction loop that produced it.
    pub pass_index: usize,
    /// Component label within that pass's contour map.
    pub contour_label: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    EmptyMap,
    MaxPasses,
}

#[derive(Clone, Debug)]
pub struct ExtractionResult {
    pub proposals: Vec<Proposal>,
    pub passes_run: usize,
    pub terminated_by: Termination,
    /// Foreground pixel count of the contour map of each pass.
    pub foreground_per_pass: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractParams {
    pub k_count: usize,
    pub m_count: usize,
    pub max_passes: usize,
    pub selection: SelectionRule,
    pub diffusion: DiffusionParams,
    pub contour: ContourParams,
    pub inpaint: InpaintParams,
    /// Drop a proposal whose IoU with an earlier one reaches this value.
    pub dedup_iou: Option<f64>,
}

impl Default for ExtractParams {
    fn default() -> Self {
        ExtractParams {
            k_count: 4,
            m_count: 2,
            max_passes: 5,
            selection: SelectionRule::default(),
            diffusion: DiffusionParams::default(),
            contour: ContourParams::default(),
            inpaint: InpaintParams::default(),
            dedup_iou: None,
        }
    }
}

impl ExtractParams {
    pub fn validate(&self) -> Result<()> {
        if self.k_count == 0 {
            return Err(Error::InvalidConfig("K must be at least 1".into()));
        }
        let family = TensorFamily::unique_count(self.k_count);
        if self.m_count == 0 || self.m_count > family {
            return Err(Error::InvalidConfig(format!(
                "M = {} must lie in [1, K(K+1)/2 = {family}]",
                self.m_count
            )));
        }
        if self.max_passes == 0 {
            return Err(Error::InvalidConfig("max passes must be at least 1".into()));
        }
        self.diffusion.validate()
    }
}

/// Runs the extraction loop: build tensors, fuse the coherent map, binarize,
/// label, crop every component and in-paint its box, until a contour map
/// comes out empty or `max_passes` is reached.
///
/// Crops of one pass are all taken before any of its boxes is in-painted;
/// boxes are then in-painted in ascending label order.
pub fn extract_proposals(img: &ScanImage, params: &ExtractParams) -> Result<ExtractionResult> {
    params.validate()?;
    let mut work = img.clone();
    let mut proposals: Vec<Proposal> = Vec::new();
    let mut foreground_per_pass = Vec::new();
    let scale = f64::from(img.max_level() - 1) / 255.0;
    let floor_scale = scale * scale;
    let mut terminated_by = Termination::MaxPasses;
    let mut passes_run = 0;

    for pass in 1..=params.max_passes {
        passes_run = pass;
        let family = build_family(&work, params.k_count, &params.diffusion)?;
        let coherent = select_coherent(&family, params.m_count, params.selection)?;
        drop(family);
        let binary = contour_map(&coherent, &params.contour, floor_scale);
        foreground_per_pass.push(binary.count());
        let labels = label_components(&binary);
        if labels.is_empty() {
            terminated_by = Termination::EmptyMap;
            break;
        }
        let boxes = labels.boxes();
        for (i, b) in boxes.iter().enumerate() {
            let crop = work.crop(b.top, b.left, b.height, b.width)?;
            let duplicate = params.dedup_iou.is_some_and(|t| {
                proposals.iter().any(|p| iou(&p.bbox, b) >= t)
            });
            if !duplicate {
                proposals.push(Proposal {
                    bbox: *b,
                    crop,
                    pass_index: pass,
                    contour_label: i + 1,
                });
            }
        }
        let mut plane = work.into_plane();
        for b in &boxes {
            inpaint_in_place(&mut plane, b, img.max_level(), &params.inpaint)?;
        }
        work = ScanImage::from_plane_clamped(plane, img.max_level())?;
    }

    Ok(ExtractionResult {
        proposals,
        passes_run,
        terminated_by,
        foreground_per_pass,
    })
}
