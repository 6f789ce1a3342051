use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{DiffusionParams, EqualizeOptions, PatchGrid};
use crate::proposal::{ContourParams, ExtractParams, InpaintParams};
use crate::recognition::{FeatureSpec, TrainConfig};
use crate::tensor::{SelectionRule, TensorFamily};

/// Everything a run needs. Unknown keys are rejected; missing keys take
/// their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub k_count: usize,
    pub m_count: usize,
    pub max_passes: usize,
    pub selection: SelectionRule,
    /// Per-patch histogram equalization before extraction.
    pub enhance: bool,
    pub grid: PatchGrid,
    pub equalize: EqualizeOptions,
    pub diffusion: DiffusionParams,
    pub contour: ContourParams,
    pub inpaint: InpaintParams,
    pub dedup_iou: Option<f64>,
    pub classifier: Option<PathBuf>,
    pub features: FeatureSpec,
    pub train: TrainConfig,
    pub iou_min: f64,
    pub min_overlap_fraction: f64,
    pub seed: u64,
    /// Write every proposal crop as a PNG next to the report.
    pub write_crops: bool,
    pub write_overlays: bool,
    /// Repetitions per image when timing ablation cells.
    pub timing_runs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k_count: 4,
            m_count: 2,
            max_passes: 5,
            selection: SelectionRule::default(),
            enhance: true,
            grid: PatchGrid::default(),
            equalize: EqualizeOptions::default(),
            diffusion: DiffusionParams::default(),
            contour: ContourParams::default(),
            inpaint: InpaintParams::default(),
            dedup_iou: None,
            classifier: None,
            features: FeatureSpec::default(),
            train: TrainConfig::default(),
            iou_min: 0.5,
            min_overlap_fraction: 0.0,
            seed: 0,
            write_crops: false,
            write_overlays: true,
            timing_runs: 3,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        if let Some(p) = &cfg.classifier {
            if p.is_relative() {
                let base = path.parent().unwrap_or_else(|| Path::new("."));
                cfg.classifier = Some(base.join(p));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.k_count == 0 {
            return bad("k_count = 0 violates K >= 1".into());
        }
        if self.m_count == 0 {
            return bad("m_count = 0 violates M >= 1".into());
        }
        let family = TensorFamily::unique_count(self.k_count);
        if self.m_count > family {
            return bad(format!(
                "m_count = {} violates M <= K(K+1)/2 = {family} for K = {}",
                self.m_count, self.k_count
            ));
        }
        if self.max_passes == 0 {
            return bad("max_passes = 0 violates max_passes >= 1".into());
        }
        if self.grid.grid_rows == 0 || self.grid.grid_cols == 0 {
            return bad("grid dimensions must be at least 1".into());
        }
        if !(self.iou_min > 0.0 && self.iou_min <= 1.0) {
            return bad(format!("iou_min = {} violates 0 < iou_min <= 1", self.iou_min));
        }
        if !(0.0..=1.0).contains(&self.min_overlap_fraction) {
            return bad(format!(
                "min_overlap_fraction = {} outside [0, 1]",
                self.min_overlap_fraction
            ));
        }
        if let Some(t) = self.dedup_iou {
            if !(t > 0.0 && t <= 1.0) {
                return bad(format!("dedup_iou = {t} outside (0, 1]"));
            }
        }
        if self.timing_runs == 0 {
            return bad("timing_runs must be at least 1".into());
        }
        self.diffusion
            .validate()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        self.features
            .validate()
            .map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn extract_params(&self) -> ExtractParams {
        ExtractParams {
            k_count: self.k_count,
            m_count: self.m_count,
            max_passes: self.max_passes,
            selection: self.selection,
            diffusion: self.diffusion,
            contour: self.contour,
            inpaint: self.inpaint,
            dedup_iou: self.dedup_iou,
        }
    }
}
