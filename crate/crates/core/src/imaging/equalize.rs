//! Per-patch adaptive histogram equalization.

use serde::{Deserialize, Serialize};

use super::scan::{Plane, ScanImage};
use crate::error::{Error, Result};

/// Splits an image into `grid_rows x grid_cols` rectangular patches.
///
/// Patch extents are `rows / grid_rows` (floor); the last patch row and
/// column absorb the remainder so the patches tile the image exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchGrid {
    pub grid_rows: usize,
    pub grid_cols: usize,
}

impl Default for PatchGrid {
    fn default() -> Self {
        PatchGrid {
            grid_rows: 8,
            grid_cols: 8,
        }
    }
}

/// Half-open pixel range `[start, end)` along one axis.
pub type Span = std::ops::Range<usize>;

impl PatchGrid {
    pub fn new(grid_rows: usize, grid_cols: usize) -> Self {
        PatchGrid {
            grid_rows,
            grid_cols,
        }
    }

    fn spans(len: usize, parts: usize) -> Vec<Span> {
        let base = len / parts;
        (0..parts)
            .map(|i| {
                let start = i * base;
                let end = if i + 1 == parts { len } else { start + base };
                start..end
            })
            .collect()
    }

    /// Row and column spans of every patch for an image of the given size.
    ///
    /// Fails when a patch would be empty (fewer pixels than grid cells along
    /// an axis) or the grid itself is empty.
    pub fn patches(&self, rows: usize, cols: usize) -> Result<Vec<(Span, Span)>> {
        if self.grid_rows == 0 || self.grid_cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "patch grid {}x{} has no cells",
                self.grid_rows, self.grid_cols
            )));
        }
        if rows < self.grid_rows || cols < self.grid_cols {
            return Err(Error::InvalidArgument(format!(
                "{}x{} grid leaves empty patches on a {rows}x{cols} image",
                self.grid_rows, self.grid_cols
            )));
        }
        let row_spans = Self::spans(rows, self.grid_rows);
        let col_spans = Self::spans(cols, self.grid_cols);
        let mut out = Vec::with_capacity(row_spans.len() * col_spans.len());
        for rs in &row_spans {
            for cs in &col_spans {
                out.push((rs.clone(), cs.clone()));
            }
        }
        Ok(out)
    }
}

/// Options for [`enhance_contrast`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EqualizeOptions {
    /// Optional per-level count ceiling; excess counts are spread evenly
    /// over all levels before the cdf is formed. Off by default.
    pub clip_limit: Option<u32>,
    /// Use the whole-image pixel count `rows * cols` in the denominator
    /// instead of the patch pixel count.
    pub whole_image_denominator: bool,
}

/// Equalizes each patch of `img` independently through its cumulative
/// histogram:
///
/// `out(v) = round((cdf(v) - cdf_min) / (P - cdf_min) * (L - 1))`
///
/// where `cdf_min` is the smallest nonzero cdf value and `P` the patch pixel
/// count. A patch holding a single gray level has a zero denominator and is
/// passed through unchanged.
pub fn enhance_contrast(
    img: &ScanImage,
    grid: &PatchGrid,
    opts: &EqualizeOptions,
) -> Result<ScanImage> {
    let levels = img.max_level() as usize;
    let top = (levels - 1) as f64;
    let patches = grid.patches(img.rows(), img.cols())?;
    let mut out = Plane::zeros(img.rows(), img.cols());

    let mut hist = vec![0u64; levels];
    for (rs, cs) in patches {
        hist.iter_mut().for_each(|h| *h = 0);
        for r in rs.clone() {
            for c in cs.clone() {
                hist[img.level(r, c) as usize] += 1;
            }
        }
        let patch_count = (rs.len() * cs.len()) as u64;
        if let Some(limit) = opts.clip_limit {
            clip_histogram(&mut hist, u64::from(limit));
        }

        let mut cdf = vec![0u64; levels];
        let mut acc = 0u64;
        for (slot, h) in cdf.iter_mut().zip(&hist) {
            acc += h;
            *slot = acc;
        }
        let cdf_min = cdf.iter().copied().find(|&v| v > 0).unwrap_or(0);
        let total = if opts.whole_image_denominator {
            (img.rows() * img.cols()) as u64
        } else {
            acc
        };
        debug_assert!(opts.clip_limit.is_some() || acc == patch_count);
        let denom = total.saturating_sub(cdf_min);

        for r in rs.clone() {
            for c in cs.clone() {
                let v = img.level(r, c) as usize;
                let mapped = if denom == 0 {
                    img.get(r, c)
                } else {
                    let ratio = cdf[v].saturating_sub(cdf_min) as f64 / denom as f64;
                    (ratio * top).round().clamp(0.0, top)
                };
                out.set(r, c, mapped);
            }
        }
    }
    ScanImage::from_plane(out, img.max_level())
}

fn clip_histogram(hist: &mut [u64], limit: u64) {
    let limit = limit.max(1);
    let mut excess = 0u64;
    for h in hist.iter_mut() {
        if *h > limit {
            excess += *h - limit;
            *h = limit;
        }
    }
    let n = hist.len() as u64;
    let share = excess / n;
    let mut rest = excess % n;
    for h in hist.iter_mut() {
        *h += share;
        if rest > 0 {
            *h += 1;
            rest -= 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(rows: usize, cols: usize, levels: u32, px: &[f64]) -> ScanImage {
        ScanImage::new(rows, cols, levels, px.to_vec()).unwrap()
    }

    #[test]
    fn uniform_patch_is_fixed_point() {
        // cdf = [1,2,3,4], cdf_min = 1, denominator 3 -> levels map to 0,1,2,3.
        let img = image(2, 2, 4, &[0.0, 1.0, 2.0, 3.0]);
        let out = enhance_contrast(&img, &PatchGrid::new(1, 1), &Default::default()).unwrap();
        assert_eq!(out.pixels(), &[0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn constant_patch_maps_to_single_level() {
        let img = image(2, 2, 256, &[5.0; 4]);
        let out = enhance_contrast(&img, &PatchGrid::new(1, 1), &Default::default()).unwrap();
        assert!(out.pixels().iter().all(|&v| v == out.pixels()[0]));
    }

    #[test]
    fn two_level_patch_stretches_to_full_range() {
        let img = image(2, 2, 256, &[10.0, 10.0, 10.0, 20.0]);
        let out = enhance_contrast(&img, &PatchGrid::new(1, 1), &Default::default()).unwrap();
        assert_eq!(out.pixels(), &[0.0, 0.0, 0.0, 255.0]);
    }

    #[test]
    fn whole_image_denominator_compresses_small_patches() {
        // 4x4 image, 2x2 grid: patch [0,1,2,3] with denominator 16 - 1.
        let px: Vec<f64> = (0..16).map(|i| (i % 4) as f64).collect();
        let img = image(4, 4, 4, &px);
        let opts = EqualizeOptions {
            whole_image_denominator: true,
            ..Default::default()
        };
        let out = enhance_contrast(&img, &PatchGrid::new(2, 2), &opts).unwrap();
        assert!(out.pixels().iter().all(|&v| v <= 1.0));
    }

    #[test]
    fn empty_patches_are_rejected() {
        let img = image(2, 2, 4, &[0.0; 4]);
        assert!(enhance_contrast(&img, &PatchGrid::new(3, 1), &Default::default()).is_err());
        assert!(enhance_contrast(&img, &PatchGrid::new(0, 1), &Default::default()).is_err());
    }

    #[test]
    fn grid_tiles_exactly_with_remainder_in_last_patch() {
        let spans = PatchGrid::new(3, 2).patches(10, 7).unwrap();
        assert_eq!(spans.len(), 6);
        let area: usize = spans.iter().map(|(r, c)| r.len() * c.len()).sum();
        assert_eq!(area, 70);
        assert_eq!(spans[5].0, 6..10);
        assert_eq!(spans[5].1, 3..7);
    }

    #[test]
    fn clip_limit_preserves_total_count() {
        let mut hist = vec![10, 0, 0, 2];
        clip_histogram(&mut hist, 4);
        assert_eq!(hist.iter().sum::<u64>(), 12);
        assert_eq!(hist, vec![6, 2, 1, 3]);
    }
}
