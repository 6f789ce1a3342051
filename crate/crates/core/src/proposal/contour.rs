//! Binarization and morphological cleanup of the coherent map.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::label::label_components;
use crate::tensor::CoherentMap;

/// A boolean image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMap {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl BinaryMap {
    pub fn empty(rows: usize, cols: usize) -> Self {
        BinaryMap {
            rows,
            cols,
            data: vec![false; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        BinaryMap { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: bool) {
        self.data[row * self.cols + col] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    fn cross_neighbors(&self, r: usize, c: usize) -> impl Iterator<Item = (usize, usize)> {
        let (rows, cols) = (self.rows, self.cols);
        [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)]
            .into_iter()
            .filter_map(move |(dr, dc)| {
                let nr = r as isize + dr;
                let nc = c as isize + dc;
                (nr >= 0 && nc >= 0 && (nr as usize) < rows && (nc as usize) < cols)
                    .then_some((nr as usize, nc as usize))
            })
    }

    /// Erosion by the 3x3 cross. Neighbors outside the image are ignored.
    pub fn erode_cross(&self) -> BinaryMap {
        BinaryMap::from_fn(self.rows, self.cols, |r, c| {
            self.get(r, c) && self.cross_neighbors(r, c).all(|(nr, nc)| self.get(nr, nc))
        })
    }

    /// Dilation by the 3x3 cross.
    pub fn dilate_cross(&self) -> BinaryMap {
        BinaryMap::from_fn(self.rows, self.cols, |r, c| {
            self.get(r, c) || self.cross_neighbors(r, c).any(|(nr, nc)| self.get(nr, nc))
        })
    }

    pub fn open_cross(&self) -> BinaryMap {
        self.erode_cross().dilate_cross()
    }

    pub fn close_cross(&self) -> BinaryMap {
        self.dilate_cross().erode_cross()
    }

    /// Sets every background pixel that is not 4-connected to the image
    /// border, i.e. the holes enclosed by 8-connected foreground.
    pub fn fill_holes(&self) -> BinaryMap {
        let mut outside = vec![false; self.data.len()];
        let mut queue = VecDeque::new();
        let seed = |r: usize, c: usize, outside: &mut Vec<bool>, q: &mut VecDeque<(usize, usize)>| {
            let i = r * self.cols + c;
            if !self.data[i] && !outside[i] {
                outside[i] = true;
                q.push_back((r, c));
            }
        };
        for c in 0..self.cols {
            seed(0, c, &mut outside, &mut queue);
            seed(self.rows - 1, c, &mut outside, &mut queue);
        }
        for r in 0..self.rows {
            seed(r, 0, &mut outside, &mut queue);
            seed(r, self.cols - 1, &mut outside, &mut queue);
        }
        while let Some((r, c)) = queue.pop_front() {
            for (nr, nc) in self.cross_neighbors(r, c) {
                seed(nr, nc, &mut outside, &mut queue);
            }
        }
        BinaryMap {
            rows: self.rows,
            cols: self.cols,
            data: outside.into_iter().map(|o| !o).collect(),
        }
    }

    /// Drops 8-connected components with fewer than `min_area` pixels.
    pub fn remove_small(&self, min_area: usize) -> BinaryMap {
        if min_area <= 1 {
            return self.clone();
        }
        let labels = label_components(self);
        let mut area = vec![0usize; labels.count() + 1];
        for &l in labels.as_slice() {
            area[l as usize] += 1;
        }
        BinaryMap {
            rows: self.rows,
            cols: self.cols,
            data: labels
                .as_slice()
                .iter()
                .map(|&l| l != 0 && area[l as usize] >= min_area)
                .collect(),
        }
    }
}

/// Number of histogram bins used for Otsu thresholding.
pub const OTSU_BINS: usize = 256;

/// Histogram bin of a value normalized to `[0, 1]`.
#[inline]
pub fn otsu_bin(v: f64) -> usize {
    ((v * OTSU_BINS as f64) as usize).min(OTSU_BINS - 1)
}

/// Otsu's threshold over a 256-bin histogram of values in `[0, 1]`.
///
/// Returns the bin index `k` maximizing the between-class variance of the
/// split `{bin <= k} | {bin > k}`; foreground is `bin > k`. Ties resolve to
/// the smallest `k`. `None` when every value lands in one bin.
pub fn otsu_threshold(values: &[f64]) -> Option<usize> {
    let mut hist = [0u64; OTSU_BINS];
    for &v in values {
        hist[otsu_bin(v)] += 1;
    }
    let total = values.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &h)| i as f64 * h as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let mut best: Option<(usize, f64)> = None;
    for (k, &h) in hist.iter().enumerate().take(OTSU_BINS - 1) {
        w0 += h as f64;
        sum0 += k as f64 * h as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if best.is_none_or(|(_, b)| between > b) {
            best = Some((k, between));
        }
    }
    best.map(|(k, _)| k)
}

/// Parameters turning a coherent map into a contour map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContourParams {
    /// Components smaller than this (in pixels) are removed.
    pub area_min: usize,
    /// Floor on the per-tensor energy `Im / M` below which a pixel is never
    /// foreground, in squared gray levels of an 8-bit scan. This is what
    /// makes a map without object transitions come out empty.
    pub energy_floor: f64,
    /// Fill regions enclosed by a closed contour before opening.
    pub fill_holes: bool,
    /// Close one-pixel gaps (a cross closing) before filling, so contours
    /// meeting only diagonally, as at a sharp corner, still enclose.
    pub close_gaps: bool,
}

impl Default for ContourParams {
    fn default() -> Self {
        ContourParams {
            area_min: 32,
            energy_floor: 4.0,
            fill_holes: true,
            close_gaps: true,
        }
    }
}

/// Binarizes a coherent map: min-max normalization, Otsu threshold (gated by
/// the absolute energy floor), hole filling, one 3x3 cross opening, and
/// removal of components below `area_min`.
///
/// `floor_scale` multiplies `energy_floor`; use `((L - 1) / 255)^2` for a
/// scan with `L` gray levels.
pub fn contour_map(coherent: &CoherentMap, params: &ContourParams, floor_scale: f64) -> BinaryMap {
    let values = &coherent.values;
    let (rows, cols) = values.dims();
    let (lo, hi) = values.min_max();
    if !(hi > lo) || !hi.is_finite() || !lo.is_finite() {
        return BinaryMap::empty(rows, cols);
    }
    let span = hi - lo;
    let normalized: Vec<f64> = values.as_slice().iter().map(|v| (v - lo) / span).collect();
    let Some(k) = otsu_threshold(&normalized) else {
        return BinaryMap::empty(rows, cols);
    };
    let floor = params.energy_floor * floor_scale * coherent.m_count.max(1) as f64;
    let raw = values.as_slice();
    let mut binary = BinaryMap {
        rows,
        cols,
        data: normalized
            .iter()
            .zip(raw)
            .map(|(&n, &v)| otsu_bin(n) > k && v >= floor)
            .collect(),
    };
    if params.close_gaps {
        binary = binary.close_cross();
    }
    if params.fill_holes {
        binary = binary.fill_holes();
    }
    binary.open_cross().remove_small(params.area_min)
}
