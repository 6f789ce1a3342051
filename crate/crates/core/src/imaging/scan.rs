use crate::error::{Error, Result};

/// A dense row-major grid of `f64` values.
///
/// Every intermediate map in the pipeline (gradients, tensors, coherent maps)
/// lives in a `Plane`.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Plane {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidImage(format!(
                "{} values for a {rows}x{cols} plane",
                data.len()
            )));
        }
        Ok(Plane { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Plane { rows, cols, data }
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
    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    /// Value at `(row, col)` with indices clamped to the plane (replicate border).
    #[inline]
    pub fn get_clamped(&self, row: isize, col: isize) -> f64 {
        let r = row.clamp(0, self.rows as isize - 1) as usize;
        let c = col.clamp(0, self.cols as isize - 1) as usize;
        self.get(r, c)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise product. Panics if dimensions differ.
    pub fn mul(&self, other: &Plane) -> Plane {
        assert_eq!(self.dims(), other.dims(), "plane dimensions differ");
        Plane {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    /// Sum of squares, accumulated in row-major order.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn sub_plane(&self, top: usize, left: usize, height: usize, width: usize) -> Plane {
        Plane::from_fn(height, width, |r, c| self.get(top + r, left + c))
    }
}

/// A grayscale scan: intensities in `[0, max_level - 1]`.
///
/// Pixel values are stored as `f64` so that inpainted regions keep their
/// real-valued harmonic solution between passes; quantization to integer
/// levels only happens when an image is written out.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanImage {
    plane: Plane,
    max_level: u32,
}

impl ScanImage {
    pub fn new(rows: usize, cols: usize, max_level: u32, pixels: Vec<f64>) -> Result<Self> {
        let plane = Plane::from_vec(rows, cols, pixels)?;
        Self::from_plane(plane, max_level)
    }

    pub fn from_plane(plane: Plane, max_level: u32) -> Result<Self> {
        if plane.rows() == 0 || plane.cols() == 0 {
            return Err(Error::InvalidImage(format!(
                "empty image {}x{}",
                plane.rows(),
                plane.cols()
            )));
        }
        if max_level < 2 {
            return Err(Error::InvalidImage(format!(
                "max level {max_level} must be at least 2"
            )));
        }
        let top = f64::from(max_level - 1);
        if let Some(bad) = plane
            .as_slice()
            .iter()
            .find(|v| !v.is_finite() || **v < 0.0 || **v > top)
        {
            return Err(Error::InvalidImage(format!(
                "pixel value {bad} outside [0, {top}]"
            )));
        }
        Ok(ScanImage { plane, max_level })
    }

    /// Builds an image from arbitrary reals, clamping them into range.
    pub fn from_plane_clamped(plane: Plane, max_level: u32) -> Result<Self> {
        let top = f64::from(max_level.max(2) - 1);
        let plane = plane.map(|v| if v.is_finite() { v.clamp(0.0, top) } else { 0.0 });
        Self::from_plane(plane, max_level)
    }

    pub fn constant(rows: usize, cols: usize, max_level: u32, value: f64) -> Result<Self> {
        Self::from_plane(Plane::filled(rows, cols, value), max_level)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.plane.rows()
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.plane.cols()
    }

    #[inline]
    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.plane.get(row, col)
    }

    pub fn plane(&self) -> &Plane {
        &self.plane
    }

    pub fn pixels(&self) -> &[f64] {
        self.plane.as_slice()
    }

    pub fn into_plane(self) -> Plane {
        self.plane
    }

    /// Pixel level rounded to the nearest integer gray level.
    #[inline]
    pub fn level(&self, row: usize, col: usize) -> u32 {
        self.get(row, col).round() as u32
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 || top + height > self.rows() || left + width > self.cols() {
            return Err(Error::InvalidArgument(format!(
                "crop {height}x{width} at ({top},{left}) outside {}x{} image",
                self.rows(),
                self.cols()
            )));
        }
        Ok(ScanImage {
            plane: self.plane.sub_plane(top, left, height, width),
            max_level: self.max_level,
        })
    }

    /// Shifts every pixel by `delta`, clamping into range.
    pub fn shifted(&self, delta: f64) -> Result<Self> {
        Self::from_plane_clamped(self.plane.map(|v| v + delta), self.max_level)
    }
}
