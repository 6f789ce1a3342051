use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned pixel rectangle covering rows `top..top+height` and columns
/// `left..left+width`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl BoundingBox {
    pub fn new(top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidArgument(format!(
                "bounding box {height}x{width} must be at least 1x1"
            )));
        }
        Ok(BoundingBox {
            top,
            left,
            height,
            width,
        })
    }

    /// Box spanning the inclusive extents `(r0, c0)..=(r1, c1)`.
    pub fn from_extents(r0: usize, c0: usize, r1: usize, c1: usize) -> Self {
        BoundingBox {
            top: r0,
            left: c0,
            height: r1 - r0 + 1,
            width: c1 - c0 + 1,
        }
    }

    #[inline]
    pub fn bottom(&self) -> usize {
        self.top + self.height
    }

    #[inline]
    pub fn right(&self) -> usize {
        self.left + self.width
    }

    #[inline]
    pub fn area(&self) -> usize {
        self.height * self.width
    }

    pub fn fits_in(&self, rows: usize, cols: usize) -> bool {
        self.height > 0 && self.width > 0 && self.bottom() <= rows && self.right() <= cols
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.top..self.bottom()).contains(&row) && (self.left..self.right()).contains(&col)
    }

    pub fn intersection(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let top = self.top.max(other.top);
        let left = self.left.max(other.left);
        let bottom = self.bottom().min(other.bottom());
        let right = self.right().min(other.right());
        (top < bottom && left < right).then(|| BoundingBox {
            top,
            left,
            height: bottom - top,
            width: right - left,
        })
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> usize {
        self.intersection(other).map_or(0, |b| b.area())
    }

    /// Scales every coordinate by `factor`.
    pub fn scaled(&self, factor: usize) -> BoundingBox {
        BoundingBox {
            top: self.top * factor,
            left: self.left * factor,
            height: self.height * factor,
            width: self.width * factor,
        }
    }
}
