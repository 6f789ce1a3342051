//! Harmonic in-painting of a rectangle by solving the discrete Dirichlet
//! problem with successive over-relaxation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::imaging::{Plane, ScanImage};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InpaintParams {
    /// Upper bound on the relaxation factor. The solver uses the optimal
    /// factor for the box size when that is smaller.
    pub omega: f64,
    /// Stop once the max residual `|n u - sum(neighbors)|` falls below
    /// `tolerance * L`.
    pub tolerance: f64,
    /// Sweep budget per pixel of the box; at least `MIN_SWEEPS` are allowed.
    pub sweeps_per_pixel: usize,
}

impl Default for InpaintParams {
    fn default() -> Self {
        InpaintParams {
            omega: 1.9,
            tolerance: 1e-13,
            sweeps_per_pixel: 10,
        }
    }
}

const MIN_SWEEPS: usize = 100;

/// Solver diagnostics for one box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InpaintStats {
    pub sweeps: usize,
    pub residual: f64,
    pub converged: bool,
}

fn optimal_omega(box_: &BoundingBox, rows: usize, cols: usize) -> f64 {
    // Sides on the image border carry a reflecting condition, which behaves
    // like a box twice as long along that axis.
    let reflect_v = usize::from(box_.top == 0) + usize::from(box_.bottom() == rows);
    let reflect_h = usize::from(box_.left == 0) + usize::from(box_.right() == cols);
    let h = (box_.height * (1 + reflect_v)) as f64;
    let w = (box_.width * (1 + reflect_h)) as f64;
    let pi = std::f64::consts::PI;
    let jacobi = 0.5 * ((pi / (h + 1.0)).cos() + (pi / (w + 1.0)).cos());
    2.0 / (1.0 + (1.0 - jacobi * jacobi).max(0.0).sqrt())
}

/// Replaces the pixels of `box_` in `plane` with the discrete harmonic
/// function matching the ring of pixels just outside the box.
///
/// Sides of the box lying on the image border have no ring; there the
/// missing neighbor is the pixel itself (replicated edge), which amounts to a
/// zero-flux condition. A box covering the whole image has no boundary data
/// at all and is filled with its mean.
pub fn inpaint_in_place(
    plane: &mut Plane,
    box_: &BoundingBox,
    max_level: u32,
    params: &InpaintParams,
) -> Result<InpaintStats> {
    let (rows, cols) = plane.dims();
    if !box_.fits_in(rows, cols) {
        return Err(Error::InvalidArgument(format!(
            "box {box_:?} does not fit a {rows}x{cols} image"
        )));
    }
    if !(params.omega > 0.0 && params.omega < 2.0) {
        return Err(Error::InvalidArgument(format!(
            "relaxation factor {} outside (0, 2)",
            params.omega
        )));
    }
    let (top, left, h, w) = (box_.top, box_.left, box_.height, box_.width);
    let inside = |r: usize, c: usize| box_.contains(r, c);

    // Ring values, also used as the initial guess.
    let mut ring_sum = 0.0;
    let mut ring_n = 0usize;
    for r in top.saturating_sub(1)..(box_.bottom() + 1).min(rows) {
        for c in left.saturating_sub(1)..(box_.right() + 1).min(cols) {
            let edge_adjacent = (r + 1 == top || r == box_.bottom()) && (left..box_.right()).contains(&c)
                || (c + 1 == left || c == box_.right()) && (top..box_.bottom()).contains(&r);
            if !inside(r, c) && edge_adjacent {
                ring_sum += plane.get(r, c);
                ring_n += 1;
            }
        }
    }
    if ring_n == 0 {
        let mean = (top..box_.bottom())
            .flat_map(|r| (left..box_.right()).map(move |c| (r, c)))
            .map(|(r, c)| plane.get(r, c))
            .sum::<f64>()
            / box_.area() as f64;
        for r in top..box_.bottom() {
            for c in left..box_.right() {
                plane.set(r, c, mean);
            }
        }
        return Ok(InpaintStats {
            sweeps: 0,
            residual: 0.0,
            converged: true,
        });
    }
    let start = ring_sum / ring_n as f64;
    for r in top..box_.bottom() {
        for c in left..box_.right() {
            plane.set(r, c, start);
        }
    }

    let omega = optimal_omega(box_, rows, cols).min(params.omega);
    let tol = params.tolerance * f64::from(max_level);
    let max_sweeps = (params.sweeps_per_pixel * h * w).max(MIN_SWEEPS);

    // Neighbor count per pixel: out-of-image neighbors drop out of the
    // stencil, which is the zero-flux condition.
    let stencil = |plane: &Plane, r: usize, c: usize| -> (f64, f64) {
        let mut sum = 0.0;
        let mut n = 0.0;
        if r > 0 {
            sum += plane.get(r - 1, c);
            n += 1.0;
        }
        if r + 1 < rows {
            sum += plane.get(r + 1, c);
            n += 1.0;
        }
        if c > 0 {
            sum += plane.get(r, c - 1);
            n += 1.0;
        }
        if c + 1 < cols {
            sum += plane.get(r, c + 1);
            n += 1.0;
        }
        (sum, n)
    };
    let max_residual = |plane: &Plane| -> f64 {
        let mut worst = 0.0f64;
        for r in top..box_.bottom() {
            for c in left..box_.right() {
                let (sum, n) = stencil(plane, r, c);
                worst = worst.max((n * plane.get(r, c) - sum).abs());
            }
        }
        worst
    };

    let mut residual = max_residual(plane);
    let mut sweeps = 0;
    while residual > tol && sweeps < max_sweeps {
        for r in top..box_.bottom() {
            for c in left..box_.right() {
                let (sum, n) = stencil(plane, r, c);
                let u = plane.get(r, c);
                plane.set(r, c, (1.0 - omega) * u + omega * sum / n);
            }
        }
        sweeps += 1;
        residual = max_residual(plane);
    }
    if residual > tol {
        log::warn!("in-painting {box_:?} stopped at residual {residual:.3e} after {sweeps} sweeps");
    }
    Ok(InpaintStats {
        sweeps,
        residual,
        converged: residual <= tol,
    })
}

/// In-paints `box_` in a copy of `img`.
pub fn inpaint(img: &ScanImage, box_: &BoundingBox) -> Result<ScanImage> {
    inpaint_with(img, box_, &InpaintParams::default()).map(|(out, _)| out)
}

pub fn inpaint_with(
    img: &ScanImage,
    box_: &BoundingBox,
    params: &InpaintParams,
) -> Result<(ScanImage, InpaintStats)> {
    let mut plane = img.plane().clone();
    let stats = inpaint_in_place(&mut plane, box_, img.max_level(), params)?;
    Ok((ScanImage::from_plane_clamped(plane, img.max_level())?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_image_is_unchanged() {
        let img = ScanImage::constant(10, 10, 256, 77.0).unwrap();
        let out = inpaint(&img, &BoundingBox::new(3, 2, 4, 5).unwrap()).unwrap();
        for &v in out.pixels() {
            assert_abs_diff_eq!(v, 77.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn single_pixel_takes_neighbor_mean() {
        let plane = Plane::from_fn(5, 5, |r, c| (r * 5 + c) as f64 * 3.0);
        let img = ScanImage::from_plane(plane.clone(), 256).unwrap();
        let out = inpaint(&img, &BoundingBox::new(2, 2, 1, 1).unwrap()).unwrap();
        let mean = (plane.get(1, 2) + plane.get(3, 2) + plane.get(2, 1) + plane.get(2, 3)) / 4.0;
        assert_abs_diff_eq!(out.get(2, 2), mean, epsilon = 1e-9);
    }

    #[test]
    fn linear_ramp_is_reproduced() {
        let plane = Plane::from_fn(20, 24, |r, c| 10.0 + 2.0 * r as f64 + 3.0 * c as f64);
        let mut scrambled = plane.clone();
        let b = BoundingBox::new(4, 5, 9, 11).unwrap();
        for r in 4..13 {
            for c in 5..16 {
                scrambled.set(r, c, 200.0);
            }
        }
        let img = ScanImage::from_plane(scrambled, 256).unwrap();
        let out = inpaint(&img, &b).unwrap();
        for r in 0..20 {
            for c in 0..24 {
                assert_abs_diff_eq!(out.get(r, c), plane.get(r, c), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn outside_pixels_are_bitwise_unchanged() {
        let plane = Plane::from_fn(12, 12, |r, c| ((r * 31 + c * 17) % 97) as f64);
        let img = ScanImage::from_plane(plane, 256).unwrap();
        let b = BoundingBox::new(3, 4, 5, 6).unwrap();
        let out = inpaint(&img, &b).unwrap();
        for r in 0..12 {
            for c in 0..12 {
                if !b.contains(r, c) {
                    assert_eq!(out.get(r, c).to_bits(), img.get(r, c).to_bits());
                }
            }
        }
    }

    #[test]
    fn border_boxes_use_reflecting_sides() {
        // Columns form a ramp; a box on the top-left corner only sees the
        // ramp through its right and bottom rings.
        let plane = Plane::from_fn(10, 10, |_, c| 5.0 * c as f64);
        let mut scrambled = plane.clone();
        for r in 0..4 {
            for c in 0..4 {
                scrambled.set(r, c, 0.0);
            }
        }
        let img = ScanImage::from_plane(scrambled, 256).unwrap();
        let (out, stats) = inpaint_with(&img, &BoundingBox::new(0, 0, 4, 4).unwrap(), &Default::default()).unwrap();
        assert!(stats.converged);
        for r in 0..4 {
            for c in 0..3 {
                assert!(out.get(r, c) <= out.get(r, c + 1) + 1e-9);
            }
        }

        let full = inpaint(&img, &BoundingBox::new(0, 0, 10, 10).unwrap()).unwrap();
        let mean = img.pixels().iter().sum::<f64>() / 100.0;
        assert!(full.pixels().iter().all(|&v| (v - mean).abs() < 1e-9));
    }

    #[test]
    fn rejects_boxes_outside_the_image() {
        let img = ScanImage::constant(5, 5, 256, 1.0).unwrap();
        assert!(inpaint(&img, &BoundingBox::new(3, 3, 3, 1).unwrap()).is_err());
    }
}
