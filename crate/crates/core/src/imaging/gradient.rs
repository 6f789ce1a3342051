//! Oriented first-derivative responses.

use std::f64::consts::PI;

use super::scan::{Plane, ScanImage};
use crate::error::{Error, Result};

/// A directional derivative of an image at one orientation.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    pub orientation: f64,
    pub values: Plane,
}

/// Horizontal and vertical Sobel responses, scaled by 1/8 so that a unit
/// ramp yields a unit response. Borders replicate the edge pixels.
#[derive(Clone, Debug)]
pub struct SobelPair {
    pub gx: Plane,
    pub gy: Plane,
}

impl SobelPair {
    pub fn of(plane: &Plane) -> Self {
        let (rows, cols) = plane.dims();
        let mut gx = Plane::zeros(rows, cols);
        let mut gy = Plane::zeros(rows, cols);
        for r in 0..rows as isize {
            for c in 0..cols as isize {
                let p = |dr: isize, dc: isize| plane.get_clamped(r + dr, c + dc);
                let x = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
                let y = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
                gx.set(r as usize, c as usize, x / 8.0);
                gy.set(r as usize, c as usize, y / 8.0);
            }
        }
        SobelPair { gx, gy }
    }

    /// Steers the pair to orientation `theta`: `cos(theta) gx + sin(theta) gy`.
    pub fn steer(&self, theta: f64) -> GradientField {
        let (cs, sn) = unit_direction(theta);
        let values = Plane::from_vec(
            self.gx.rows(),
            self.gx.cols(),
            self.gx
                .as_slice()
                .iter()
                .zip(self.gy.as_slice())
                .map(|(x, y)| cs * x + sn * y)
                .collect(),
        )
        .expect("sobel planes share dimensions");
        GradientField {
            orientation: theta,
            values,
        }
    }

    /// Gradient magnitude `sqrt(gx^2 + gy^2)`.
    pub fn magnitude(&self) -> Plane {
        Plane::from_vec(
            self.gx.rows(),
            self.gx.cols(),
            self.gx
                .as_slice()
                .iter()
                .zip(self.gy.as_slice())
                .map(|(x, y)| x.hypot(*y))
                .collect(),
        )
        .expect("sobel planes share dimensions")
    }
}

/// `(cos, sin)` of `theta` with round-off below 1e-12 snapped to zero, so
/// that multiples of pi/2 steer exactly onto the axes and antipodal
/// orientations give exact negations.
pub fn unit_direction(theta: f64) -> (f64, f64) {
    let snap = |v: f64| if v.abs() < 1e-12 { 0.0 } else { v };
    (snap(theta.cos()), snap(theta.sin()))
}

/// Directional derivative of `img` along `theta` (radians, in `[0, 2pi)`).
pub fn directional_gradient(img: &ScanImage, theta: f64) -> Result<GradientField> {
    if !theta.is_finite() || !(0.0..2.0 * PI).contains(&theta) {
        return Err(Error::InvalidArgument(format!(
            "orientation {theta} outside [0, 2pi)"
        )));
    }
    Ok(SobelPair::of(img.plane()).steer(theta))
}

/// The `K` gradient orientations `2 pi k / K`, `k = 0..K-1`, ascending.
pub fn orientation_set(k_count: usize) -> Result<Vec<f64>> {
    if k_count == 0 {
        return Err(Error::InvalidArgument(
            "orientation count must be at least 1".into(),
        ));
    }
    Ok((0..k_count)
        .map(|k| 2.0 * PI * k as f64 / k_count as f64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Direct 3x3 correlation with replicate borders, used as an oracle.
    fn correlate(px: &[Vec<f64>], kernel: [[f64; 3]; 3]) -> Vec<Vec<f64>> {
        let rows = px.len() as isize;
        let cols = px[0].len() as isize;
        let at = |r: isize, c: isize| px[r.clamp(0, rows - 1) as usize][c.clamp(0, cols - 1) as usize];
        (0..rows)
            .map(|r| {
                (0..cols)
                    .map(|c| {
                        let mut acc = 0.0;
                        for (i, krow) in kernel.iter().enumerate() {
                            for (j, k) in krow.iter().enumerate() {
                                acc += k * at(r + i as isize - 1, c + j as isize - 1);
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }

    fn step_image() -> (ScanImage, Vec<Vec<f64>>) {
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..5).map(|c| if c >= 2 { 8.0 } else { 0.0 }).collect())
            .collect();
        let flat = rows.iter().flatten().copied().collect();
        (ScanImage::new(5, 5, 256, flat).unwrap(), rows)
    }

    #[test]
    fn constant_image_has_zero_gradient() {
        let img = ScanImage::constant(6, 7, 256, 42.0).unwrap();
        for theta in orientation_set(4).unwrap() {
            let g = directional_gradient(&img, theta).unwrap();
            assert!(g.values.as_slice().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn vertical_step_matches_kernel_oracle() {
        let (img, rows) = step_image();
        let sobel_x = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
        let sobel_y = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
        let ox = correlate(&rows, sobel_x);
        let oy = correlate(&rows, sobel_y);

        let g0 = directional_gradient(&img, 0.0).unwrap();
        let g90 = directional_gradient(&img, PI / 2.0).unwrap();
        for r in 0..5 {
            for c in 0..5 {
                assert_abs_diff_eq!(g0.values.get(r, c), ox[r][c] / 8.0, epsilon = 1e-12);
                assert_abs_diff_eq!(g90.values.get(r, c), oy[r][c] / 8.0, epsilon = 1e-12);
            }
        }
        // Frozen oracle output: the step between columns 1 and 2 responds at
        // both columns with 8 * 4 / 8 = 4, nothing elsewhere.
        for r in 0..5 {
            let row: Vec<f64> = (0..5).map(|c| g0.values.get(r, c)).collect();
            assert_eq!(row, vec![0.0, 4.0, 4.0, 0.0, 0.0]);
            assert!((0..5).all(|c| g90.values.get(r, c) == 0.0));
        }
    }

    #[test]
    fn orientation_sets() {
        assert_eq!(orientation_set(1).unwrap(), vec![0.0]);
        assert_eq!(orientation_set(2).unwrap(), vec![0.0, PI]);
        let four = orientation_set(4).unwrap();
        let expect = [0.0, PI / 2.0, PI, 3.0 * PI / 2.0];
        for (a, b) in four.iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert!(orientation_set(0).is_err());
    }

    #[test]
    fn rejects_out_of_range_orientation() {
        let (img, _) = step_image();
        assert!(directional_gradient(&img, 2.0 * PI).is_err());
        assert!(directional_gradient(&img, -0.1).is_err());
        assert!(directional_gradient(&img, f64::NAN).is_err());
    }

    fn arb_image() -> impl Strategy<Value = ScanImage> {
        (2usize..7, 2usize..7).prop_flat_map(|(r, c)| {
            proptest::collection::vec(0.0f64..255.0, r * c)
                .prop_map(move |px| ScanImage::new(r, c, 256, px).unwrap())
        })
    }

    proptest! {
        #[test]
        fn antipodal_orientations_negate(img in arb_image(), theta in 0.0f64..PI) {
            let a = directional_gradient(&img, theta).unwrap();
            let b = directional_gradient(&img, theta + PI).unwrap();
            for (x, y) in a.values.as_slice().iter().zip(b.values.as_slice()) {
                prop_assert!((x + y).abs() <= 1e-9);
            }
        }

        #[test]
        fn gradient_is_linear(
            a in arb_image(),
            wa in -2.0f64..2.0,
            wb in -2.0f64..2.0,
            theta in 0.0f64..(2.0 * PI - 1e-9),
        ) {
            let b = a.plane().map(|v| 255.0 - v);
            let mixed = Plane::from_fn(a.rows(), a.cols(), |r, c| wa * a.plane().get(r, c) + wb * b.get(r, c));
            let ga = SobelPair::of(a.plane()).steer(theta);
            let gb = SobelPair::of(&b).steer(theta);
            let gm = SobelPair::of(&mixed).steer(theta);
            for i in 0..gm.values.as_slice().len() {
                let lhs = gm.values.as_slice()[i];
                let rhs = wa * ga.values.as_slice()[i] + wb * gb.values.as_slice()[i];
                prop_assert!((lhs - rhs).abs() <= 1e-9);
            }
        }

        #[test]
        fn orientation_set_spacing(k in 1usize..32) {
            let set = orientation_set(k).unwrap();
            prop_assert_eq!(set.len(), k);
            for w in set.windows(2) {
                prop_assert!((w[1] - w[0] - 2.0 * PI / k as f64).abs() < 1e-12);
            }
        }
    }
}
