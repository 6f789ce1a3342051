use image::{Rgb, RgbImage};

use crate::geometry::BoundingBox;
use crate::imaging::io::rgb_canvas;
use crate::imaging::ScanImage;

pub const PROPOSAL_COLOR: Rgb<u8> = Rgb([255, 0, 0]);
pub const TRUTH_COLOR: Rgb<u8> = Rgb([0, 255, 255]);

/// One-pixel outline of `b`, clipped to the canvas.
pub fn draw_box(canvas: &mut RgbImage, b: &BoundingBox, color: Rgb<u8>) {
    let (w, h) = (canvas.width() as usize, canvas.height() as usize);
    if b.top >= h || b.left >= w {
        return;
    }
    let bottom = (b.bottom() - 1).min(h - 1);
    let right = (b.right() - 1).min(w - 1);
    for c in b.left..=right {
        canvas.put_pixel(c as u32, b.top as u32, color);
        canvas.put_pixel(c as u32, bottom as u32, color);
    }
    for r in b.top..=bottom {
        canvas.put_pixel(b.left as u32, r as u32, color);
        canvas.put_pixel(right as u32, r as u32, color);
    }
}

/// The scan in gray with truths drawn first and proposals on top.
pub fn overlay(scan: &ScanImage, proposals: &[BoundingBox], truths: &[BoundingBox]) -> RgbImage {
    let mut canvas = rgb_canvas(scan);
    for t in truths {
        draw_box(&mut canvas, t, TRUTH_COLOR);
    }
    for p in proposals {
        draw_box(&mut canvas, p, PROPOSAL_COLOR);
    }
    canvas
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlay_keeps_dimensions_and_colors() {
        let scan = ScanImage::constant(20, 30, 256, 100.0).unwrap();
        let p = BoundingBox::new(2, 3, 5, 6).unwrap();
        let t = BoundingBox::new(10, 10, 20, 40).unwrap();
        let img = overlay(&scan, &[p], &[t]);
        assert_eq!((img.width(), img.height()), (30, 20));
        assert_eq!(*img.get_pixel(3, 2), PROPOSAL_COLOR);
        assert_eq!(*img.get_pixel(8, 6), PROPOSAL_COLOR);
        assert_eq!(*img.get_pixel(4, 4), Rgb([100, 100, 100]));
        assert_eq!(*img.get_pixel(29, 19), TRUTH_COLOR);
    }
}
