//! Reading and writing scans as PNG/PGM.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use super::scan::{Plane, ScanImage};
use crate::error::{Error, Result};

fn decode_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Luminance of an RGB triple, `0.299 R + 0.587 G + 0.114 B`.
#[inline]
pub fn luminance(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

/// Converts a decoded image into a scan. 8-bit sources get 256 levels,
/// anything deeper gets 65536. Color is reduced to luminance.
pub fn from_dynamic(img: &DynamicImage) -> Result<ScanImage> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (levels, data): (u32, Vec<f64>) = match img {
        DynamicImage::ImageLuma8(buf) => (256, buf.pixels().map(|p| f64::from(p.0[0])).collect()),
        DynamicImage::ImageLumaA8(buf) => (256, buf.pixels().map(|p| f64::from(p.0[0])).collect()),
        DynamicImage::ImageLuma16(buf) => (65536, buf.pixels().map(|p| f64::from(p.0[0])).collect()),
        DynamicImage::ImageLumaA16(buf) => {
            (65536, buf.pixels().map(|p| f64::from(p.0[0])).collect())
        }
        DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) => {
            let rgb = img.to_rgb8();
            let data = rgb
                .pixels()
                .map(|p| {
                    luminance(f64::from(p.0[0]), f64::from(p.0[1]), f64::from(p.0[2])).round()
                })
                .collect();
            (256, data)
        }
        _ => {
            let rgb = img.to_rgb16();
            let data = rgb
                .pixels()
                .map(|p| {
                    luminance(f64::from(p.0[0]), f64::from(p.0[1]), f64::from(p.0[2])).round()
                })
                .collect();
            (65536, data)
        }
    };
    let top = f64::from(levels - 1);
    let data = data.into_iter().map(|v| v.min(top)).collect();
    ScanImage::new(h, w, levels, data)
}

/// Loads a PNG or PGM/PPM scan.
pub fn load_scan(path: &Path) -> Result<ScanImage> {
    let img = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| decode_err(path, e))?;
    from_dynamic(&img).map_err(|e| decode_err(path, e))
}

/// Quantizes a scan to integer levels: 8-bit when it has at most 256
/// levels, 16-bit otherwise.
pub fn to_dynamic(scan: &ScanImage) -> DynamicImage {
    let (w, h) = (scan.cols() as u32, scan.rows() as u32);
    if scan.max_level() <= 256 {
        let buf = ImageBuffer::from_fn(w, h, |x, y| {
            Luma([scan.get(y as usize, x as usize).round().clamp(0.0, 255.0) as u8])
        });
        DynamicImage::ImageLuma8(buf)
    } else {
        let top = f64::from(scan.max_level() - 1).min(65535.0);
        let buf = ImageBuffer::from_fn(w, h, |x, y| {
            Luma([scan.get(y as usize, x as usize).round().clamp(0.0, top) as u16])
        });
        DynamicImage::ImageLuma16(buf)
    }
}

/// Writes a scan; the format follows the file extension (`.png`, `.pgm`).
pub fn save_scan(scan: &ScanImage, path: &Path) -> Result<()> {
    to_dynamic(scan)
        .save(path)
        .map_err(|e| decode_err(path, e))
}

/// Writes a real-valued plane as a 16-bit PNG after min-max normalization.
/// A constant plane is written as all zeros.
pub fn save_plane_png16(plane: &Plane, path: &Path) -> Result<()> {
    let (lo, hi) = plane.min_max();
    let span = hi - lo;
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_fn(plane.cols() as u32, plane.rows() as u32, |x, y| {
            let v = plane.get(y as usize, x as usize);
            let n = if span > 0.0 { (v - lo) / span } else { 0.0 };
            Luma([(n * 65535.0).round() as u16])
        });
    buf.save(path).map_err(|e| decode_err(path, e))
}

/// An 8-bit RGB canvas initialized from a scan, for drawing overlays.
pub fn rgb_canvas(scan: &ScanImage) -> ImageBuffer<Rgb<u8>, Vec<u8>> {
    let scale = 255.0 / f64::from(scan.max_level() - 1);
    ImageBuffer::from_fn(scan.cols() as u32, scan.rows() as u32, |x, y| {
        let v = (scan.get(y as usize, x as usize) * scale).round().clamp(0.0, 255.0) as u8;
        Rgb([v, v, v])
    })
}
