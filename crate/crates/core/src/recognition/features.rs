//! Fixed crop features: resized standardized intensities and a histogram of
//! gradient magnitudes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{Plane, ScanImage, SobelPair};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    /// Crops are resized to `side x side`.
    pub side: usize,
    pub hist_bins: usize,
    /// Upper edge of the gradient histogram on the standardized crop;
    /// larger magnitudes land in the last bin.
    pub hist_max: f64,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            side: 32,
            hist_bins: 16,
            hist_max: 2.0,
        }
    }
}

impl FeatureSpec {
    pub fn dim(&self) -> usize {
        self.side * self.side + self.hist_bins
    }

    pub fn validate(&self) -> Result<()> {
        if self.side < 2 || self.hist_bins == 0 || !(self.hist_max > 0.0) {
            return Err(Error::InvalidArgument(format!("unusable feature spec {self:?}")));
        }
        Ok(())
    }
}

/// Bilinear resize with pixel centers aligned.
pub fn resize_bilinear(src: &Plane, rows: usize, cols: usize) -> Plane {
    let (sr, sc) = src.dims();
    let map = |i: usize, n: usize, sn: usize| -> (usize, usize, f64) {
        let x = ((i as f64 + 0.5) * sn as f64 / n as f64 - 0.5).clamp(0.0, (sn - 1) as f64);
        let x0 = x.floor() as usize;
        let x1 = (x0 + 1).min(sn - 1);
        (x0, x1, x - x0 as f64)
    };
    Plane::from_fn(rows, cols, |r, c| {
        let (r0, r1, fr) = map(r, rows, sr);
        let (c0, c1, fc) = map(c, cols, sc);
        let top = src.get(r0, c0) * (1.0 - fc) + src.get(r0, c1) * fc;
        let bottom = src.get(r1, c0) * (1.0 - fc) + src.get(r1, c1) * fc;
        top * (1.0 - fr) + bottom * fr
    })
}

pub fn extract_features(crop: &ScanImage, spec: &FeatureSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    if crop.rows() == 0 || crop.cols() == 0 {
        return Err(Error::InvalidImage("empty crop".into()));
    }
    let small = resize_bilinear(crop.plane(), spec.side, spec.side);
    let n = (spec.side * spec.side) as f64;
    let mean = small.as_slice().iter().sum::<f64>() / n;
    let var = small.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    let scale = if sd > 1e-12 { 1.0 / sd } else { 0.0 };
    let standardized = small.map(|v| (v - mean) * scale);

    let mut out = Vec::with_capacity(spec.dim());
    out.extend(standardized.as_slice().iter().map(|v| v / spec.side as f64));
    let mut hist = vec![0.0; spec.hist_bins];
    let magnitude = SobelPair::of(&standardized).magnitude();
    for &m in magnitude.as_slice() {
        let bin = ((m / spec.hist_max) * spec.hist_bins as f64) as usize;
        hist[bin.min(spec.hist_bins - 1)] += 1.0 / n;
    }
    out.extend(hist);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_and_histogram_mass() {
        let crop = ScanImage::from_plane(Plane::from_fn(20, 13, |r, c| ((r * 7 + c * 3) % 50) as f64), 256).unwrap();
        let spec = FeatureSpec::default();
        let f = extract_features(&crop, &spec).unwrap();
        assert_eq!(f.len(), 1040);
        let hist: f64 = f[1024..].iter().sum();
        assert!((hist - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_crop_has_zero_intensity_part() {
        let crop = ScanImage::constant(5, 9, 256, 40.0).unwrap();
        let f = extract_features(&crop, &FeatureSpec::default()).unwrap();
        assert!(f[..1024].iter().all(|&v| v == 0.0));
        assert_eq!(f[1024], 1.0);
    }

    #[test]
    fn resize_identity_and_constant() {
        let p = Plane::from_fn(6, 4, |r, c| (r * 4 + c) as f64);
        assert_eq!(resize_bilinear(&p, 6, 4), p);
        let k = Plane::filled(3, 7, 2.5);
        assert!(resize_bilinear(&k, 32, 32).as_slice().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn contrast_invariance() {
        let p = Plane::from_fn(16, 16, |r, c| if (4..12).contains(&r) && (4..12).contains(&c) { 50.0 } else { 150.0 });
        let a = ScanImage::from_plane(p.clone(), 256).unwrap();
        let b = ScanImage::from_plane(p.map(|v| 0.5 * v + 20.0), 256).unwrap();
        let spec = FeatureSpec::default();
        let (fa, fb) = (extract_features(&a, &spec).unwrap(), extract_features(&b, &spec).unwrap());
        for (x, y) in fa.iter().zip(&fb) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
