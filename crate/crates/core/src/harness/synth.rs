//! Seeded synthetic scans: dark shapes on a bright background with blur and
//! additive noise, plus their exact ground-truth boxes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::iou;
use crate::geometry::BoundingBox;
use crate::imaging::{Plane, ScanImage};
use crate::tensor::gaussian_blur;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Square,
    Disc,
    Triangle,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 3] = [ShapeKind::Square, ShapeKind::Disc, ShapeKind::Triangle];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Square => "square",
            ShapeKind::Disc => "disc",
            ShapeKind::Triangle => "triangle",
        }
    }

    /// Whether the point `(y, x)`, in box-relative units of `[0, 1]^2`, lies
    /// inside the shape.
    fn covers(self, y: f64, x: f64) -> bool {
        match self {
            ShapeKind::Square => true,
            ShapeKind::Disc => (y - 0.5).powi(2) + (x - 0.5).powi(2) <= 0.25,
            // Apex at the top middle, base along the bottom edge.
            ShapeKind::Triangle => (x - 0.5).abs() <= 0.5 * y,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub rows: usize,
    pub cols: usize,
    pub background: f64,
    /// Edge contrast (gray levels below background) of each shape, in
    /// placement order. The number of entries is the shape count.
    pub contrasts: Vec<f64>,
    /// Fixed shape kinds; drawn at random when empty.
    pub kinds: Vec<ShapeKind>,
    pub size_min: usize,
    pub size_max: usize,
    /// Draw each shape no larger than the one placed before it.
    pub descending_sizes: bool,
    /// Largest IoU allowed between two truth boxes; 0 keeps them disjoint
    /// with at least `gap` pixels between them.
    pub overlap_fraction: f64,
    pub gap: usize,
    /// Distance kept from the image border.
    pub border: usize,
    pub blur_sigma: f64,
    pub noise_sigma: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            rows: 160,
            cols: 160,
            background: 200.0,
            contrasts: vec![100.0, 100.0, 100.0],
            kinds: Vec::new(),
            size_min: 36,
            size_max: 48,
            descending_sizes: false,
            overlap_fraction: 0.0,
            gap: 8,
            border: 6,
            blur_sigma: 1.0,
            noise_sigma: 2.0,
        }
    }
}

impl SceneSpec {
    /// A strong-edged square and a weak-edged disc no larger than it.
    pub fn two_contrast() -> Self {
        SceneSpec {
            contrasts: vec![120.0, 15.0],
            kinds: vec![ShapeKind::Square, ShapeKind::Disc],
            descending_sizes: true,
            ..SceneSpec::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScene(m));
        if self.contrasts.is_empty() {
            return bad("no shapes requested".into());
        }
        if !self.kinds.is_empty() && self.kinds.len() != self.contrasts.len() {
            return bad(format!(
                "{} kinds given for {} shapes",
                self.kinds.len(),
                self.contrasts.len()
            ));
        }
        if self.size_min < 3 || self.size_min > self.size_max {
            return bad(format!("size range {}..={} unusable", self.size_min, self.size_max));
        }
        let room = |n: usize| n.saturating_sub(2 * self.border);
        if self.size_max > room(self.rows) || self.size_max > room(self.cols) {
            return bad(format!(
                "shapes up to {} px cannot fit a {}x{} image with border {}",
                self.size_max, self.rows, self.cols, self.border
            ));
        }
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return bad(format!("overlap fraction {} outside [0, 1)", self.overlap_fraction));
        }
        if !(0.0..=255.0).contains(&self.background)
            || self.contrasts.iter().any(|&c| !(0.0..=255.0).contains(&c))
        {
            return bad("background and contrasts must lie in [0, 255]".into());
        }
        if self.blur_sigma < 0.0 || self.noise_sigma < 0.0 {
            return bad("blur and noise must be nonnegative".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneShape {
    pub kind: ShapeKind,
    pub bbox: BoundingBox,
    pub contrast: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticScene {
    pub image: ScanImage,
    pub shapes: Vec<SceneShape>,
    pub seed: u64,
}

const SUPERSAMPLE: usize = 4;
const PLACEMENT_ATTEMPTS: usize = 2000;

fn separated(a: &BoundingBox, b: &BoundingBox, gap: usize) -> bool {
    a.bottom() + gap <= b.top
        || b.bottom() + gap <= a.top
        || a.right() + gap <= b.left
        || b.right() + gap <= a.left
}

pub fn make_synthetic(seed: u64, spec: &SceneSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shapes: Vec<SceneShape> = Vec::with_capacity(spec.contrasts.len());
    for (i, &contrast) in spec.contrasts.iter().enumerate() {
        let kind = match spec.kinds.get(i) {
            Some(&k) => k,
            None => ShapeKind::ALL[rng.random_range(0..ShapeKind::ALL.len())],
        };
        let mut placed = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let cap = match shapes.last() {
                Some(prev) if spec.descending_sizes => prev.bbox.height,
                _ => spec.size_max,
            };
            let size = rng.random_range(spec.size_min..=cap);
            let top = rng.random_range(spec.border..=spec.rows - spec.border - size);
            let left = rng.random_range(spec.border..=spec.cols - spec.border - size);
            let bbox = BoundingBox::new(top, left, size, size)?;
            let fits = shapes.iter().all(|s| {
                if spec.overlap_fraction == 0.0 {
                    separated(&s.bbox, &bbox, spec.gap)
                } else {
                    iou(&s.bbox, &bbox) <= spec.overlap_fraction
                }
            });
            if fits {
                placed = Some(bbox);
                break;
            }
        }
        let bbox = placed.ok_or_else(|| {
            Error::InvalidScene(format!("could not place shape {} without violating the overlap limit", i + 1))
        })?;
        shapes.push(SceneShape { kind, bbox, contrast });
    }

    let mut plane = Plane::filled(spec.rows, spec.cols, spec.background);
    let sub = 1.0 / SUPERSAMPLE as f64;
    for s in &shapes {
        let b = s.bbox;
        let (h, w) = (b.height as f64, b.width as f64);
        for r in b.top..b.bottom() {
            for c in b.left..b.right() {
                let mut hits = 0usize;
                for i in 0..SUPERSAMPLE {
                    for j in 0..SUPERSAMPLE {
                        let y = ((r - b.top) as f64 + (i as f64 + 0.5) * sub) / h;
                        let x = ((c - b.left) as f64 + (j as f64 + 0.5) * sub) / w;
                        hits += usize::from(s.kind.covers(y, x));
                    }
                }
                let coverage = hits as f64 / (SUPERSAMPLE * SUPERSAMPLE) as f64;
                plane.set(r, c, plane.get(r, c) - s.contrast * coverage);
            }
        }
    }
    if spec.blur_sigma > 0.0 {
        plane = gaussian_blur(&plane, spec.blur_sigma);
    }
    if spec.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InvalidScene(e.to_string()))?;
        for v in plane.as_mut_slice() {
            *v += noise.sample(&mut rng);
        }
    }
    let plane = plane.map(|v| v.round().clamp(0.0, 255.0));
    Ok(SyntheticScene {
        image: ScanImage::from_plane(plane, 256)?,
        shapes,
        seed,
    })
}
