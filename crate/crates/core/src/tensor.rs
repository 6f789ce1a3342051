//! Classic and multi-orientation structure tensors, and the coherent map
//! fused from the strongest tensors of a family.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{diffuse, orientation_set, DiffusionParams, Plane, ScanImage, SobelPair};

/// Per-pixel 2x2 second-moment matrix `[[xx, xy], [xy, yy]]`.
#[derive(Clone, Debug)]
pub struct ClassicTensor {
    pub xx: Plane,
    pub xy: Plane,
    pub yy: Plane,
}

impl ClassicTensor {
    /// Eigenvalues `(l1, l2)` with `l1 >= l2` at one pixel.
    pub fn eigenvalues(&self, row: usize, col: usize) -> (f64, f64) {
        sym2_eigenvalues(self.xx.get(row, col), self.xy.get(row, col), self.yy.get(row, col))
    }

    /// Coherence at every pixel.
    pub fn coherence_map(&self) -> Plane {
        Plane::from_fn(self.xx.rows(), self.xx.cols(), |r, c| {
            let (l1, l2) = self.eigenvalues(r, c);
            coherence(l1.max(0.0), l2.max(0.0))
        })
    }
}

/// Eigenvalues of a symmetric 2x2 matrix, larger first.
pub fn sym2_eigenvalues(a: f64, b: f64, d: f64) -> (f64, f64) {
    let mean = 0.5 * (a + d);
    let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    (mean + radius, mean - radius)
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable Gaussian blur with replicate borders.
pub fn gaussian_blur(plane: &Plane, sigma: f64) -> Plane {
    if sigma <= 0.0 {
        return plane.clone();
    }
    let k = gaussian_kernel(sigma);
    let radius = (k.len() / 2) as isize;
    let (rows, cols) = plane.dims();
    let horiz = Plane::from_fn(rows, cols, |r, c| {
        k.iter()
            .enumerate()
            .map(|(i, w)| w * plane.get_clamped(r as isize, c as isize + i as isize - radius))
            .sum()
    });
    Plane::from_fn(rows, cols, |r, c| {
        k.iter()
            .enumerate()
            .map(|(i, w)| w * horiz.get_clamped(r as isize + i as isize - radius, c as isize))
            .sum()
    })
}

/// The conventional structure tensor: outer product of the Sobel gradient
/// smoothed by a Gaussian window of standard deviation `sigma`.
pub fn classic_tensor(img: &ScanImage, sigma: f64) -> ClassicTensor {
    let g = SobelPair::of(img.plane());
    ClassicTensor {
        xx: gaussian_blur(&g.gx.mul(&g.gx), sigma),
        xy: gaussian_blur(&g.gx.mul(&g.gy), sigma),
        yy: gaussian_blur(&g.gy.mul(&g.gy), sigma),
    }
}

/// Coherence `((l1 - l2) / (l1 + l2))^2`, defined as 0 where both vanish.
pub fn coherence(lambda1: f64, lambda2: f64) -> f64 {
    let sum = lambda1 + lambda2;
    if sum <= 0.0 {
        return 0.0;
    }
    let c = ((lambda1 - lambda2) / sum).powi(2);
    c.clamp(0.0, 1.0)
}

/// One smoothed gradient product `phi * (grad_i . grad_j)`.
#[derive(Clone, Debug)]
pub struct TensorField {
    pub i_orient: usize,
    pub j_orient: usize,
    pub values: Plane,
    pub norm: f64,
}

/// The `K(K+1)/2` unique members (`i <= j`) of the symmetric K x K tensor.
#[derive(Clone, Debug)]
pub struct TensorFamily {
    pub k_count: usize,
    pub unique_fields: Vec<TensorField>,
}

impl TensorFamily {
    pub fn unique_count(k_count: usize) -> usize {
        k_count * (k_count + 1) / 2
    }

    /// The member for `(i, j)` in either order.
    pub fn get(&self, i: usize, j: usize) -> Option<&TensorField> {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.unique_fields
            .iter()
            .find(|f| f.i_orient == a && f.j_orient == b)
    }

    pub fn dims(&self) -> (usize, usize) {
        self.unique_fields[0].values.dims()
    }
}

/// Builds the tensor family of `img` for `k_count` orientations. Each member
/// is the elementwise product of two steered gradients, smoothed by
/// anisotropic diffusion.
pub fn build_family(
    img: &ScanImage,
    k_count: usize,
    smoothing: &DiffusionParams,
) -> Result<TensorFamily> {
    let thetas = orientation_set(k_count)?;
    smoothing.validate()?;
    let sobel = SobelPair::of(img.plane());
    let grads: Vec<Plane> = thetas.iter().map(|&t| sobel.steer(t).values).collect();
    let pairs: Vec<(usize, usize)> = (0..k_count)
        .flat_map(|i| (i..k_count).map(move |j| (i, j)))
        .collect();
    let unique_fields = pairs
        .par_iter()
        .map(|&(i, j)| {
            let values = diffuse(&grads[i].mul(&grads[j]), smoothing)?;
            let norm = values.frobenius_norm();
            Ok(TensorField {
                i_orient: i,
                j_orient: j,
                values,
                norm,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TensorFamily {
        k_count,
        unique_fields,
    })
}

/// How the `M` coherent tensors are picked and fused.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Rank by norm, but take one representative of each sign-equivalence
    /// class first; members that only repeat an already chosen tensor up to
    /// sign (antipodal orientations when K is even) are used only after
    /// every class is represented. Magnitudes are summed.
    #[default]
    DistinctFirst,
    /// Plain top-M by norm with a signed sum. With an even K the antipodal
    /// duplicates can cancel each other out entirely.
    NormRank,
}

/// The fused coherent map and the members that formed it, in selection order.
#[derive(Clone, Debug)]
pub struct CoherentMap {
    pub values: Plane,
    pub contributing: Vec<(usize, usize)>,
    pub m_count: usize,
}

/// Key identifying tensors that are equal up to sign. For even K,
/// orientation `i + K/2` is the negation of orientation `i`.
pub fn sign_class(k_count: usize, i: usize, j: usize) -> (usize, usize) {
    if k_count.is_multiple_of(2) {
        let h = k_count / 2;
        let (a, b) = (i % h, j % h);
        (a.min(b), a.max(b))
    } else {
        (i, j)
    }
}

/// Picks `m_count` members of `family` and fuses them. Norm ties are broken
/// by lexicographic `(i, j)`.
pub fn select_coherent(
    family: &TensorFamily,
    m_count: usize,
    rule: SelectionRule,
) -> Result<CoherentMap> {
    let total = family.unique_fields.len();
    if m_count == 0 || m_count > total {
        return Err(Error::InvalidArgument(format!(
            "coherent tensor count {m_count} outside [1, {total}]"
        )));
    }
    let mut ranked: Vec<&TensorField> = family.unique_fields.iter().collect();
    ranked.sort_by(|a, b| {
        b.norm
            .total_cmp(&a.norm)
            .then((a.i_orient, a.j_orient).cmp(&(b.i_orient, b.j_orient)))
    });

    let chosen: Vec<&TensorField> = match rule {
        SelectionRule::NormRank => ranked.into_iter().take(m_count).collect(),
        SelectionRule::DistinctFirst => {
            let mut seen = std::collections::BTreeSet::new();
            let (mut first, mut deferred) = (Vec::new(), Vec::new());
            for f in ranked {
                if seen.insert(sign_class(family.k_count, f.i_orient, f.j_orient)) {
                    first.push(f);
                } else {
                    deferred.push(f);
                }
            }
            first.into_iter().chain(deferred).take(m_count).collect()
        }
    };

    let (rows, cols) = family.dims();
    let mut values = Plane::zeros(rows, cols);
    for f in &chosen {
        let acc = values.as_mut_slice();
        match rule {
            SelectionRule::NormRank => {
                for (a, v) in acc.iter_mut().zip(f.values.as_slice()) {
                    *a += v;
                }
            }
            SelectionRule::DistinctFirst => {
                for (a, v) in acc.iter_mut().zip(f.values.as_slice()) {
                    *a += v.abs();
                }
            }
        }
    }
    Ok(CoherentMap {
        values,
        contributing: chosen.iter().map(|f| (f.i_orient, f.j_orient)).collect(),
        m_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square_scene(size: usize) -> ScanImage {
        let plane = Plane::from_fn(size, size, |r, c| {
            let inside = (size / 4..3 * size / 4).contains(&r) && (size / 4..3 * size / 4).contains(&c);
            if inside { 60.0 } else { 180.0 }
        });
        ScanImage::from_plane(plane, 256).unwrap()
    }

    fn field(i: usize, j: usize, v: f64) -> TensorField {
        let values = Plane::filled(2, 2, v);
        let norm = values.frobenius_norm();
        TensorField { i_orient: i, j_orient: j, values, norm }
    }

    #[test]
    fn coherence_examples() {
        assert_eq!(coherence(5.0, 5.0), 0.0);
        assert_abs_diff_eq!(coherence(3.0, 1.0), 0.25, epsilon = 1e-15);
        assert_eq!(coherence(4.0, 0.0), 1.0);
        assert_eq!(coherence(0.0, 0.0), 0.0);
    }

    #[test]
    fn classic_tensor_on_constant_image_is_zero() {
        let img = ScanImage::constant(8, 8, 256, 77.0).unwrap();
        let t = classic_tensor(&img, 1.0);
        for p in [&t.xx, &t.xy, &t.yy] {
            assert!(p.as_slice().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn classic_tensor_on_vertical_edge() {
        let plane = Plane::from_fn(12, 12, |_, c| if c < 6 { 20.0 } else { 220.0 });
        let img = ScanImage::from_plane(plane, 256).unwrap();
        let t = classic_tensor(&img, 1.0);
        // Oracle: the Sobel x response is 100 on columns 5 and 6 and zero
        // elsewhere, y response zero everywhere. Blurring 100^2 on two columns
        // with a normalized kernel leaves the two central samples at
        // 10000 * (w0 + w1) where w are the 1-D Gaussian weights.
        let k = gaussian_kernel(1.0);
        let mid = k.len() / 2;
        let expect = 10_000.0 * (k[mid] + k[mid + 1]);
        for r in 0..12 {
            assert_abs_diff_eq!(t.xx.get(r, 5), expect, epsilon = 1e-9);
            assert_abs_diff_eq!(t.xy.get(r, 5), 0.0, epsilon = 1e-12);
            assert!(t.xx.get(r, 5) > 1e3 * (t.yy.get(r, 5) + 1e-12));
        }
        let (l1, l2) = t.eigenvalues(6, 5);
        assert!(l1 > 0.0 && l2.abs() < 1e-9);
        assert_abs_diff_eq!(t.coherence_map().get(6, 5), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn family_sizes() {
        let img = square_scene(16);
        for k in 1..=6 {
            let fam = build_family(&img, k, &DiffusionParams::default()).unwrap();
            assert_eq!(fam.unique_fields.len(), k * (k + 1) / 2);
        }
        assert_eq!(build_family(&img, 3, &DiffusionParams::default()).unwrap().unique_fields.len(), 6);
        assert!(build_family(&img, 0, &DiffusionParams::default()).is_err());
    }

    #[test]
    fn family_lookup_is_symmetric() {
        let fam = build_family(&square_scene(16), 3, &DiffusionParams::default()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let a = fam.get(i, j).unwrap();
                let b = fam.get(j, i).unwrap();
                assert_eq!(a.values, b.values);
            }
        }
        let k1 = build_family(&square_scene(16), 1, &DiffusionParams::default()).unwrap();
        let sobel = SobelPair::of(square_scene(16).plane());
        let expect = diffuse(&sobel.gx.mul(&sobel.gx), &DiffusionParams::default()).unwrap();
        assert_eq!(k1.unique_fields[0].values, expect);
    }

    #[test]
    fn norms_match_values() {
        let fam = build_family(&square_scene(20), 4, &DiffusionParams::default()).unwrap();
        for f in &fam.unique_fields {
            let direct = f.values.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((f.norm - direct).abs() <= 1e-6 * direct.max(1.0));
        }
    }

    #[test]
    fn selects_top_norms() {
        let fam = TensorFamily {
            k_count: 3,
            unique_fields: vec![field(0, 0, 2.0), field(0, 1, 4.5), field(0, 2, 0.5)],
        };
        let map = select_coherent(&fam, 2, SelectionRule::NormRank).unwrap();
        assert_eq!(map.contributing, vec![(0, 1), (0, 0)]);
        assert!(map.values.as_slice().iter().all(|&v| v == 6.5));

        let all = select_coherent(&fam, 3, SelectionRule::NormRank).unwrap();
        assert!(all.values.as_slice().iter().all(|&v| v == 7.0));
        assert!(select_coherent(&fam, 0, SelectionRule::NormRank).is_err());
        assert!(select_coherent(&fam, 4, SelectionRule::NormRank).is_err());
    }

    #[test]
    fn ties_break_lexicographically() {
        let fam = TensorFamily {
            k_count: 3,
            unique_fields: vec![field(1, 2, 3.0), field(0, 2, 3.0), field(0, 1, 3.0)],
        };
        let map = select_coherent(&fam, 2, SelectionRule::NormRank).unwrap();
        assert_eq!(map.contributing, vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn constant_image_gives_zero_map() {
        let img = ScanImage::constant(10, 10, 256, 90.0).unwrap();
        let fam = build_family(&img, 3, &DiffusionParams::default()).unwrap();
        for m in 1..=6 {
            for rule in [SelectionRule::NormRank, SelectionRule::DistinctFirst] {
                let map = select_coherent(&fam, m, rule).unwrap();
                assert!(map.values.as_slice().iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn antipodal_duplicates_cancel_under_signed_ranking() {
        // K = 4: the (0,0) and (0,2) members are exact negations, and one of
        // the gradient axes always owns the two largest norms.
        let fam = build_family(&square_scene(24), 4, &DiffusionParams::default()).unwrap();
        let literal = select_coherent(&fam, 2, SelectionRule::NormRank).unwrap();
        assert!(literal.values.as_slice().iter().all(|&v| v == 0.0));

        let distinct = select_coherent(&fam, 2, SelectionRule::DistinctFirst).unwrap();
        let classes: Vec<_> = distinct
            .contributing
            .iter()
            .map(|&(i, j)| sign_class(4, i, j))
            .collect();
        assert_eq!(classes.len(), 2);
        assert_ne!(classes[0], classes[1]);
        assert!(distinct.values.as_slice().iter().any(|&v| v > 0.0));
    }

    #[test]
    fn distinct_first_falls_back_to_duplicates() {
        let fam = build_family(&square_scene(16), 2, &DiffusionParams::default()).unwrap();
        let map = select_coherent(&fam, 3, SelectionRule::DistinctFirst).unwrap();
        assert_eq!(map.contributing.len(), 3);
        let gx2 = &fam.get(0, 0).unwrap().values;
        for (a, b) in map.values.as_slice().iter().zip(gx2.as_slice()) {
            assert_abs_diff_eq!(*a, 3.0 * b.abs(), epsilon = 1e-9);
        }
    }

    #[test]
    fn coherence_of_random_psd_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let (a, b): (f64, f64) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let (c, d): (f64, f64) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            // G G^T is PSD.
            let (l1, l2) = sym2_eigenvalues(a * a + b * b, a * c + b * d, c * c + d * d);
            let coh = coherence(l1.max(0.0), l2.max(0.0));
            assert!((0.0..=1.0).contains(&coh));
        }
    }

    proptest! {
        #[test]
        fn selection_is_a_norm_ordered_permutation(
            norms in proptest::collection::vec(0.0f64..100.0, 10),
            m in 1usize..=10,
        ) {
            let mut fields = Vec::new();
            let mut idx = 0;
            for i in 0..4 {
                for j in i..4 {
                    fields.push(field(i, j, norms[idx]));
                    idx += 1;
                }
            }
            let fam = TensorFamily { k_count: 4, unique_fields: fields };
            let map = select_coherent(&fam, m, SelectionRule::NormRank).unwrap();
            prop_assert_eq!(map.contributing.len(), m);
            let set: std::collections::BTreeSet<_> = map.contributing.iter().collect();
            prop_assert_eq!(set.len(), m);
            let picked: Vec<f64> = map.contributing.iter().map(|&(i, j)| fam.get(i, j).unwrap().norm).collect();
            for w in picked.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }

            let distinct = select_coherent(&fam, m, SelectionRule::DistinctFirst).unwrap();
            let set: std::collections::BTreeSet<_> = distinct.contributing.iter().collect();
            prop_assert_eq!(set.len(), m);
        }

        #[test]
        fn intensity_shift_leaves_tensors_unchanged(shift in -40.0f64..40.0) {
            let base = Plane::from_fn(14, 14, |r, c| 100.0 + 30.0 * ((r * 3 + c * 5) % 7) as f64 / 7.0);
            let a = ScanImage::from_plane(base.clone(), 256).unwrap();
            let b = ScanImage::from_plane(base.map(|v| v + shift), 256).unwrap();
            let fa = build_family(&a, 3, &DiffusionParams::default()).unwrap();
            let fb = build_family(&b, 3, &DiffusionParams::default()).unwrap();
            for (x, y) in fa.unique_fields.iter().zip(&fb.unique_fields) {
                for (u, v) in x.values.as_slice().iter().zip(y.values.as_slice()) {
                    prop_assert!((u - v).abs() <= 1e-6);
                }
            }
        }
    }
}
