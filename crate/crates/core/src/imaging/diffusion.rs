//! Perona-Malik anisotropic diffusion.

use serde::{Deserialize, Serialize};

use super::scan::Plane;
use crate::error::{Error, Result};

/// Parameters of the explicit 4-neighbor diffusion scheme.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiffusionParams {
    pub iterations: usize,
    /// Edge threshold `kappa` of the conductance `exp(-(s / kappa)^2)`.
    pub conductance: f64,
    /// Time step; the scheme is stable up to 0.25.
    pub step: f64,
}

impl Default for DiffusionParams {
    fn default() -> Self {
        DiffusionParams {
            iterations: 10,
            conductance: 30.0,
            step: 0.2,
        }
    }
}

impl DiffusionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.conductance > 0.0) || !self.conductance.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "diffusion conductance {} must be positive",
                self.conductance
            )));
        }
        if !(self.step > 0.0) || self.step > 0.25 {
            return Err(Error::InvalidArgument(format!(
                "diffusion step {} must lie in (0, 0.25]",
                self.step
            )));
        }
        Ok(())
    }
}

#[inline]
fn conductance(diff: f64, kappa: f64) -> f64 {
    let s = diff / kappa;
    (-s * s).exp()
}

/// Smooths `field` while preserving strong edges.
///
/// Each iteration updates every pixel by `step * sum_n g(d_n) d_n` over its
/// four neighbors, `d_n` being the neighbor difference. Missing neighbors at
/// the border contribute no flux. Since `g <= 1` and `step <= 0.25` every
/// update is a convex combination, so the output stays within the input's
/// `[min, max]`.
pub fn diffuse(field: &Plane, params: &DiffusionParams) -> Result<Plane> {
    params.validate()?;
    let (rows, cols) = field.dims();
    let kappa = params.conductance;
    let mut cur = field.clone();
    let mut next = field.clone();
    for _ in 0..params.iterations {
        {
            let src = cur.as_slice();
            let dst = next.as_mut_slice();
            for r in 0..rows {
                for c in 0..cols {
                    let i = r * cols + c;
                    let u = src[i];
                    let mut flux = 0.0;
                    if r > 0 {
                        let d = src[i - cols] - u;
                        flux += conductance(d, kappa) * d;
                    }
                    if r + 1 < rows {
                        let d = src[i + cols] - u;
                        flux += conductance(d, kappa) * d;
                    }
                    if c > 0 {
                        let d = src[i - 1] - u;
                        flux += conductance(d, kappa) * d;
                    }
                    if c + 1 < cols {
                        let d = src[i + 1] - u;
                        flux += conductance(d, kappa) * d;
                    }
                    dst[i] = u + params.step * flux;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn variance(p: &Plane) -> f64 {
        let n = p.as_slice().len() as f64;
        let mean = p.as_slice().iter().sum::<f64>() / n;
        p.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
    }

    #[test]
    fn zero_iterations_is_identity() {
        let p = Plane::from_fn(4, 5, |r, c| (r * 7 + c * 3) as f64);
        let params = DiffusionParams {
            iterations: 0,
            ..Default::default()
        };
        assert_eq!(diffuse(&p, &params).unwrap(), p);
    }

    #[test]
    fn constant_field_is_unchanged() {
        let p = Plane::filled(6, 6, 17.5);
        assert_eq!(diffuse(&p, &DiffusionParams::default()).unwrap(), p);
    }

    #[test]
    fn noisy_flat_region_loses_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(100.0, 5.0).unwrap();
        let p = Plane::from_fn(32, 32, |_, _| noise.sample(&mut rng));
        let out = diffuse(&p, &DiffusionParams::default()).unwrap();
        let (vin, vout) = (variance(&p), variance(&out));
        assert!(vout < vin, "variance {vin} -> {vout}");
        assert!(vout < 0.25 * vin);
    }

    #[test]
    fn strong_edges_survive() {
        let p = Plane::from_fn(16, 16, |_, c| if c < 8 { 0.0 } else { 200.0 });
        let out = diffuse(&p, &DiffusionParams::default()).unwrap();
        assert!(out.get(8, 8) - out.get(8, 7) > 199.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        let p = Plane::zeros(2, 2);
        for (k, s) in [(0.0, 0.2), (-1.0, 0.2), (30.0, 0.0), (30.0, -0.1), (30.0, 0.3)] {
            let params = DiffusionParams {
                iterations: 1,
                conductance: k,
                step: s,
            };
            assert!(diffuse(&p, &params).is_err(), "kappa={k} step={s}");
        }
    }

    proptest! {
        #[test]
        fn respects_input_bounds(
            data in proptest::collection::vec(-500.0f64..500.0, 36),
            iterations in 0usize..15,
            kappa in 0.5f64..100.0,
            step in 0.01f64..0.25,
        ) {
            let p = Plane::from_vec(6, 6, data).unwrap();
            let (lo, hi) = p.min_max();
            let out = diffuse(&p, &DiffusionParams { iterations, conductance: kappa, step }).unwrap();
            let (olo, ohi) = out.min_max();
            prop_assert!(olo >= lo - 1e-9 && ohi <= hi + 1e-9);
        }

        #[test]
        fn odd_symmetry(data in proptest::collection::vec(-50.0f64..50.0, 25)) {
            let p = Plane::from_vec(5, 5, data).unwrap();
            let neg = p.map(|v| -v);
            let a = diffuse(&p, &DiffusionParams::default()).unwrap();
            let b = diffuse(&neg, &DiffusionParams::default()).unwrap();
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                prop_assert_eq!(*x, -*y);
            }
        }
    }
}
