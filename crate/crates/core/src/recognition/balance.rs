use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Balanced<T> {
    pub kept: Vec<T>,
    pub discarded: usize,
    /// Set when the pool had no suspicious items and was returned unchanged.
    pub no_suspicious: bool,
}

/// Keeps every suspicious item and a seeded uniform sample of the normal
/// ones, sized to the suspicious count. Relative order is preserved.
pub fn balance_classes<T: Clone>(
    pool: &[T],
    is_normal: impl Fn(&T) -> bool,
    seed: u64,
) -> Result<Balanced<T>> {
    let suspicious = pool.iter().filter(|x| !is_normal(x)).count();
    balance_classes_to(pool, is_normal, suspicious, seed)
}

/// Like [`balance_classes`] but with an explicit number of normals to keep.
pub fn balance_classes_to<T: Clone>(
    pool: &[T],
    is_normal: impl Fn(&T) -> bool,
    target_normals: usize,
    seed: u64,
) -> Result<Balanced<T>> {
    if pool.is_empty() {
        return Err(Error::InvalidArgument("cannot balance an empty pool".into()));
    }
    let normals: Vec<usize> = (0..pool.len()).filter(|&i| is_normal(&pool[i])).collect();
    if normals.len() == pool.len() {
        log::warn!("no suspicious proposals; pool left unbalanced");
        return Ok(Balanced {
            kept: pool.to_vec(),
            discarded: 0,
            no_suspicious: true,
        });
    }
    let take = target_normals.min(normals.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![true; pool.len()];
    for &i in &normals {
        keep[i] = false;
    }
    for pick in index::sample(&mut rng, normals.len(), take) {
        keep[normals[pick]] = true;
    }
    let kept: Vec<T> = pool
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(x, _)| x.clone())
        .collect();
    Ok(Balanced {
        discarded: pool.len() - kept.len(),
        kept,
        no_suspicious: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn already_balanced_is_unchanged() {
        let pool: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let out = balance_classes(&pool, |&x| x == 0, 3).unwrap();
        assert_eq!(out.kept, pool);
        assert_eq!(out.discarded, 0);
    }

    #[test]
    fn deterministic_per_seed() {
        let pool: Vec<(u32, bool)> = (0..200).map(|i| (i, i % 7 != 0)).collect();
        let a = balance_classes(&pool, |x| x.1, 11).unwrap();
        let b = balance_classes(&pool, |x| x.1, 11).unwrap();
        assert_eq!(a, b);
        let c = balance_classes(&pool, |x| x.1, 12).unwrap();
        assert_ne!(a.kept, c.kept);
    }

    #[test]
    fn all_normal_is_flagged() {
        let out = balance_classes(&[0u8; 5], |_| true, 0).unwrap();
        assert!(out.no_suspicious);
        assert_eq!(out.kept.len(), 5);
        assert!(balance_classes(&[] as &[u8], |_| true, 0).is_err());
    }

    proptest! {
        #[test]
        fn counts_differ_by_at_most_one(n_sus in 1usize..60, n_norm in 0usize..200, seed in any::<u64>()) {
            let pool: Vec<bool> = (0..n_sus + n_norm).map(|i| i % (n_sus + n_norm) >= n_sus).collect();
            let out = balance_classes(&pool, |&x| x, seed).unwrap();
            let normals = out.kept.iter().filter(|&&x| x).count();
            let sus = out.kept.len() - normals;
            prop_assert_eq!(sus, n_sus);
            if n_norm >= n_sus {
                prop_assert!((normals as i64 - sus as i64).abs() <= 1);
            } else {
                prop_assert_eq!(normals, n_norm);
            }
        }
    }
}
