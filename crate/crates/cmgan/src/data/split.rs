use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::FeatureDataset;
use crate::error::{Error, Result};

/// Stratified split, pairs kept intact, deterministic under `seed`.
pub fn split(ds: &FeatureDataset, fractions: &[f64], seed: u64) -> Result<Vec<FeatureDataset>> {
    Ok(split_with_indices(ds, fractions, seed)?.0)
}

/// As [`split`], also returning the source row indices of each subset so
/// index manifests can be emitted.
pub fn split_with_indices(
    ds: &FeatureDataset,
    fractions: &[f64],
    seed: u64,
) -> Result<(Vec<FeatureDataset>, Vec<Vec<usize>>)> {
    if fractions.is_empty() {
        return Err(Error::Config("split requires at least one fraction".into()));
    }
    if fractions.iter().any(|&f| f <= 0.0) {
        return Err(Error::Config("split fractions must be positive".into()));
    }
    let total: f64 = fractions.iter().sum();
    if total > 1.0 + 1e-9 {
        return Err(Error::Config(format!(
            "split fractions sum to {total}, must be <= 1"
        )));
    }

    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); ds.classes()];
    for (i, &label) in ds.labels().iter().enumerate() {
        per_class[label].push(i);
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut subsets: Vec<Vec<usize>> = vec![Vec::new(); fractions.len()];
    for (category, indices) in per_class.iter().enumerate() {
        if indices.is_empty() {
            continue;
        }
        if indices.len() < fractions.len() {
            return Err(Error::Stratification {
                category,
                available: indices.len(),
                requested: fractions.len(),
            });
        }
        let mut shuffled = indices.clone();
        shuffled.shuffle(&mut rng);

        // Largest-remainder allocation so exact fractions come out exact.
        let n = shuffled.len() as f64;
        let mut counts: Vec<usize> = fractions.iter().map(|f| (f * n).floor() as usize).collect();
        let assigned: usize = counts.iter().sum();
        let target = (total * n).round() as usize;
        let mut remainders: Vec<(usize, f64)> = fractions
            .iter()
            .enumerate()
            .map(|(k, f)| (k, f * n - (f * n).floor()))
            .collect();
        remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for (k, _) in remainders.into_iter().take(target.saturating_sub(assigned)) {
            counts[k] += 1;
        }

        let mut cursor = 0;
        for (k, &count) in counts.iter().enumerate() {
            subsets[k].extend_from_slice(&shuffled[cursor..cursor + count]);
            cursor += count;
        }
    }

    for subset in &mut subsets {
        subset.sort_unstable();
    }
    let datasets = subsets
        .iter()
        .map(|indices| {
            if indices.is_empty() {
                Err(Error::EmptyDataset)
            } else {
                ds.subset(indices)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((datasets, subsets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SynthSpec;

    fn balanced(classes: usize, per_class: usize) -> FeatureDataset {
        crate::data::generate_synthetic(&SynthSpec {
            classes,
            per_class,
            ..SynthSpec::default()
        })
        .unwrap()
    }

    #[test]
    fn identity_split_returns_everything() {
        let ds = balanced(3, 10);
        let parts = split(&ds, &[1.0], 0).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0], ds);
    }

    #[test]
    fn balanced_eighty_ten_ten_is_exact_per_category() {
        let ds = balanced(10, 100);
        let (parts, indices) = split_with_indices(&ds, &[0.8, 0.1, 0.1], 0).unwrap();
        assert_eq!(parts[0].len(), 800);
        assert_eq!(parts[1].len(), 100);
        assert_eq!(parts[2].len(), 100);
        for part in &parts {
            for c in 0..10 {
                let count = part.labels().iter().filter(|&&l| l == c).count();
                assert_eq!(count, part.len() / 10);
            }
        }
        // index sets partition the full range
        let mut all: Vec<usize> = indices.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn deterministic_under_seed() {
        let ds = balanced(4, 25);
        let a = split(&ds, &[0.8, 0.1, 0.1], 7).unwrap();
        let b = split(&ds, &[0.8, 0.1, 0.1], 7).unwrap();
        assert_eq!(a, b);
        let c = split(&ds, &[0.8, 0.1, 0.1], 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn too_few_instances_in_a_category_is_a_stratification_error() {
        let ds = balanced(3, 2);
        let err = split(&ds, &[0.6, 0.2, 0.2], 0).unwrap_err();
        assert!(matches!(
            err,
            Error::Stratification {
                available: 2,
                requested: 3,
                ..
            }
        ));
    }

    #[test]
    fn invalid_fractions_are_config_errors() {
        let ds = balanced(3, 10);
        assert!(matches!(split(&ds, &[], 0), Err(Error::Config(_))));
        assert!(matches!(split(&ds, &[0.5, -0.1], 0), Err(Error::Config(_))));
        assert!(matches!(split(&ds, &[0.9, 0.2], 0), Err(Error::Config(_))));
    }
}
