use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DataError, Dataset, Normalization, Result, Targets};
use crate::engine::Tensor;

/// Lower bound on the per-feature standard deviation used as a divisor.
pub const STD_FLOOR: f64 = 1e-12;

/// Sliding windows over a univariate series, horizon 1. Sample `i` has
/// features `series[i..i + lookback]` (shape `[lookback, 1]`) and target
/// `series[i + lookback]`.
pub fn window_time_series(series: &[f64], lookback: usize) -> Result<Dataset> {
    if lookback == 0 || series.len() <= lookback {
        return Err(DataError::SeriesTooShort {
            len: series.len(),
            lookback,
        });
    }
    let n = series.len() - lookback;
    let mut features = Vec::with_capacity(n * lookback);
    for i in 0..n {
        features.extend_from_slice(&series[i..i + lookback]);
    }
    let targets = series[lookback..].to_vec();
    Dataset::new(
        Tensor::new(vec![n, lookback, 1], features).expect("n windows"),
        Targets::Values(Tensor::new(vec![n, 1], targets).expect("n targets")),
    )
}

/// Per-column mean and population std over the rows of `data` viewed as
/// `[rows, d]`.
fn column_stats(data: &[f64], d: usize) -> Normalization {
    let rows = data.len() / d;
    let mut mean = vec![0.0; d];
    let mut std = vec![0.0; d];
    for j in 0..d {
        let col = || data.iter().skip(j).step_by(d);
        let first = data[j];
        if col().all(|&x| x == first) {
            // Exact for constant columns so they map to zeros.
            mean[j] = first;
            std[j] = STD_FLOOR;
            continue;
        }
        let m = col().sum::<f64>() / rows as f64;
        let var = col().map(|x| (x - m) * (x - m)).sum::<f64>() / rows as f64;
        mean[j] = m;
        std[j] = var.sqrt().max(STD_FLOOR);
    }
    Normalization { mean, std }
}

fn apply(t: &Tensor, norm: &Normalization) -> Tensor {
    let d = norm.mean.len();
    let mut out = t.clone();
    for (i, x) in out.data_mut().iter_mut().enumerate() {
        *x = (*x - norm.mean[i % d]) / norm.std[i % d];
    }
    out
}

/// Standardizes features with statistics from `train` only and applies the
/// same transform to `others`. Sequence features `[n, T, d]` are pooled over
/// samples and time steps.
pub fn standardize(train: &Dataset, others: &[&Dataset]) -> Result<(Dataset, Vec<Dataset>)> {
    if train.is_empty() {
        return Err(DataError::InvalidArgument("standardize: empty training set".into()));
    }
    let d = train.feature_dim();
    for o in others {
        if o.feature_dim() != d {
            return Err(DataError::InvalidArgument(format!(
                "standardize: feature width {} vs {d}",
                o.feature_dim()
            )));
        }
    }
    let norm = column_stats(train.features.data(), d);
    let go = |ds: &Dataset| Dataset {
        features: apply(&ds.features, &norm),
        normalization: Some(norm.clone()),
        ..ds.clone()
    };
    Ok((go(train), others.iter().map(|o| go(o)).collect()))
}

/// Like [`standardize`] but with one mean and std pooled over every
/// feature, as is usual for image pixels.
pub fn standardize_global(train: &Dataset, others: &[&Dataset]) -> Result<(Dataset, Vec<Dataset>)> {
    if train.is_empty() {
        return Err(DataError::InvalidArgument("standardize: empty training set".into()));
    }
    let norm = column_stats(train.features.data(), 1);
    let go = |ds: &Dataset| Dataset {
        features: apply(&ds.features, &norm),
        normalization: Some(norm.clone()),
        ..ds.clone()
    };
    Ok((go(train), others.iter().map(|o| go(o)).collect()))
}

/// Standardizes regression targets with statistics from `train`.
pub fn standardize_targets(train: &Dataset, others: &[&Dataset]) -> Result<(Dataset, Vec<Dataset>)> {
    let values = |ds: &Dataset| {
        ds.values()
            .cloned()
            .ok_or_else(|| DataError::InvalidArgument("standardize_targets: class targets".into()))
    };
    let t = values(train)?;
    if t.is_empty() {
        return Err(DataError::InvalidArgument("standardize_targets: empty training set".into()));
    }
    let norm = column_stats(t.data(), 1);
    let go = |ds: &Dataset| -> Result<Dataset> {
        Ok(Dataset {
            targets: Targets::Values(apply(&values(ds)?, &norm)),
            target_normalization: Some(norm.clone()),
            ..ds.clone()
        })
    };
    let rest = others.iter().map(|o| go(o)).collect::<Result<Vec<_>>>()?;
    Ok((go(train)?, rest))
}

/// Seeded shuffle, then the first `floor(n * fraction)` rows go to train.
pub fn split(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DataError::InvalidArgument(format!("split fraction {fraction}")));
    }
    let n = ds.len();
    let n_train = (n as f64 * fraction).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(DataError::EmptySplit {
            train: n_train,
            test: n - n_train,
        });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((ds.subset(&idx[..n_train]), ds.subset(&idx[n_train..])))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn regression(rows: &[Vec<f64>]) -> Dataset {
        let n = rows.len();
        Dataset::new(
            Tensor::from_rows(rows).unwrap(),
            Targets::Values(Tensor::new(vec![n, 1], (0..n).map(|i| i as f64).collect()).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn window_examples() {
        let ds = window_time_series(&[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(ds.features.shape(), &[2, 2, 1]);
        assert_eq!(ds.features.data(), &[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(ds.values().unwrap().data(), &[3.0, 4.0]);
        assert_eq!(window_time_series(&[1.0, 2.0, 3.0], 2).unwrap().len(), 1);
        assert_eq!(
            window_time_series(&[1.0, 2.0], 2).unwrap_err(),
            DataError::SeriesTooShort { len: 2, lookback: 2 }
        );
    }

    #[test]
    fn constant_feature_maps_to_zero() {
        let ds = regression(&[vec![0.1, 1.0], vec![0.1, 2.0], vec![0.1, 4.0]]);
        let (tr, _) = standardize(&ds, &[]).unwrap();
        for i in 0..3 {
            assert_eq!(tr.features.get2(i, 0), 0.0);
        }
        assert!(tr.normalization.is_some());
    }

    #[test]
    fn standardized_input_is_unchanged() {
        let ds = regression(&[vec![-1.0], vec![1.0]]);
        let (tr, _) = standardize(&ds, &[]).unwrap();
        for (a, b) in tr.features.data().iter().zip(ds.features.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn test_set_uses_train_statistics() {
        let train = regression(&[vec![0.0], vec![2.0]]);
        let test = regression(&[vec![10.0], vec![12.0]]);
        let (_, rest) = standardize(&train, &[&test]).unwrap();
        assert_eq!(rest[0].features.data(), &[9.0, 11.0]);
    }

    #[test]
    fn global_standardization_pools_features() {
        let ds = regression(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let (tr, _) = standardize_global(&ds, &[]).unwrap();
        assert_eq!(tr.features.data(), &[-1.0, 1.0, 1.0, -1.0]);
        assert_eq!(tr.normalization.unwrap().mean, vec![0.5]);
    }

    #[test]
    fn target_standardization_inverts() {
        let ds = regression(&[vec![0.0], vec![0.0], vec![0.0], vec![0.0]]);
        let (tr, _) = standardize_targets(&ds, &[]).unwrap();
        let norm = tr.target_normalization.as_ref().unwrap();
        let back = norm.invert(tr.values().unwrap().data());
        for (a, b) in back.iter().zip(ds.values().unwrap().data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn split_sizes_and_coverage() {
        let rows: Vec<Vec<f64>> = (0..506).map(|i| vec![i as f64]).collect();
        let ds = regression(&rows);
        let (tr, te) = split(&ds, 0.8, 42).unwrap();
        assert_eq!((tr.len(), te.len()), (404, 102));
        let mut all: Vec<f64> = tr.features.data().iter().chain(te.features.data()).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..506).map(|i| i as f64).collect::<Vec<_>>());
        let (tr2, _) = split(&ds, 0.8, 42).unwrap();
        assert_eq!(tr, tr2);
    }

    #[test]
    fn split_errors() {
        let ds = regression(&[vec![1.0], vec![2.0]]);
        assert!(matches!(split(&ds, 0.3, 0), Err(DataError::EmptySplit { .. })));
        assert!(split(&ds, 1.0, 0).is_err());
    }
}
