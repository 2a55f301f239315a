use crate::error::{Error, Result};
use crate::exec::{self, Mode};
use crate::linalg::Rng;
use crate::text::LabeledDataset;
use serde::{Deserialize, Serialize};

/// How to cut a dataset into train/validation/test partitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fraction of the whole dataset kept for the train pool (floor).
    pub train_fraction: f64,
    /// Fraction of the train pool carved out for validation (floor).
    pub validation_fraction: f64,
    pub seed: u64,
    /// Preserve per-class proportions within ±1 example per class.
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            validation_fraction: 0.2,
            seed: 0,
            stratified: true,
        }
    }
}

/// Disjoint, covering index partitions into the source dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Largest-remainder apportionment of `total` slots over class counts, so
/// every class stays within one example of its exact proportional share.
/// Ties go to the lower class id.
fn apportion(class_sizes: &[usize], total_slots: usize, fraction: f64) -> Vec<usize> {
    let mut base: Vec<usize> = class_sizes
        .iter()
        .map(|&n| (fraction * n as f64).floor() as usize)
        .collect();
    let assigned: usize = base.iter().sum();
    let mut order: Vec<usize> = (0..class_sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = fraction * class_sizes[a] as f64 - base[a] as f64;
        let fb = fraction * class_sizes[b] as f64 - base[b] as f64;
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &c in order.iter().take(total_slots.saturating_sub(assigned)) {
        base[c] += 1;
    }
    base
}

/// Seeded three-way split. The train pool is `floor(train_fraction * N)`
/// examples, the remainder is the test set, and validation is carved out of
/// the train pool. Partitions are disjoint and cover the dataset.
pub fn split(dataset: &LabeledDataset, spec: &SplitSpec) -> Result<Split> {
    let n = dataset.len();
    if n < 10 {
        return Err(Error::config(format!(
            "split requires at least 10 examples, got {n}"
        )));
    }
    for (name, f) in [
        ("train_fraction", spec.train_fraction),
        ("validation_fraction", spec.validation_fraction),
    ] {
        if !(0.0 < f && f < 1.0) {
            return Err(Error::config(format!("{name} must be in (0, 1), got {f}")));
        }
    }

    let mut rng = Rng::new(spec.seed).derive("split");
    let n_train = (spec.train_fraction * n as f64).floor() as usize;

    let (mut pool, test): (Vec<usize>, Vec<usize>) = if spec.stratified {
        let labels = dataset.labels();
        let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for (i, &l) in labels.iter().enumerate() {
            by_class[l as usize].push(i);
        }
        for class in by_class.iter_mut() {
            rng.shuffle(class);
        }
        let sizes = [by_class[0].len(), by_class[1].len()];
        let take = apportion(&sizes, n_train, spec.train_fraction);
        let mut pool = Vec::with_capacity(n_train);
        let mut test = Vec::with_capacity(n - n_train);
        for (c, class) in by_class.iter().enumerate() {
            pool.extend_from_slice(&class[..take[c]]);
            test.extend_from_slice(&class[take[c]..]);
        }
        // Re-shuffle so the pool is not class-blocked before the
        // validation carve.
        rng.shuffle(&mut pool);
        (pool, test)
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        let test = order.split_off(n_train);
        (order, test)
    };

    let n_val = (spec.validation_fraction * pool.len() as f64).floor() as usize;
    let validation: Vec<usize> = if spec.stratified {
        let labels = dataset.labels();
        let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for &i in pool.iter() {
            by_class[labels[i] as usize].push(i);
        }
        let sizes = [by_class[0].len(), by_class[1].len()];
        let take = apportion(&sizes, n_val, spec.validation_fraction);
        let chosen: Vec<usize> = by_class[0][..take[0]]
            .iter()
            .chain(&by_class[1][..take[1]])
            .copied()
            .collect();
        pool.retain(|i| !chosen.contains(i));
        chosen
    } else {
        let rest = pool.split_off(n_val);
        std::mem::replace(&mut pool, rest)
    };

    let mut out = Split {
        train: pool,
        validation,
        test,
    };
    out.train.sort_unstable();
    out.validation.sort_unstable();
    out.test.sort_unstable();
    for (name, part) in [
        ("train", &out.train),
        ("validation", &out.validation),
        ("test", &out.test),
    ] {
        if part.is_empty() {
            return Err(Error::config(format!("empty {name} partition")));
        }
    }
    Ok(out)
}

/// Cuts a pool of dataset positions into `k` disjoint, covering folds whose
/// sizes differ by at most one.
pub fn kfold_partition(pool: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::config(format!("need at least 2 folds, got {k}")));
    }
    if k > pool.len() {
        return Err(Error::config(format!(
            "{k} folds exceed pool size {}",
            pool.len()
        )));
    }
    let mut order = pool.to_vec();
    Rng::new(seed).derive("kfold").shuffle(&mut order);
    let base = order.len() / k;
    let extra = order.len() % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

/// Per-fold accuracies with their mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub folds: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl FoldResult {
    pub fn from_accuracies(folds: Vec<f64>) -> FoldResult {
        let n = folds.len() as f64;
        let mean = folds.iter().sum::<f64>() / n;
        let var = folds.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        FoldResult {
            folds,
            mean,
            std: var.sqrt(),
        }
    }

    /// `0.7600 (± 0.0628)` presentation.
    pub fn formatted(&self) -> String {
        format!("{:.4} (± {:.4})", self.mean, self.std)
    }
}

/// Runs k-fold cross-validation: for each fold, `eval_fold(train, held_out)`
/// returns the held-out accuracy. Folds may run concurrently; results are
/// collected in fold order.
pub fn kfold_run<F>(
    pool: &[usize],
    k: usize,
    seed: u64,
    mode: Mode,
    eval_fold: F,
) -> Result<FoldResult>
where
    F: Fn(&[usize], &[usize]) -> Result<f64> + Sync + Send,
{
    let folds = kfold_partition(pool, k, seed)?;
    let accs: Vec<Result<f64>> = exec::map_indices(mode, k, |i| {
        let held_out = &folds[i];
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        eval_fold(&train, held_out)
    });
    let mut out = Vec::with_capacity(k);
    for a in accs {
        out.push(a?);
    }
    Ok(FoldResult::from_accuracies(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{Provenance, RawRecord};

    fn dataset(n0: usize, n1: usize) -> LabeledDataset {
        let mut records = Vec::new();
        for i in 0..n0 + n1 {
            records.push(RawRecord {
                index: i as i64,
                text: format!("doc {i}"),
                label: u8::from(i >= n0),
            });
        }
        LabeledDataset::new(records, Provenance::default())
    }

    #[test]
    fn paper_scale_split_sizes() {
        let ds = dataset(1857, 894);
        let spec = SplitSpec {
            seed: 3,
            ..Default::default()
        };
        let s = split(&ds, &spec).unwrap();
        assert_eq!(s.train.len() + s.validation.len(), 2200);
        assert_eq!(s.test.len(), 551);
    }

    #[test]
    fn partitions_disjoint_and_covering() {
        let ds = dataset(40, 23);
        let s = split(
            &ds,
            &SplitSpec {
                seed: 11,
                ..Default::default()
            },
        )
        .unwrap();
        let mut all: Vec<usize> = s
            .train
            .iter()
            .chain(&s.validation)
            .chain(&s.test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..63).collect::<Vec<_>>());
    }

    #[test]
    fn same_seed_same_partitions() {
        let ds = dataset(30, 30);
        let spec = SplitSpec {
            seed: 42,
            ..Default::default()
        };
        assert_eq!(split(&ds, &spec).unwrap(), split(&ds, &spec).unwrap());
    }

    #[test]
    fn stratified_test_ratio_within_one_example() {
        let ds = dataset(1857, 894);
        let s = split(
            &ds,
            &SplitSpec {
                seed: 5,
                ..Default::default()
            },
        )
        .unwrap();
        let labels = ds.labels();
        let pos_test = s.test.iter().filter(|&&i| labels[i] == 1).count();
        // Exact share of the positive class in a 551-example test set.
        let exact = 894.0 * (551.0 / 2751.0);
        assert!(
            (pos_test as f64 - exact).abs() <= 1.0,
            "positives in test: {pos_test}, exact share: {exact}"
        );
    }

    #[test]
    fn kfold_even_and_uneven_sizes() {
        let pool: Vec<usize> = (0..100).collect();
        let folds = kfold_partition(&pool, 10, 1).unwrap();
        assert!(folds.iter().all(|f| f.len() == 10));

        let pool: Vec<usize> = (0..103).collect();
        let folds = kfold_partition(&pool, 10, 1).unwrap();
        let mut sizes: Vec<usize> = folds.iter().map(|f| f.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![10, 10, 10, 10, 10, 10, 10, 11, 11, 11]);
    }

    #[test]
    fn kfold_every_example_held_out_once() {
        let pool: Vec<usize> = (5..68).collect();
        let folds = kfold_partition(&pool, 10, 9).unwrap();
        let mut seen: Vec<usize> = folds.into_iter().flatten().collect();
        seen.sort_unstable();
        assert_eq!(seen, pool);
    }

    #[test]
    fn kfold_rejects_bad_k() {
        let pool: Vec<usize> = (0..5).collect();
        assert!(kfold_partition(&pool, 1, 0).is_err());
        assert!(kfold_partition(&pool, 6, 0).is_err());
    }

    #[test]
    fn fold_result_stats_match_recomputation() {
        let accs = vec![0.7, 0.8, 0.75, 0.9, 0.6];
        let fr = FoldResult::from_accuracies(accs.clone());
        let mean = accs.iter().sum::<f64>() / 5.0;
        let std =
            (accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / 5.0).sqrt();
        assert_eq!(fr.mean, mean);
        assert_eq!(fr.std, std);
        assert_eq!(fr.formatted(), format!("{mean:.4} (± {std:.4})"));
    }

    #[test]
    fn kfold_run_collects_in_fold_order() {
        let pool: Vec<usize> = (0..20).collect();
        let fr = kfold_run(&pool, 10, 7, Mode::auto(), |train, held| {
            assert_eq!(train.len(), 18);
            Ok(held[0] as f64)
        })
        .unwrap();
        let direct = kfold_partition(&pool, 10, 7).unwrap();
        let expected: Vec<f64> = direct.iter().map(|f| f[0] as f64).collect();
        assert_eq!(fr.folds, expected);
    }
}
