//! Subject-disjoint train / validation / test splits.

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
}

impl DatasetSplit {
    /// Which part a subject landed in, if any.
    pub fn part_of(&self, subject: &str) -> Option<&'static str> {
        let has = |v: &[String]| v.iter().any(|s| s == subject);
        if has(&self.train) {
            Some("train")
        } else if has(&self.validation) {
            Some("validation")
        } else if has(&self.test) {
            Some("test")
        } else {
            None
        }
    }
}

/// Shuffles the (sorted, deduplicated) ids with `seed` and cuts them by
/// `ratios` using largest remainders.
pub fn split_dataset(subjects: &[String], ratios: [f64; 3], seed: u64) -> Result<DatasetSplit> {
    if ratios.iter().any(|r| !(*r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::param(format!("split ratios {ratios:?} must be nonnegative and sum to 1")));
    }
    let mut ids = subjects.to_vec();
    ids.sort();
    ids.dedup();
    let n = ids.len();

    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| (e + 1e-9).floor() as usize).collect();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - sizes[a] as f64;
        let fb = exact[b] - sizes[b] as f64;
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut left = n - sizes.iter().sum::<usize>().min(n);
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if ratios[i] > 0.0 {
            sizes[i] += 1;
            left -= 1;
        }
    }
    for (i, name) in ["train", "validation", "test"].iter().enumerate() {
        if ratios[i] > 0.0 && sizes[i] == 0 {
            return Err(Error::param(format!("{name} split would be empty with {n} subjects")));
        }
    }

    RngStream::new(seed).shuffle(&mut ids);
    let test = ids.split_off(sizes[0] + sizes[1]);
    let validation = ids.split_off(sizes[0]);
    Ok(DatasetSplit {
        train: ids,
        validation,
        test,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i:03}")).collect()
    }

    #[test]
    fn sizes_follow_ratios() {
        let s = split_dataset(&ids(10), [0.8, 0.1, 0.1], 0).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (8, 1, 1));
        let s = split_dataset(&ids(40), [0.8, 0.1, 0.1], 0).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (32, 4, 4));
    }

    #[test]
    fn same_seed_same_split() {
        let a = split_dataset(&ids(30), [0.6, 0.2, 0.2], 5).unwrap();
        let b = split_dataset(&ids(30), [0.6, 0.2, 0.2], 5).unwrap();
        assert_eq!(a, b);
        let c = split_dataset(&ids(30), [0.6, 0.2, 0.2], 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empty_required_part_is_an_error() {
        assert!(split_dataset(&ids(2), [0.8, 0.1, 0.1], 0).is_err());
        assert!(split_dataset(&ids(10), [0.8, 0.1, 0.2], 0).is_err());
        assert!(split_dataset(&ids(3), [1.0, 0.0, 0.0], 0).is_ok());
    }

    proptest! {
        #[test]
        fn disjoint_and_complete(n in 10usize..200, seed in any::<u64>(), a in 0.2f64..0.8) {
            let rest = (1.0 - a) / 2.0;
            let subjects = ids(n);
            let s = split_dataset(&subjects, [a, rest, 1.0 - a - rest], seed).unwrap();
            let parts = [&s.train, &s.validation, &s.test];
            let mut union = BTreeSet::new();
            for p in parts {
                for id in p.iter() {
                    prop_assert!(union.insert(id.clone()), "{} in two parts", id);
                }
            }
            prop_assert_eq!(union, subjects.into_iter().collect::<BTreeSet<_>>());
        }
    }
}
