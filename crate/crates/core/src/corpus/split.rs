//! Seeded train/validation/test partitioning.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions { train: 0.9, validation: 0.05, test: 0.05 }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|f| *f < 0.0) {
            return Err(Error::Config("split fractions must be non-negative".into()));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions must sum to 1, got {sum}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
}

impl<T> Splits<T> {
    pub fn sizes(&self) -> [usize; 3] {
        [self.train.len(), self.validation.len(), self.test.len()]
    }

    /// Tiny corpora may leave a split empty; that is a warning, not an error.
    pub fn empty_split_warning(&self) -> Option<String> {
        let names = ["train", "validation", "test"];
        let empty: Vec<&str> = names
            .iter()
            .zip(self.sizes())
            .filter(|(_, n)| *n == 0)
            .map(|(name, _)| *name)
            .collect();
        if empty.is_empty() {
            None
        } else {
            Some(format!("empty split(s): {}", empty.join(", ")))
        }
    }
}

/// Random, seeded, disjoint, exhaustive partition. Split sizes follow the
/// fractions by largest remainder, so 100 items at 0.9/0.05/0.05 give
/// exactly 90/5/5.
pub fn split_corpus<T>(items: Vec<T>, fractions: &SplitFractions, seed: u64) -> Result<Splits<T>> {
    fractions.validate()?;
    let n = items.len();
    let raw = [
        fractions.train * n as f64,
        fractions.validation * n as f64,
        fractions.test * n as f64,
    ];
    let mut sizes = [raw[0] as usize, raw[1] as usize, raw[2] as usize];
    let mut assigned: usize = sizes.iter().sum();
    // Hand remainders to the largest fractional parts, earlier split first on ties.
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    let mut cursor = 0;
    while assigned < n {
        sizes[order[cursor % 3]] += 1;
        assigned += 1;
        cursor += 1;
    }

    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut derive(seed, Stream::Split, 0));

    let mut slots: Vec<Option<T>> = items.into_iter().map(Some).collect();
    let mut take = |idx: &[usize]| -> Vec<T> {
        idx.iter().map(|&i| slots[i].take().expect("disjoint indices")).collect()
    };
    let train = take(&indices[..sizes[0]]);
    let validation = take(&indices[sizes[0]..sizes[0] + sizes[1]]);
    let test = take(&indices[sizes[0] + sizes[1]..]);
    Ok(Splits { train, validation, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hundred_items_split_90_5_5() {
        let splits = split_corpus((0..100).collect(), &SplitFractions::default(), 7).unwrap();
        assert_eq!(splits.sizes(), [90, 5, 5]);
        let mut all: Vec<i32> = splits
            .train
            .iter()
            .chain(&splits.validation)
            .chain(&splits.test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn same_seed_same_partition() {
        let a = split_corpus((0..57).collect::<Vec<i32>>(), &SplitFractions::default(), 3).unwrap();
        let b = split_corpus((0..57).collect::<Vec<i32>>(), &SplitFractions::default(), 3).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.validation, b.validation);
        assert_eq!(a.test, b.test);
        let c = split_corpus((0..57).collect::<Vec<i32>>(), &SplitFractions::default(), 4).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn tiny_corpus_warns_instead_of_failing() {
        let splits = split_corpus(vec![1, 2, 3], &SplitFractions::default(), 0).unwrap();
        assert_eq!(splits.sizes().iter().sum::<usize>(), 3);
        assert!(splits.empty_split_warning().is_some());
    }

    #[test]
    fn bad_fractions_rejected() {
        let f = SplitFractions { train: 0.5, validation: 0.1, test: 0.1 };
        assert!(split_corpus(vec![1], &f, 0).is_err());
    }
}
