use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::error::{Error, Result};

pub const FOLD_COUNT: usize = 5;
const BLOCKS: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSet {
    pub seed: u64,
    pub folds: Vec<Fold>,
}

/// Five 80/10/10 train/dev/test rotations over excerpts.
///
/// Excerpt ids are sorted, shuffled by `seed` and cut into ten contiguous
/// blocks. Fold `i` tests on block `i`, develops on block `i + 1` and trains
/// on the other eight.
pub fn make_folds(corpus: &Corpus, seed: u64) -> Result<FoldSet> {
    if corpus.len() < BLOCKS {
        return Err(Error::CorpusTooSmall {
            need: BLOCKS,
            have: corpus.len(),
        });
    }
    let mut ids: Vec<String> = corpus.excerpts.iter().map(|e| e.id.clone()).collect();
    ids.sort();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let n = ids.len();
    let blocks: Vec<&[String]> = (0..BLOCKS)
        .map(|b| &ids[b * n / BLOCKS..(b + 1) * n / BLOCKS])
        .collect();

    let folds = (0..FOLD_COUNT)
        .map(|i| {
            let dev_block = (i + 1) % BLOCKS;
            let train = blocks
                .iter()
                .enumerate()
                .filter(|&(b, _)| b != i && b != dev_block)
                .flat_map(|(_, block)| block.iter().cloned())
                .collect();
            Fold {
                train,
                dev: blocks[dev_block].to_vec(),
                test: blocks[i].to_vec(),
            }
        })
        .collect();
    Ok(FoldSet { seed, folds })
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::corpus::Excerpt;

    fn corpus(n: usize) -> Corpus {
        Corpus {
            excerpts: (0..n)
                .map(|i| Excerpt::from_sentences(format!("ex{i:03}"), &[vec!["a"]]))
                .collect(),
        }
    }

    #[test]
    fn proportions_and_disjointness() {
        let c = corpus(100);
        let set = make_folds(&c, 7).unwrap();
        assert_eq!(set.folds.len(), 5);
        for fold in &set.folds {
            assert_eq!((fold.train.len(), fold.dev.len(), fold.test.len()), (80, 10, 10));
            let train: HashSet<_> = fold.train.iter().collect();
            let dev: HashSet<_> = fold.dev.iter().collect();
            let test: HashSet<_> = fold.test.iter().collect();
            assert!(train.is_disjoint(&dev) && train.is_disjoint(&test) && dev.is_disjoint(&test));
            assert_eq!(train.len() + dev.len() + test.len(), 100);
        }
        let tests: HashSet<_> = set.folds.iter().flat_map(|f| f.test.iter()).collect();
        assert_eq!(tests.len(), 50);
    }

    #[test]
    fn deterministic_and_order_independent() {
        let c = corpus(37);
        let mut reversed = c.clone();
        reversed.excerpts.reverse();
        assert_eq!(make_folds(&c, 3).unwrap(), make_folds(&reversed, 3).unwrap());
        assert_ne!(make_folds(&c, 3).unwrap(), make_folds(&c, 4).unwrap());
    }

    #[test]
    fn too_small() {
        assert!(matches!(make_folds(&corpus(9), 0), Err(Error::CorpusTooSmall { .. })));
    }
}
