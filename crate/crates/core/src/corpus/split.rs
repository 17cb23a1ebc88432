use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Disjoint train/validation/test example ids covering `0..n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitManifest {
    pub fn split(&self, name: &str) -> Option<&[usize]> {
        match name {
            "train" => Some(&self.train),
            "validation" | "val" => Some(&self.validation),
            "test" => Some(&self.test),
            _ => None,
        }
    }
}

/// Seeded shuffle of `0..n`; train takes `floor(r0 * n)`, validation
/// `floor(r1 * n)`, test the remainder.
pub fn split_dataset(n: usize, ratios: [f64; 3], seed: u64) -> Result<SplitManifest, CorpusError> {
    if n < 3 {
        return Err(CorpusError::InvalidSplit(format!("need at least 3 examples, got {n}")));
    }
    if ratios.iter().any(|r| !(*r > 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(CorpusError::InvalidSplit(format!(
            "ratios must be positive and sum to 1, got {ratios:?}"
        )));
    }
    // The epsilon keeps e.g. 0.7 * 10 from flooring to 6 through representation error.
    let take = |r: f64| (r * n as f64 + 1e-9).floor() as usize;
    let (n_train, n_val) = (take(ratios[0]), take(ratios[1]));
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(SplitManifest {
        seed,
        ratios,
        train: ids[..n_train].to_vec(),
        validation: ids[n_train..n_train + n_val].to_vec(),
        test: ids[n_train + n_val..].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const RATIOS: [f64; 3] = [0.70, 0.15, 0.15];

    #[test]
    fn meeting_corpus_sizes() {
        let m = split_dataset(142, RATIOS, 7).unwrap();
        assert_eq!((m.train.len(), m.validation.len(), m.test.len()), (99, 21, 22));
        let m = split_dataset(100, RATIOS, 7).unwrap();
        assert_eq!((m.train.len(), m.validation.len(), m.test.len()), (70, 15, 15));
    }

    #[test]
    fn deterministic_by_seed() {
        assert_eq!(split_dataset(50, RATIOS, 3).unwrap(), split_dataset(50, RATIOS, 3).unwrap());
        assert_ne!(split_dataset(50, RATIOS, 3).unwrap(), split_dataset(50, RATIOS, 4).unwrap());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(split_dataset(2, RATIOS, 0).is_err());
        assert!(split_dataset(10, [0.5, 0.5, 0.0], 0).is_err());
        assert!(split_dataset(10, [0.5, 0.3, 0.3], 0).is_err());
    }
}
