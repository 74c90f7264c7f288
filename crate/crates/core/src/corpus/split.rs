use rand::Rng;

use super::{Corpus, Split};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, tag, ChainRng};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub holdout: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self { train: 0.8, validation: 0.1, holdout: 0.1 }
    }
}

impl std::str::FromStr for SplitFractions {
    type Err = Error;
    /// `"0.8,0.1,0.1"`
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| Error::invalid(format!("split {p:?}: {e}"))))
            .collect::<Result<_>>()?;
        match parts[..] {
            [train, validation, holdout] => Ok(Self { train, validation, holdout }),
            _ => Err(Error::invalid(format!("expected three split fractions, got {s:?}"))),
        }
    }
}

/// Fisher–Yates with 64-bit draws so the permutation does not depend on the
/// platform's pointer width.
pub fn shuffle_indices(n: usize, rng: &mut ChainRng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i as u64) as usize;
        idx.swap(i, j);
    }
    idx
}

/// Largest-remainder allocation of `n` items, every bucket non-empty.
fn allocate(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let targets = fractions.map(|f| f * n as f64);
    let mut counts = targets.map(|t| t.floor() as usize);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| (targets[b] - targets[b].floor()).total_cmp(&(targets[a] - targets[a].floor())));
    let mut left = n - counts.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    for i in 0..3 {
        if counts[i] == 0 {
            let donor = (0..3).max_by_key(|&j| (counts[j], std::cmp::Reverse(j))).unwrap();
            counts[donor] -= 1;
            counts[i] += 1;
        }
    }
    counts
}

/// Tags every document with exactly one split. Deterministic under `seed`.
pub fn split_corpus(corpus: &Corpus, fractions: SplitFractions, seed: u64) -> Result<Corpus> {
    let f = [fractions.train, fractions.validation, fractions.holdout];
    if f.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::invalid(format!("split fractions must all be positive, got {f:?}")));
    }
    if (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("split fractions must sum to 1, got {f:?}")));
    }
    let n = corpus.num_docs();
    if n < 3 {
        return Err(Error::invalid(format!("cannot split {n} documents three ways")));
    }
    let counts = allocate(n, f);
    let mut rng = rng_from_seed(derive_seed(seed, &[tag::SPLIT]));
    let perm = shuffle_indices(n, &mut rng);

    let mut out = corpus.clone();
    for (rank, &doc) in perm.iter().enumerate() {
        out.documents[doc].split = if rank < counts[0] {
            Split::Train
        } else if rank < counts[0] + counts[1] {
            Split::Validation
        } else {
            Split::Holdout
        };
    }
    Ok(out)
}
