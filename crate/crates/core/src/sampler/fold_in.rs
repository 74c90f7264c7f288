use rand::Rng;

use super::TopicModel;
use crate::corpus::Document;
use crate::rng::{derive_seed, rng_from_seed};

pub const DEFAULT_FOLD_IN_SWEEPS: usize = 100;

/// Topic proportions inferred for held-out documents.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldIn {
    /// One entry per input document; `None` when every word was out of vocabulary.
    pub proportions: Vec<Option<Vec<f64>>>,
    /// Indices (into the input) of excluded documents.
    pub excluded: Vec<usize>,
    pub oov_dropped: usize,
}

/// Gibbs sampling over the held-out assignments only; the topic-word
/// statistics of `model` stay frozen. Returns the final-sweep proportions.
pub fn fold_in(model: &TopicModel, docs: &[Document], sweeps: usize, seed: u64) -> FoldIn {
    let v = model.vocab_size() as u32;
    let per_doc = |j: usize| -> (Option<Vec<f64>>, usize) {
        let words: Vec<u32> = docs[j].word_ids.iter().copied().filter(|&w| w < v).collect();
        let dropped = docs[j].len() - words.len();
        if words.is_empty() {
            return (None, dropped);
        }
        (Some(fold_in_doc(model, &words, sweeps, derive_seed(seed, &[j as u64]))), dropped)
    };

    let results = crate::parallel::map_indices(docs.len(), per_doc);

    let oov_dropped = results.iter().map(|r| r.1).sum();
    let excluded = results.iter().enumerate().filter(|(_, r)| r.0.is_none()).map(|(j, _)| j).collect();
    FoldIn { proportions: results.into_iter().map(|r| r.0).collect(), excluded, oov_dropped }
}

fn fold_in_doc(model: &TopicModel, words: &[u32], sweeps: usize, seed: u64) -> Vec<f64> {
    let k = model.topics();
    let alpha = model.hyper().alpha;
    let mut rng = rng_from_seed(seed);
    let mut z: Vec<usize> = words.iter().map(|_| rng.random_range(0..k as u32) as usize).collect();
    let mut counts = vec![0u32; k];
    for &t in &z {
        counts[t] += 1;
    }
    let mut cum = vec![0.0; k];
    for _ in 0..sweeps {
        for (i, &w) in words.iter().enumerate() {
            counts[z[i]] -= 1;
            let phi = model.word_column(w as usize);
            let mut total = 0.0;
            for t in 0..k {
                total += phi[t] * (counts[t] as f64 + alpha);
                cum[t] = total;
            }
            let u = rng.random::<f64>() * total;
            let new = cum.partition_point(|&c| c <= u).min(k - 1);
            z[i] = new;
            counts[new] += 1;
        }
    }
    counts.iter().map(|&c| c as f64 / words.len() as f64).collect()
}
