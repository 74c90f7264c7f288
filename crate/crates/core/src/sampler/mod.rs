//! Collapsed Gibbs sampling for LDA.
//!
//! A [`ChainState`] owns the topic assignment of every token plus the three
//! count tables that make a single-site update O(K):
//!
//! * `nkv`: word/topic counts, stored word-major (`v * K + k`) so the K
//!   counts read for one token are contiguous;
//! * `njk`: document/topic counts, `j * K + k`;
//! * `nk`: per-topic totals.
//!
//! The site update draws topic `k` with probability proportional to
//! `(N_kv + β) / (N_k + Vβ) · (N_jk + α)`, counts excluding the site itself.

mod fold_in;
mod model;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::math::ln_gamma;
use crate::rng::{rng_from_seed, ChainRng};

pub use fold_in::{fold_in, FoldIn, DEFAULT_FOLD_IN_SWEEPS};
pub use model::{load_model, save_model, ModelFile, TopicModel, MODEL_FORMAT, MODEL_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl Hyperparams {
    pub fn new(topics: usize, alpha: f64, beta: f64) -> Result<Self> {
        let h = Self { topics, alpha, beta };
        h.validate()?;
        Ok(h)
    }

    /// α = 5/K, β = 0.01.
    pub fn standard(topics: usize) -> Result<Self> {
        Self::new(topics, 5.0 / topics as f64, 0.01)
    }

    pub fn validate(&self) -> Result<()> {
        if self.topics == 0 {
            return Err(Error::invalid("need at least one topic"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) || !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!("α and β must be positive (α={}, β={})", self.alpha, self.beta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ChainState {
    pub(crate) hyper: Hyperparams,
    pub(crate) vocab_size: usize,
    pub(crate) z: Vec<Vec<u32>>,
    pub(crate) nkv: Vec<u32>,
    pub(crate) njk: Vec<u32>,
    pub(crate) nk: Vec<u32>,
    pub(crate) rng: ChainRng,
    pub(crate) iteration: u64,
    pub(crate) tilted_updates: u64,
}

/// Uniform random initial assignment. Deterministic under `seed`.
pub fn init_chain(corpus: &Corpus, hyper: Hyperparams, seed: u64) -> Result<ChainState> {
    hyper.validate()?;
    if corpus.num_docs() == 0 {
        return Err(Error::EmptyCorpus("cannot start a chain on zero documents".into()));
    }
    let mut rng = rng_from_seed(seed);
    let k = hyper.topics as u32;
    let z = corpus.documents.iter().map(|d| d.word_ids.iter().map(|_| rng.random_range(0..k)).collect()).collect();
    ChainState::build(corpus, hyper, z, rng)
}

impl ChainState {
    /// Chain with an explicit assignment, e.g. a planted or enumerated one.
    pub fn from_assignments(corpus: &Corpus, hyper: Hyperparams, z: Vec<Vec<u32>>, seed: u64) -> Result<Self> {
        hyper.validate()?;
        if z.len() != corpus.num_docs() || z.iter().zip(&corpus.documents).any(|(zj, d)| zj.len() != d.len()) {
            return Err(Error::invalid("assignment shape does not match the corpus"));
        }
        if z.iter().flatten().any(|&t| t as usize >= hyper.topics) {
            return Err(Error::OutOfRange("topic id ≥ K in assignment".into()));
        }
        Self::build(corpus, hyper, z, rng_from_seed(seed))
    }

    fn build(corpus: &Corpus, hyper: Hyperparams, z: Vec<Vec<u32>>, rng: ChainRng) -> Result<Self> {
        let (nkv, njk, nk) = count_tables(corpus, hyper.topics, &z);
        Ok(Self { hyper, vocab_size: corpus.vocab_size(), z, nkv, njk, nk, rng, iteration: 0, tilted_updates: 0 })
    }

    pub fn hyper(&self) -> Hyperparams {
        self.hyper
    }

    pub fn topics(&self) -> usize {
        self.hyper.topics
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn num_docs(&self) -> usize {
        self.z.len()
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Number of label-tilted site updates this chain has ever performed.
    pub fn tilted_updates(&self) -> u64 {
        self.tilted_updates
    }

    pub fn assignments(&self) -> &[Vec<u32>] {
        &self.z
    }

    pub fn word_topic_count(&self, k: usize, v: usize) -> u32 {
        self.nkv[v * self.topics() + k]
    }

    pub fn doc_topic_counts(&self, j: usize) -> &[u32] {
        let k = self.topics();
        &self.njk[j * k..(j + 1) * k]
    }

    pub fn topic_totals(&self) -> &[u32] {
        &self.nk
    }

    /// Word/topic counts in word-major layout (`v * K + k`).
    pub fn word_topic_counts(&self) -> &[u32] {
        &self.nkv
    }

    /// Identical assignment and counts (the RNG stream is not compared).
    pub fn same_assignment(&self, other: &ChainState) -> bool {
        self.z == other.z && self.nkv == other.nkv && self.njk == other.njk && self.nk == other.nk
    }

    /// Copy of this chain that continues on an independent random stream.
    pub fn fork(&self, seed: u64) -> ChainState {
        let mut child = self.clone();
        child.rng = rng_from_seed(seed);
        child
    }

    fn check_shape(&self, corpus: &Corpus) -> Result<()> {
        if corpus.num_docs() != self.z.len() || corpus.vocab_size() != self.vocab_size {
            return Err(Error::invalid("corpus does not match the chain it is sampled with"));
        }
        Ok(())
    }

    /// Recomputes every count table from `z` and compares.
    pub fn check_consistency(&self, corpus: &Corpus) -> Result<()> {
        self.check_shape(corpus)?;
        if self.z.iter().zip(&corpus.documents).any(|(zj, d)| zj.len() != d.len()) {
            return Err(Error::Invariant("assignment lengths differ from document lengths".into()));
        }
        let (nkv, njk, nk) = count_tables(corpus, self.topics(), &self.z);
        if nkv != self.nkv || njk != self.njk || nk != self.nk {
            return Err(Error::Invariant("count tables differ from those induced by z".into()));
        }
        Ok(())
    }

    /// Normalized update distribution for site `(j, i)` with the site's own
    /// assignment removed from the counts.
    pub fn conditional(&self, corpus: &Corpus, j: usize, i: usize) -> Vec<f64> {
        let k = self.topics();
        let Hyperparams { alpha, beta, .. } = self.hyper;
        let vbeta = beta * self.vocab_size as f64;
        let v = corpus.documents[j].word_ids[i] as usize;
        let cur = self.z[j][i] as usize;
        let mut w: Vec<f64> = (0..k)
            .map(|t| {
                let own = u32::from(t == cur) as f64;
                let nkv = self.nkv[v * k + t] as f64 - own;
                let njk = self.njk[j * k + t] as f64 - own;
                let nk = self.nk[t] as f64 - own;
                (nkv + beta) / (nk + vbeta) * (njk + alpha)
            })
            .collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        w
    }

    /// One full document-major, position-minor pass of single-site updates.
    pub fn gibbs_sweep(&mut self, corpus: &Corpus) -> Result<()> {
        self.check_shape(corpus)?;
        let k = self.topics();
        let Hyperparams { alpha, beta, .. } = self.hyper;
        let vbeta = beta * self.vocab_size as f64;
        let ChainState { z, nkv, njk, nk, rng, .. } = self;

        let mut inv_denom: Vec<f64> = nk.iter().map(|&n| 1.0 / (n as f64 + vbeta)).collect();
        let mut cum = vec![0.0f64; k];

        for (j, doc) in corpus.documents.iter().enumerate() {
            let zj = &mut z[j];
            let nj = &mut njk[j * k..(j + 1) * k];
            for (i, &w) in doc.word_ids.iter().enumerate() {
                let v = w as usize;
                let row = &mut nkv[v * k..(v + 1) * k];
                let old = zj[i] as usize;
                row[old] -= 1;
                nj[old] -= 1;
                nk[old] -= 1;
                inv_denom[old] = 1.0 / (nk[old] as f64 + vbeta);

                let mut total = 0.0;
                for t in 0..k {
                    total += (row[t] as f64 + beta) * (nj[t] as f64 + alpha) * inv_denom[t];
                    cum[t] = total;
                }
                let u = rng.random::<f64>() * total;
                let new = cum.partition_point(|&c| c <= u).min(k - 1);

                zj[i] = new as u32;
                row[new] += 1;
                nj[new] += 1;
                nk[new] += 1;
                inv_denom[new] = 1.0 / (nk[new] as f64 + vbeta);
            }
        }
        self.iteration += 1;
        if cfg!(debug_assertions) {
            self.check_consistency(corpus)?;
        }
        Ok(())
    }

    pub fn run(&mut self, corpus: &Corpus, sweeps: usize) -> Result<()> {
        for _ in 0..sweeps {
            self.gibbs_sweep(corpus)?;
        }
        Ok(())
    }

    /// Fraction of document `j`'s words on each topic. An empty document
    /// gets the uniform vector.
    pub fn topic_proportions(&self, j: usize) -> Vec<f64> {
        let counts = self.doc_topic_counts(j);
        let n: u32 = counts.iter().sum();
        if n == 0 {
            return vec![1.0 / self.topics() as f64; self.topics()];
        }
        counts.iter().map(|&c| c as f64 / n as f64).collect()
    }

    pub fn all_proportions(&self) -> Vec<Vec<f64>> {
        (0..self.num_docs()).map(|j| self.topic_proportions(j)).collect()
    }

    /// log p(w | z) with φ integrated out:
    /// Σ_k [log Γ(Vβ) − V log Γ(β) + Σ_v log Γ(N_kv + β) − log Γ(N_k + Vβ)].
    pub fn log_likelihood(&self) -> f64 {
        let vbeta = self.vocab_size as f64 * self.hyper.beta;
        let lg_beta = ln_gamma(self.hyper.beta);
        let topic_terms: f64 = self.nk.iter().map(|&n| ln_gamma(vbeta) - ln_gamma(n as f64 + vbeta)).sum();
        // empty cells contribute log Γ(β) − log Γ(β) = 0
        let cell_terms: f64 =
            self.nkv.iter().filter(|&&c| c > 0).map(|&c| ln_gamma(c as f64 + self.hyper.beta) - lg_beta).sum();
        topic_terms + cell_terms
    }
}

pub(crate) fn count_tables(corpus: &Corpus, k: usize, z: &[Vec<u32>]) -> (Vec<u32>, Vec<u32>, Vec<u32>) {
    let mut nkv = vec![0u32; corpus.vocab_size() * k];
    let mut njk = vec![0u32; z.len() * k];
    let mut nk = vec![0u32; k];
    for (j, (doc, zj)) in corpus.documents.iter().zip(z).enumerate() {
        for (&w, &t) in doc.word_ids.iter().zip(zj) {
            nkv[w as usize * k + t as usize] += 1;
            njk[j * k + t as usize] += 1;
            nk[t as usize] += 1;
        }
    }
    (nkv, njk, nk)
}

#[cfg(test)]
mod tests;
