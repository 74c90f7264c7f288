use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, Split, Vocabulary};
use crate::error::{Error, Result};
use crate::sampler::Hyperparams;

pub const MAX_DOCS: usize = 4;
pub const MAX_DOC_LEN: usize = 4;
pub const MAX_TOPICS: usize = 3;
pub const MAX_VOCAB: usize = 4;
pub const MAX_STATES: u128 = 6561;

/// Serialized form of a [`TinyInstance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TinySpec {
    pub name: String,
    pub vocab_size: usize,
    pub docs: Vec<Vec<u32>>,
    pub labels: Vec<f64>,
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub eta: Vec<f64>,
}

/// A corpus small enough that every topic assignment can be enumerated.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyInstance {
    pub name: String,
    pub corpus: Corpus,
    pub hyper: Hyperparams,
    pub eta: Vec<f64>,
    /// (document, position) of each flattened token.
    sites: Vec<(usize, usize)>,
}

impl TinyInstance {
    pub fn from_spec(spec: &TinySpec) -> Result<Self> {
        let hyper = Hyperparams::new(spec.topics, spec.alpha, spec.beta)?;
        if spec.docs.len() != spec.labels.len() {
            return Err(Error::invalid("one label per document required"));
        }
        if spec.eta.len() != spec.topics {
            return Err(Error::invalid("eta must have one entry per topic"));
        }
        let too_big = spec.docs.is_empty()
            || spec.docs.len() > MAX_DOCS
            || spec.docs.iter().any(|d| d.is_empty() || d.len() > MAX_DOC_LEN)
            || spec.topics > MAX_TOPICS
            || spec.vocab_size > MAX_VOCAB;
        let n: usize = spec.docs.iter().map(Vec::len).sum();
        let size = (spec.topics as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        if size > MAX_STATES {
            return Err(Error::EnumerationTooLarge { size, bound: MAX_STATES });
        }
        if too_big {
            return Err(Error::invalid(format!(
                "tiny instances allow ≤{MAX_DOCS} non-empty documents of ≤{MAX_DOC_LEN} words, K ≤ {MAX_TOPICS}, V ≤ {MAX_VOCAB}"
            )));
        }
        let documents = spec
            .docs
            .iter()
            .zip(&spec.labels)
            .enumerate()
            .map(|(j, (w, &y))| Document {
                id: format!("t{j}"),
                word_ids: w.clone(),
                label: y,
                split: Split::Train,
                meta: None,
            })
            .collect();
        let corpus = Corpus::new(Vocabulary::synthetic(spec.vocab_size), documents)?;
        let sites = spec.docs.iter().enumerate().flat_map(|(j, d)| (0..d.len()).map(move |i| (j, i))).collect();
        Ok(Self { name: spec.name.clone(), corpus, hyper, eta: spec.eta.clone(), sites })
    }

    pub fn spec(&self) -> TinySpec {
        TinySpec {
            name: self.name.clone(),
            vocab_size: self.corpus.vocab_size(),
            docs: self.corpus.documents.iter().map(|d| d.word_ids.clone()).collect(),
            labels: self.labels(),
            topics: self.hyper.topics,
            alpha: self.hyper.alpha,
            beta: self.hyper.beta,
            eta: self.eta.clone(),
        }
    }

    /// Built-in instances, numbered from 1.
    pub fn builtin(n: usize) -> Result<Self> {
        let spec = |name: &str, v, docs: &[&[u32]], labels: &[f64], k, alpha, beta, eta: &[f64]| TinySpec {
            name: name.into(),
            vocab_size: v,
            docs: docs.iter().map(|d| d.to_vec()).collect(),
            labels: labels.to_vec(),
            topics: k,
            alpha,
            beta,
            eta: eta.to_vec(),
        };
        let s = match n {
            1 => spec("pair", 2, &[&[0, 1], &[1, 0]], &[0.2, 0.8], 2, 0.5, 0.5, &[0.0, 1.0]),
            2 => spec("six-tokens", 4, &[&[0, 1, 2], &[2, 3, 3]], &[0.1, 0.9], 2, 0.5, 0.5, &[-0.5, 1.5]),
            3 => spec("three-topics", 3, &[&[0, 1], &[1, 2], &[2, 0]], &[0.0, 0.5, 1.0], 3, 0.3, 0.2, &[0.0, 0.5, 1.0]),
            4 => spec("three-docs", 2, &[&[0, 1], &[1, 1], &[0, 0]], &[0.3, 0.55, 0.9], 2, 0.5, 0.2, &[0.0, 1.0]),
            5 => spec(
                "four-docs",
                3,
                &[&[0, 0, 1], &[1, 2, 2], &[0, 2, 1], &[2, 2, 2]],
                &[0.3, 0.62, 0.1, 0.95],
                2,
                0.5,
                0.1,
                &[0.0, 1.0],
            ),
            6 => spec("split-half", 2, &[&[0, 1]], &[0.5], 2, 0.5, 0.5, &[0.0, 1.0]),
            _ => return Err(Error::OutOfRange(format!("no built-in instance {n} (1..={BUILTIN_COUNT})"))),
        };
        Self::from_spec(&s)
    }

    pub fn builtins() -> Vec<Self> {
        (1..=BUILTIN_COUNT).map(|n| Self::builtin(n).expect("built-in instances are valid")).collect()
    }

    pub fn topics(&self) -> usize {
        self.hyper.topics
    }

    pub fn num_docs(&self) -> usize {
        self.corpus.num_docs()
    }

    pub fn num_tokens(&self) -> usize {
        self.sites.len()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.corpus.labels()
    }

    /// K^n, the number of assignments.
    pub fn state_count(&self) -> usize {
        self.topics().pow(self.num_tokens() as u32)
    }

    /// Assignment with the given index; the first token is the least significant digit.
    pub fn assignment(&self, mut index: usize) -> Vec<Vec<u32>> {
        let k = self.topics();
        let mut z: Vec<Vec<u32>> = self.corpus.documents.iter().map(|d| vec![0; d.len()]).collect();
        for &(j, i) in &self.sites {
            z[j][i] = (index % k) as u32;
            index /= k;
        }
        z
    }

    pub fn index_of(&self, z: &[Vec<u32>]) -> usize {
        let k = self.topics();
        self.sites.iter().rev().fold(0, |acc, &(j, i)| acc * k + z[j][i] as usize)
    }

    /// Per-document topic proportions of an assignment.
    pub fn proportions(&self, z: &[Vec<u32>]) -> Vec<Vec<f64>> {
        let k = self.topics();
        z.iter()
            .map(|zj| {
                let mut c = vec![0.0; k];
                zj.iter().for_each(|&t| c[t as usize] += 1.0);
                c.iter().map(|x| x / zj.len() as f64).collect()
            })
            .collect()
    }
}

pub const BUILTIN_COUNT: usize = 6;
