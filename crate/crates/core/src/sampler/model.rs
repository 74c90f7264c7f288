use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ChainState, Hyperparams};
use crate::corpus::io::{read_to_string, write_file};
use crate::error::{Error, Result};
use crate::slda::RegressionFit;

/// Smoothed topic-word estimates φ̂_kv = (N_kv + β) / (N_k + Vβ).
#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    hyper: Hyperparams,
    vocab_size: usize,
    /// word-major, `v * K + k`
    phi_by_word: Vec<f64>,
}

impl TopicModel {
    /// `nkv` in word-major layout.
    pub fn from_counts(hyper: Hyperparams, vocab_size: usize, nkv: &[u32], nk: &[u32]) -> Self {
        let k = hyper.topics;
        let vbeta = vocab_size as f64 * hyper.beta;
        let inv: Vec<f64> = nk.iter().map(|&n| 1.0 / (n as f64 + vbeta)).collect();
        let phi_by_word = nkv.iter().enumerate().map(|(idx, &c)| (c as f64 + hyper.beta) * inv[idx % k]).collect();
        Self { hyper, vocab_size, phi_by_word }
    }

    pub fn from_chain(state: &ChainState) -> Self {
        Self::from_counts(state.hyper, state.vocab_size, &state.nkv, &state.nk)
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

    pub fn phi(&self, k: usize, v: usize) -> f64 {
        self.phi_by_word[v * self.topics() + k]
    }

    pub(crate) fn word_column(&self, v: usize) -> &[f64] {
        let k = self.topics();
        &self.phi_by_word[v * k..(v + 1) * k]
    }

    pub fn topic(&self, k: usize) -> Vec<f64> {
        (0..self.vocab_size).map(|v| self.phi(k, v)).collect()
    }

    /// The `n` most probable words of topic `k`, ties broken by word id.
    pub fn top_words(&self, k: usize, n: usize) -> Vec<(u32, f64)> {
        let mut words: Vec<(u32, f64)> = (0..self.vocab_size).map(|v| (v as u32, self.phi(k, v))).collect();
        words.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        words.truncate(n);
        words
    }
}

pub const MODEL_FORMAT: &str = "branchlda-model";
pub const MODEL_VERSION: u32 = 1;

/// On-disk model: JSON with a SHA-256 over the count table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub hyperparams: Hyperparams,
    pub vocab_size: usize,
    pub vocab_sha256: String,
    /// K rows of V counts.
    pub nkv: Vec<Vec<u32>>,
    pub counts_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<Vec<u32>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regression: Option<RegressionFit>,
}

fn counts_digest(nkv: &[Vec<u32>]) -> String {
    let mut h = Sha256::new();
    for row in nkv {
        for c in row {
            h.update(c.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

impl ModelFile {
    pub fn from_chain(
        state: &ChainState,
        vocab_sha256: String,
        keep_z: bool,
        regression: Option<RegressionFit>,
    ) -> Self {
        let k = state.topics();
        let nkv: Vec<Vec<u32>> =
            (0..k).map(|t| (0..state.vocab_size).map(|v| state.word_topic_count(t, v)).collect()).collect();
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            hyperparams: state.hyper,
            vocab_size: state.vocab_size,
            vocab_sha256,
            counts_sha256: counts_digest(&nkv),
            nkv,
            z: keep_z.then(|| state.z.clone()),
            regression,
        }
    }

    pub fn verify(&self) -> Result<()> {
        if self.format != MODEL_FORMAT || self.version != MODEL_VERSION {
            return Err(Error::invalid(format!("unsupported model {} v{}", self.format, self.version)));
        }
        self.hyperparams.validate()?;
        if self.nkv.len() != self.hyperparams.topics || self.nkv.iter().any(|r| r.len() != self.vocab_size) {
            return Err(Error::invalid("model count table has the wrong shape"));
        }
        if counts_digest(&self.nkv) != self.counts_sha256 {
            return Err(Error::Checksum("model counts".into()));
        }
        Ok(())
    }

    pub fn topic_model(&self) -> TopicModel {
        let k = self.hyperparams.topics;
        let mut nkv = vec![0u32; k * self.vocab_size];
        let mut nk = vec![0u32; k];
        for (t, row) in self.nkv.iter().enumerate() {
            for (v, &c) in row.iter().enumerate() {
                nkv[v * k + t] = c;
                nk[t] += c;
            }
        }
        TopicModel::from_counts(self.hyperparams, self.vocab_size, &nkv, &nk)
    }
}

pub fn save_model(path: &Path, model: &ModelFile) -> Result<()> {
    let mut bytes = serde_json::to_vec(model)?;
    bytes.push(b'\n');
    write_file(path, &bytes)
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let model: ModelFile = serde_json::from_str(&read_to_string(path)?)?;
    model.verify()?;
    Ok(model)
}
