//! Labeled document collections: vocabulary, documents with split tags, and
//! the ingestion pipeline that turns raw news articles plus per-period
//! returns into such a collection.

mod assemble;
mod calendar;
pub mod io;
mod preprocess;
mod split;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use assemble::{assemble_documents, Assembly, AssemblyMode, LabelKind, ReturnRecord, SentimentTiming};
pub use calendar::{Period, PeriodKind, TradingCalendar};
pub use preprocess::{
    default_stopwords, preprocess, tokenize, NoStemmer, PorterStemmer, PreprocessRules, RawArticle, Stemmer,
    StemmerKind, TokenizedArticle,
};
pub use split::{shuffle_indices, split_corpus, SplitFractions};

/// Bijective token ↔ id map; ids are dense in `[0, V)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::invalid(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    /// Synthetic vocabulary `w0000, w0001, ...`.
    pub fn synthetic(size: usize) -> Self {
        let width = size.saturating_sub(1).to_string().len().max(4);
        let tokens = (0..size).map(|i| format!("w{i:0width$}")).collect();
        Self::from_tokens(tokens).expect("synthetic tokens are distinct")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// SHA-256 over the newline-joined token list.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Holdout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocMeta {
    pub ticker: String,
    pub period_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentiment: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub word_ids: Vec<u32>,
    pub label: f64,
    pub split: Split,
    pub meta: Option<DocMeta>,
}

impl Document {
    pub fn len(&self) -> usize {
        self.word_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word_ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub vocabulary: Vocabulary,
    pub documents: Vec<Document>,
}

impl Corpus {
    /// Validates id uniqueness and that every word id indexes the vocabulary.
    pub fn new(vocabulary: Vocabulary, documents: Vec<Document>) -> Result<Self> {
        let v = vocabulary.len() as u32;
        let mut seen = HashSet::with_capacity(documents.len());
        for d in &documents {
            if !seen.insert(d.id.as_str()) {
                return Err(Error::invalid(format!("duplicate document id {:?}", d.id)));
            }
            if let Some(&bad) = d.word_ids.iter().find(|&&w| w >= v) {
                return Err(Error::OutOfRange(format!("document {:?} has word id {bad} ≥ V = {v}", d.id)));
            }
        }
        Ok(Self { vocabulary, documents })
    }

    pub fn num_docs(&self) -> usize {
        self.documents.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn total_tokens(&self) -> usize {
        self.documents.iter().map(Document::len).sum()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.documents.iter().map(|d| d.label).collect()
    }

    pub fn indices_where(&self, mut pred: impl FnMut(&Document) -> bool) -> Vec<usize> {
        (0..self.documents.len()).filter(|&i| pred(&self.documents[i])).collect()
    }

    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        self.indices_where(|d| d.split == split)
    }

    /// Sub-corpus over the given document indices, sharing the vocabulary.
    pub fn subset(&self, indices: &[usize]) -> Corpus {
        Corpus {
            vocabulary: self.vocabulary.clone(),
            documents: indices.iter().map(|&i| self.documents[i].clone()).collect(),
        }
    }
}

/// Positive and negative word lists, matched against (stemmed) tokens.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SentimentLexicon {
    positive: HashSet<String>,
    negative: HashSet<String>,
}

impl SentimentLexicon {
    pub fn new(positive: HashSet<String>, negative: HashSet<String>) -> Result<Self> {
        if let Some(t) = positive.intersection(&negative).next() {
            return Err(Error::invalid(format!("lexicon token {t:?} is both positive and negative")));
        }
        Ok(Self { positive, negative })
    }

    /// Passes every entry through `stemmer` so entries match preprocessed tokens.
    pub fn stemmed(&self, stemmer: &dyn Stemmer) -> Result<Self> {
        let f = |s: &HashSet<String>| s.iter().map(|t| stemmer.stem(&t.to_lowercase())).collect();
        Self::new(f(&self.positive), f(&self.negative))
    }

    pub fn is_positive(&self, token: &str) -> bool {
        self.positive.contains(token)
    }

    pub fn is_negative(&self, token: &str) -> bool {
        self.negative.contains(token)
    }

    /// `(count_pos − count_neg) / N` over a token sequence.
    pub fn score_tokens<'a>(&self, tokens: impl IntoIterator<Item = &'a str>) -> Result<f64> {
        let (mut pos, mut neg, mut n) = (0usize, 0usize, 0usize);
        for t in tokens {
            n += 1;
            if self.positive.contains(t) {
                pos += 1;
            } else if self.negative.contains(t) {
                neg += 1;
            }
        }
        if n == 0 {
            return Err(Error::Domain("sentiment of an empty document".into()));
        }
        Ok((pos as f64 - neg as f64) / n as f64)
    }
}

pub fn sentiment_score(doc: &Document, vocabulary: &Vocabulary, lexicon: &SentimentLexicon) -> Result<f64> {
    let mut tokens = Vec::with_capacity(doc.len());
    for &w in &doc.word_ids {
        tokens.push(vocabulary.token(w).ok_or_else(|| Error::OutOfRange(format!("word id {w} not in vocabulary")))?);
    }
    lexicon.score_tokens(tokens)
}
