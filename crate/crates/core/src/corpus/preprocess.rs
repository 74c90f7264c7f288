use std::collections::{HashMap, HashSet};

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One input news record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawArticle {
    pub id: String,
    pub timestamp: DateTime<FixedOffset>,
    pub tickers: Vec<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedArticle {
    pub id: String,
    pub timestamp: DateTime<FixedOffset>,
    pub tickers: Vec<String>,
    pub tokens: Vec<String>,
}

pub trait Stemmer: Send + Sync {
    fn stem(&self, token: &str) -> String;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoStemmer;

impl Stemmer for NoStemmer {
    fn stem(&self, token: &str) -> String {
        token.to_string()
    }
}

/// English Snowball ("Porter2") stemmer.
pub struct PorterStemmer(rust_stemmers::Stemmer);

impl PorterStemmer {
    pub fn new() -> Self {
        Self(rust_stemmers::Stemmer::create(rust_stemmers::Algorithm::English))
    }
}

impl Default for PorterStemmer {
    fn default() -> Self {
        Self::new()
    }
}

impl Stemmer for PorterStemmer {
    fn stem(&self, token: &str) -> String {
        self.0.stem(token).into_owned()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StemmerKind {
    #[default]
    Porter,
    None,
}

impl StemmerKind {
    pub fn build(self) -> Box<dyn Stemmer> {
        match self {
            StemmerKind::Porter => Box::new(PorterStemmer::new()),
            StemmerKind::None => Box::new(NoStemmer),
        }
    }
}

impl std::str::FromStr for StemmerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "porter" => Ok(StemmerKind::Porter),
            "none" => Ok(StemmerKind::None),
            _ => Err(Error::invalid(format!("unknown stemmer {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PreprocessRules {
    pub stopwords: HashSet<String>,
    pub stemmer: StemmerKind,
    pub min_count: usize,
    pub min_len: usize,
    pub max_tickers: usize,
}

impl Default for PreprocessRules {
    fn default() -> Self {
        Self { stopwords: default_stopwords(), stemmer: StemmerKind::Porter, min_count: 7, min_len: 50, max_tickers: 3 }
    }
}

pub fn default_stopwords() -> HashSet<String> {
    include_str!("stopwords.txt").lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect()
}

/// Lowercases and splits on anything that is not alphanumeric; tokens without a
/// letter (pure numbers) are discarded.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().any(char::is_alphabetic))
        .map(str::to_lowercase)
        .collect()
}

/// Runs the filter chain: stem → stopwords → {corpus-wide min count, article
/// min length, ticker limit} repeated until nothing changes.
pub fn preprocess(articles: &[RawArticle], rules: &PreprocessRules) -> Result<Vec<TokenizedArticle>> {
    let stemmer = rules.stemmer.build();
    preprocess_with(articles, rules, stemmer.as_ref())
}

pub fn preprocess_with(
    articles: &[RawArticle],
    rules: &PreprocessRules,
    stemmer: &dyn Stemmer,
) -> Result<Vec<TokenizedArticle>> {
    let stop: HashSet<String> = rules.stopwords.iter().map(|w| stemmer.stem(&w.to_lowercase())).collect();

    let mut out: Vec<TokenizedArticle> = articles
        .iter()
        .map(|a| TokenizedArticle {
            id: a.id.clone(),
            timestamp: a.timestamp,
            tickers: a.tickers.clone(),
            tokens: tokenize(&a.text)
                .iter()
                .map(|t| stemmer.stem(t))
                .filter(|t| !t.is_empty() && !stop.contains(t))
                .collect(),
        })
        .collect();

    // Dropping an article can push a token under the count threshold, and
    // dropping a token can push an article under the length threshold.
    loop {
        let before: usize = out.len() + out.iter().map(|a| a.tokens.len()).sum::<usize>();

        let mut counts: HashMap<&str, usize> = HashMap::new();
        for a in &out {
            for t in &a.tokens {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let rare: HashSet<String> =
            counts.into_iter().filter(|&(_, c)| c < rules.min_count).map(|(t, _)| t.to_string()).collect();
        if !rare.is_empty() {
            for a in &mut out {
                a.tokens.retain(|t| !rare.contains(t));
            }
        }
        out.retain(|a| {
            a.tokens.len() >= rules.min_len && !a.tickers.is_empty() && a.tickers.len() <= rules.max_tickers
        });

        let after: usize = out.len() + out.iter().map(|a| a.tokens.len()).sum::<usize>();
        if after == before {
            break;
        }
    }

    if out.is_empty() {
        return Err(Error::EmptyCorpus("no article survived preprocessing".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn art(id: &str, tickers: &[&str], text: &str) -> RawArticle {
        RawArticle {
            id: id.into(),
            timestamp: DateTime::parse_from_rfc3339("2019-06-12T10:00:00-04:00").unwrap(),
            tickers: tickers.iter().map(|s| s.to_string()).collect(),
            text: text.into(),
        }
    }

    fn rules(min_count: usize, min_len: usize) -> PreprocessRules {
        PreprocessRules { stopwords: HashSet::new(), stemmer: StemmerKind::None, min_count, min_len, max_tickers: 3 }
    }

    #[test]
    fn rare_token_removed_everywhere() {
        let mut text_a = "alpha ".repeat(7);
        text_a.push_str(&"beta ".repeat(3));
        let text_b = "beta ".repeat(3) + "alpha";
        let out = preprocess(&[art("a", &["X"], &text_a), art("b", &["X"], &text_b)], &rules(7, 0)).unwrap();
        // beta appears 6 times corpus-wide
        assert!(out.iter().all(|a| a.tokens.iter().all(|t| t == "alpha")));
        assert_eq!(out[0].tokens.len(), 7);
        assert_eq!(out[1].tokens.len(), 1);
    }

    #[test]
    fn short_article_dropped() {
        let long = "w ".repeat(50);
        let short = "w ".repeat(49);
        let out = preprocess(&[art("a", &["X"], &long), art("b", &["X"], &short)], &rules(0, 50)).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].id, "a");
    }

    #[test]
    fn ticker_limit_and_empty_result() {
        let text = "w ".repeat(5);
        let out =
            preprocess(&[art("a", &["A", "B", "C"], &text), art("b", &["A", "B", "C", "D"], &text)], &rules(0, 0))
                .unwrap();
        assert_eq!(out.len(), 1);
        let err = preprocess(&[art("b", &["A", "B", "C", "D"], &text)], &rules(0, 0)).unwrap_err();
        assert!(matches!(err, Error::EmptyCorpus(_)));
    }

    #[test]
    fn stopwords_and_stemming() {
        let r = PreprocessRules { stemmer: StemmerKind::Porter, ..rules(0, 0) };
        let r = PreprocessRules { stopwords: ["the".to_string()].into_iter().collect(), ..r };
        let out = preprocess(&[art("a", &["X"], "The profits were rising; 2019 earnings")], &r).unwrap();
        assert_eq!(out[0].tokens, vec!["profit", "were", "rise", "earn"]);
    }

    #[test]
    fn fixed_point_cascade() {
        // "gamma" has 7 occurrences, 2 of them in an article that fails the length rule.
        let a = "gamma ".repeat(5) + &"delta ".repeat(10);
        let b = "gamma gamma";
        let out = preprocess(&[art("a", &["X"], &a), art("b", &["X"], b)], &rules(7, 3)).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].tokens.iter().all(|t| t == "delta"));
    }

    fn as_raw(out: &[TokenizedArticle]) -> Vec<RawArticle> {
        out.iter()
            .map(|a| RawArticle {
                id: a.id.clone(),
                timestamp: a.timestamp,
                tickers: a.tickers.clone(),
                text: a.tokens.join(" "),
            })
            .collect()
    }

    proptest! {
        #[test]
        fn identity_without_filters(words in prop::collection::vec("[a-e]{1,3}", 1..40)) {
            let text = words.join(" ");
            let out = preprocess(&[art("a", &["X"], &text)], &rules(0, 0)).unwrap();
            let mut got = out[0].tokens.clone();
            let mut want = words.clone();
            got.sort();
            want.sort();
            prop_assert_eq!(got, want);
        }

        #[test]
        fn preprocessing_is_idempotent(
            docs in prop::collection::vec(prop::collection::vec("[a-f]{1,2}", 0..30), 1..8),
            min_count in 0usize..6,
            min_len in 0usize..12,
        ) {
            let arts: Vec<RawArticle> = docs
                .iter()
                .enumerate()
                .map(|(i, w)| art(&format!("a{i}"), &["X"], &w.join(" ")))
                .collect();
            let r = rules(min_count, min_len);
            if let Ok(once) = preprocess(&arts, &r) {
                let twice = preprocess(&as_raw(&once), &r).unwrap();
                prop_assert_eq!(once, twice);
            }
        }
    }
}
