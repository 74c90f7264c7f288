use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::io::{read_articles, read_lexicon, read_returns, read_ticker_map, read_to_string, read_word_list};
use crate::corpus::{
    assemble_documents, default_stopwords, preprocess, split_corpus, AssemblyMode, Corpus, LabelKind, PreprocessRules,
    RawArticle, SentimentTiming, Split, SplitFractions, StemmerKind, TradingCalendar,
};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub articles: PathBuf,
    pub returns: PathBuf,
    pub calendar: PathBuf,
    pub lexicon: Option<PathBuf>,
    pub ticker_map: Option<PathBuf>,
    /// Replaces the built-in stopword list.
    pub stopwords: Option<PathBuf>,
    pub stemmer: StemmerKind,
    pub min_count: usize,
    pub min_len: usize,
    pub max_tickers: usize,
    pub mode: AssemblyMode,
    pub label: LabelKind,
    pub sentiment_timing: SentimentTiming,
    pub split: SplitFractions,
    pub seed: u64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        let rules = PreprocessRules::default();
        Self {
            articles: PathBuf::new(),
            returns: PathBuf::new(),
            calendar: PathBuf::new(),
            lexicon: None,
            ticker_map: None,
            stopwords: None,
            stemmer: rules.stemmer,
            min_count: rules.min_count,
            min_len: rules.min_len,
            max_tickers: rules.max_tickers,
            mode: AssemblyMode::default(),
            label: LabelKind::default(),
            sentiment_timing: SentimentTiming::default(),
            split: SplitFractions::default(),
            seed: 0,
        }
    }
}

impl IngestConfig {
    /// Makes relative paths relative to `base`.
    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.articles);
        fix(&mut self.returns);
        fix(&mut self.calendar);
        for p in [&mut self.lexicon, &mut self.ticker_map, &mut self.stopwords].into_iter().flatten() {
            fix(p);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub articles_read: usize,
    pub articles_kept: usize,
    pub duplicate_articles: usize,
    pub dropped_out_of_range: usize,
    pub dropped_missing_return: usize,
    pub documents: usize,
    pub vocab_size: usize,
    pub vocab_sha256: String,
    pub train: usize,
    pub validation: usize,
    pub holdout: usize,
}

/// Rewrites article tickers through an alias map; unmapped tickers pass
/// through and duplicates created by the mapping are dropped.
pub fn apply_ticker_map(articles: &mut [RawArticle], map: &HashMap<String, String>) {
    for a in articles {
        let mut out: Vec<String> = Vec::with_capacity(a.tickers.len());
        for t in &a.tickers {
            let mapped = map.get(t).unwrap_or(t);
            if !out.contains(mapped) {
                out.push(mapped.clone());
            }
        }
        a.tickers = out;
    }
}

/// Reads, preprocesses, labels and splits a news corpus.
pub fn ingest(config: &IngestConfig) -> Result<(Corpus, IngestReport)> {
    let mut articles = read_articles(&config.articles)?;
    let articles_read = articles.len();
    // first occurrence of an id wins; later copies never reach the token counts
    let mut seen = std::collections::HashSet::new();
    articles.retain(|a| seen.insert(a.id.clone()));
    let duplicate_articles = articles_read - articles.len();
    if let Some(p) = &config.ticker_map {
        apply_ticker_map(&mut articles, &read_ticker_map(p)?);
    }
    let rules = PreprocessRules {
        stopwords: match &config.stopwords {
            Some(p) => read_word_list(p)?,
            None => default_stopwords(),
        },
        stemmer: config.stemmer,
        min_count: config.min_count,
        min_len: config.min_len,
        max_tickers: config.max_tickers,
    };
    let tokenized = preprocess(&articles, &rules)?;
    let lexicon = match &config.lexicon {
        Some(p) => Some(read_lexicon(p)?.stemmed(config.stemmer.build().as_ref())?),
        None => None,
    };
    let calendar = TradingCalendar::from_toml(&read_to_string(&config.calendar)?)?;
    let returns = read_returns(&config.returns)?;
    let assembly = assemble_documents(
        &tokenized,
        &returns,
        &calendar,
        config.mode,
        config.label,
        lexicon.as_ref(),
        config.sentiment_timing,
    )?;
    let corpus = split_corpus(&assembly.corpus, config.split, config.seed)?;
    let report = IngestReport {
        articles_read,
        articles_kept: tokenized.len(),
        duplicate_articles,
        dropped_out_of_range: assembly.dropped_out_of_range,
        dropped_missing_return: assembly.dropped_missing_return,
        documents: corpus.num_docs(),
        vocab_size: corpus.vocab_size(),
        vocab_sha256: corpus.vocabulary.digest(),
        train: corpus.split_indices(Split::Train).len(),
        validation: corpus.split_indices(Split::Validation).len(),
        holdout: corpus.split_indices(Split::Holdout).len(),
    };
    Ok((corpus, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticker_map_rewrites_and_dedups() {
        let mut a = vec![RawArticle {
            id: "a".into(),
            timestamp: "2019-06-03T10:00:00-04:00".parse().unwrap(),
            tickers: vec!["GOOGL".into(), "GOOG".into(), "MSFT".into()],
            text: String::new(),
        }];
        let map: HashMap<String, String> =
            [("GOOGL", "GOOG"), ("FB", "META")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        apply_ticker_map(&mut a, &map);
        assert_eq!(a[0].tickers, ["GOOG", "MSFT"]);
    }
}
