use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{
    Corpus, DocMeta, Document, Period, SentimentLexicon, Split, TokenizedArticle, TradingCalendar, Vocabulary,
};
use crate::error::{Error, Result};

/// One row of the returns file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnRecord {
    pub ticker: String,
    pub period_id: String,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssemblyMode {
    /// One document per (ticker, period) holding every article that mentions the ticker.
    #[default]
    MergePerCompanyPeriod,
    /// One document per article; multi-ticker articles carry the mean label of their tickers.
    PerArticle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    #[default]
    Return,
    SquaredReturn,
    Sentiment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SentimentTiming {
    /// Score of the assembled document's tokens.
    #[default]
    PostMerge,
    /// Mean of the per-article scores.
    PreMerge,
}

#[derive(Debug, Clone)]
pub struct Assembly {
    pub corpus: Corpus,
    pub dropped_missing_return: usize,
    pub dropped_out_of_range: usize,
    pub duplicate_articles: usize,
}

fn return_table(returns: &[ReturnRecord]) -> Result<HashMap<(String, Period), f64>> {
    let mut table = HashMap::with_capacity(returns.len());
    for r in returns {
        let period: Period = r.period_id.parse()?;
        if table.insert((r.ticker.clone(), period), r.value).is_some() {
            return Err(Error::invalid(format!("duplicate return for {} {}", r.ticker, r.period_id)));
        }
    }
    Ok(table)
}

/// Builds labeled documents from preprocessed articles. Pairs without a
/// matching return are dropped and counted, never given a placeholder label.
pub fn assemble_documents(
    articles: &[TokenizedArticle],
    returns: &[ReturnRecord],
    calendar: &TradingCalendar,
    mode: AssemblyMode,
    label: LabelKind,
    lexicon: Option<&SentimentLexicon>,
    timing: SentimentTiming,
) -> Result<Assembly> {
    if label == LabelKind::Sentiment && lexicon.is_none() {
        return Err(Error::invalid("sentiment labels require a lexicon"));
    }
    let table = return_table(returns)?;

    let mut seen = HashSet::new();
    let mut duplicate_articles = 0;
    let mut dropped_out_of_range = 0;
    let mut dated: Vec<(Period, &TokenizedArticle)> = Vec::with_capacity(articles.len());
    for a in articles {
        if !seen.insert(a.id.as_str()) {
            duplicate_articles += 1;
            continue;
        }
        match calendar.assign_period(&a.timestamp) {
            Ok(p) => dated.push((p, a)),
            Err(Error::OutOfRange(_)) => dropped_out_of_range += 1,
            Err(e) => return Err(e),
        }
    }
    dated.sort_by(|(pa, a), (pb, b)| (pa, a.timestamp, &a.id).cmp(&(pb, b.timestamp, &b.id)));

    let score = |tokens: &[String]| -> Result<f64> {
        lexicon.expect("checked above").score_tokens(tokens.iter().map(String::as_str))
    };

    let mut documents = Vec::new();
    let mut doc_tokens: Vec<Vec<String>> = Vec::new();
    let mut dropped_missing_return = 0;

    match mode {
        AssemblyMode::MergePerCompanyPeriod => {
            let mut groups: BTreeMap<(Period, &str), Vec<&TokenizedArticle>> = BTreeMap::new();
            for (p, a) in &dated {
                let tickers: BTreeSet<&str> = a.tickers.iter().map(String::as_str).collect();
                for t in tickers {
                    groups.entry((*p, t)).or_default().push(a);
                }
            }
            for ((period, ticker), arts) in groups {
                let tokens: Vec<String> = arts.iter().flat_map(|a| a.tokens.iter().cloned()).collect();
                let sentiment = match lexicon {
                    None => None,
                    Some(_) => Some(match timing {
                        SentimentTiming::PostMerge => score(&tokens)?,
                        SentimentTiming::PreMerge => {
                            let s = arts.iter().map(|a| score(&a.tokens)).collect::<Result<Vec<_>>>()?;
                            s.iter().sum::<f64>() / s.len() as f64
                        }
                    }),
                };
                let ret = table.get(&(ticker.to_string(), period)).copied();
                let value = match label {
                    LabelKind::Return => ret,
                    LabelKind::SquaredReturn => ret.map(|r| r * r),
                    LabelKind::Sentiment => sentiment,
                };
                let Some(value) = value else {
                    dropped_missing_return += 1;
                    continue;
                };
                documents.push(Document {
                    id: format!("{ticker}@{period}"),
                    word_ids: Vec::new(),
                    label: value,
                    split: Split::Train,
                    meta: Some(DocMeta { ticker: ticker.to_string(), period_id: period.to_string(), sentiment }),
                });
                doc_tokens.push(tokens);
            }
        }
        AssemblyMode::PerArticle => {
            for (period, a) in &dated {
                let sentiment = lexicon.map(|_| score(&a.tokens)).transpose()?;
                let rets: Option<Vec<f64>> =
                    a.tickers.iter().map(|t| table.get(&(t.clone(), *period)).copied()).collect();
                let value = match label {
                    LabelKind::Return => rets.map(|r| r.iter().sum::<f64>() / r.len() as f64),
                    LabelKind::SquaredReturn => rets.map(|r| r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64),
                    LabelKind::Sentiment => sentiment,
                };
                let Some(value) = value else {
                    dropped_missing_return += 1;
                    continue;
                };
                documents.push(Document {
                    id: a.id.clone(),
                    word_ids: Vec::new(),
                    label: value,
                    split: Split::Train,
                    meta: Some(DocMeta { ticker: a.tickers.join("+"), period_id: period.to_string(), sentiment }),
                });
                doc_tokens.push(a.tokens.clone());
            }
        }
    }

    if documents.is_empty() {
        return Err(Error::EmptyCorpus("no labeled document could be assembled".into()));
    }
    // vocabulary covers only tokens that survive into a labeled document
    let vocab_tokens: BTreeSet<&str> = doc_tokens.iter().flatten().map(String::as_str).collect();
    let vocabulary = Vocabulary::from_tokens(vocab_tokens.into_iter().map(str::to_string).collect())?;
    for (doc, tokens) in documents.iter_mut().zip(&doc_tokens) {
        doc.word_ids = tokens.iter().map(|t| vocabulary.id(t).expect("token in vocabulary")).collect();
    }
    Ok(Assembly {
        corpus: Corpus::new(vocabulary, documents)?,
        dropped_missing_return,
        dropped_out_of_range,
        duplicate_articles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{DateTime, NaiveDate};

    fn cal() -> TradingCalendar {
        TradingCalendar::new_york(
            NaiveDate::from_ymd_opt(2019, 6, 3).unwrap(),
            NaiveDate::from_ymd_opt(2019, 6, 28).unwrap(),
            [],
        )
    }

    fn art(id: &str, ts: &str, tickers: &[&str], tokens: &[&str]) -> TokenizedArticle {
        TokenizedArticle {
            id: id.into(),
            timestamp: DateTime::parse_from_rfc3339(ts).unwrap(),
            tickers: tickers.iter().map(|s| s.to_string()).collect(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn ret(t: &str, p: &str, v: f64) -> ReturnRecord {
        ReturnRecord { ticker: t.into(), period_id: p.into(), value: v }
    }

    #[test]
    fn merges_same_ticker_same_period() {
        let arts = [
            art("b", "2019-06-12T11:00:00-04:00", &["A"], &["y", "z"]),
            art("a", "2019-06-12T10:00:00-04:00", &["A"], &["x"]),
        ];
        let out = assemble_documents(
            &arts,
            &[ret("A", "2019-06-12:intraday", 0.03)],
            &cal(),
            AssemblyMode::MergePerCompanyPeriod,
            LabelKind::Return,
            None,
            SentimentTiming::PostMerge,
        )
        .unwrap();
        let c = &out.corpus;
        assert_eq!(c.num_docs(), 1);
        let toks: Vec<&str> = c.documents[0].word_ids.iter().map(|&w| c.vocabulary.token(w).unwrap()).collect();
        assert_eq!(toks, ["x", "y", "z"]);
        assert_eq!(c.documents[0].label, 0.03);
        assert_eq!(c.documents[0].id, "A@2019-06-12:intraday");
    }

    #[test]
    fn per_article_mode_averages_returns() {
        let arts = [art("m", "2019-06-12T10:00:00-04:00", &["A", "B"], &["x"])];
        let returns = [ret("A", "2019-06-12:intraday", 0.02), ret("B", "2019-06-12:intraday", -0.01)];
        let out = assemble_documents(
            &arts,
            &returns,
            &cal(),
            AssemblyMode::PerArticle,
            LabelKind::Return,
            None,
            SentimentTiming::PostMerge,
        )
        .unwrap();
        assert!((out.corpus.documents[0].label - 0.005).abs() < 1e-15);
    }

    #[test]
    fn missing_return_drops_document() {
        let arts = [art("a", "2019-06-12T10:00:00-04:00", &["A", "B"], &["x"])];
        let out = assemble_documents(
            &arts,
            &[ret("A", "2019-06-12:intraday", 0.02)],
            &cal(),
            AssemblyMode::MergePerCompanyPeriod,
            LabelKind::Return,
            None,
            SentimentTiming::PostMerge,
        )
        .unwrap();
        assert_eq!(out.corpus.num_docs(), 1);
        assert_eq!(out.dropped_missing_return, 1);
        assert!(assemble_documents(
            &arts,
            &[],
            &cal(),
            AssemblyMode::MergePerCompanyPeriod,
            LabelKind::Return,
            None,
            SentimentTiming::PostMerge,
        )
        .is_err());
    }
}
