//! File formats: article JSON-lines, returns CSV, lexicon CSV, corpus
//! directories (`corpus.jsonl` + `vocab.txt`).

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Corpus, Document, RawArticle, ReturnRecord, SentimentLexicon, Vocabulary};
use crate::error::{Error, Result};

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const VOCAB_FILE: &str = "vocab.txt";

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    fs::File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(contents).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_articles(path: &Path) -> Result<Vec<RawArticle>> {
    let articles: Vec<RawArticle> = read_jsonl(path)?;
    if let Some(a) = articles.iter().find(|a| a.tickers.is_empty()) {
        return Err(Error::invalid(format!("article {:?} lists no tickers", a.id)));
    }
    Ok(articles)
}

pub fn read_returns(path: &Path) -> Result<Vec<ReturnRecord>> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["ticker", "period_id", "value"] {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "expected header ticker,period_id,value".into(),
        });
    }
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// `token,polarity` rows with polarity `positive` or `negative`.
pub fn read_lexicon(path: &Path) -> Result<SentimentLexicon> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let (mut pos, mut neg) = (HashSet::new(), HashSet::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let token = rec.get(0).unwrap_or("").trim().to_lowercase();
        match rec.get(1).map(str::trim) {
            Some("positive") => pos.insert(token),
            Some("negative") => neg.insert(token),
            other => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 2,
                    msg: format!("unknown polarity {other:?}"),
                })
            }
        };
    }
    SentimentLexicon::new(pos, neg)
}

/// One word per line; blank lines and `#` comments ignored.
pub fn read_word_list(path: &Path) -> Result<HashSet<String>> {
    Ok(read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect())
}

/// `alias,ticker` rows mapping article tickers onto return-file tickers.
pub fn read_ticker_map(path: &Path) -> Result<HashMap<String, String>> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let mut map = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        if let (Some(a), Some(t)) = (rec.get(0), rec.get(1)) {
            map.insert(a.trim().to_string(), t.trim().to_string());
        }
    }
    Ok(map)
}

pub fn write_corpus(dir: &Path, corpus: &Corpus) -> Result<()> {
    let mut w = create(&dir.join(CORPUS_FILE))?;
    for d in &corpus.documents {
        serde_json::to_writer(&mut w, d)?;
        w.write_all(b"\n").map_err(|e| Error::io(dir, e))?;
    }
    w.flush().map_err(|e| Error::io(dir, e))?;

    let mut w = create(&dir.join(VOCAB_FILE))?;
    for t in corpus.vocabulary.tokens() {
        writeln!(w, "{t}").map_err(|e| Error::io(dir, e))?;
    }
    w.flush().map_err(|e| Error::io(dir, e))
}

pub fn read_corpus(dir: &Path) -> Result<Corpus> {
    let tokens: Vec<String> = read_to_string(&dir.join(VOCAB_FILE))?.lines().map(str::to_string).collect();
    let documents: Vec<Document> = read_jsonl(&dir.join(CORPUS_FILE))?;
    Corpus::new(Vocabulary::from_tokens(tokens)?, documents)
}
