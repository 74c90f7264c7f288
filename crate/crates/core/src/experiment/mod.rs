//! The experiment grid: every (method, topic count, replicate) cell on one
//! corpus, with results written as flat CSV plus JSON side files.
//!
//! A cell's seed depends only on the master seed, the topic count and the
//! replicate number, so any row can be recomputed alone and the output does
//! not depend on the worker count.

mod ingest;
mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::io::{read_corpus, read_to_string, write_file};
use crate::corpus::{Corpus, LabelKind};
use crate::error::{Error, Result};
use crate::math::median;
use crate::parallel::{map_indices, with_workers};
use crate::rng::{derive_seed, tag};
use crate::sampler::Hyperparams;
use crate::search::{
    best_of_search, branching_search, run_lda_baseline, run_slda, Genealogy, Method, SearchConfig, SearchTrace,
};
use crate::slda::{EmSchedule, SigmaPolicy};
use crate::synth::{generate, SyntheticSpec, TruthSummary};

pub use ingest::{apply_ticker_map, ingest, IngestConfig, IngestReport};
pub use report::{top_topics_report, TopicReport, TopicSummary};

/// Overrides the configured worker count.
pub const WORKERS_ENV: &str = "BRANCHLDA_WORKERS";
pub const RESULTS_SCHEMA: &str = "branchlda-results";
pub const RESULTS_SCHEMA_VERSION: u32 = 1;
pub const RESULTS_COLUMNS: [&str; 6] = ["method", "topics", "replicate", "holdout_r2", "loglik", "wall_seconds"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentLabel {
    Return,
    SquaredReturn,
    Sentiment,
    #[default]
    Synthetic,
}

impl ExperimentLabel {
    pub fn label_kind(self) -> Option<LabelKind> {
        match self {
            ExperimentLabel::Return => Some(LabelKind::Return),
            ExperimentLabel::SquaredReturn => Some(LabelKind::SquaredReturn),
            ExperimentLabel::Sentiment => Some(LabelKind::Sentiment),
            ExperimentLabel::Synthetic => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub label: ExperimentLabel,
    pub methods: Vec<Method>,
    pub topics: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub workers: Option<usize>,
    /// α = alpha_scale / K.
    pub alpha_scale: f64,
    pub beta: f64,
    /// A directory written by `ingest` or `simulate`.
    pub corpus: Option<PathBuf>,
    pub ingest: Option<IngestConfig>,
    /// Used when `label = "synthetic"`; defaults to the desk-scale spec.
    pub synthetic: Option<SyntheticSpec>,
    /// `n_runs` applies to Best-Of and Branching; `seed` is replaced per cell.
    pub search: SearchConfig,
    pub slda: EmSchedule,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            label: ExperimentLabel::default(),
            methods: Method::ALL.to_vec(),
            topics: vec![10, 50, 100, 200],
            replicates: 10,
            seed: 0,
            workers: None,
            alpha_scale: 5.0,
            beta: 0.01,
            corpus: None,
            ingest: None,
            synthetic: None,
            search: SearchConfig::default(),
            slda: EmSchedule::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses TOML; relative paths are taken relative to `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut config: Self = toml::from_str(text)?;
        if let Some(p) = &mut config.corpus {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(i) = &mut config.ingest {
            i.resolve(base);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&read_to_string(path)?, base)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.topics.is_empty() || self.replicates == 0 {
            return Err(Error::invalid("methods, topics and replicates must be non-empty"));
        }
        if self.topics.contains(&0) {
            return Err(Error::invalid("topic counts must be positive"));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("workers must be at least 1"));
        }
        self.search.validate()?;
        self.slda.validate()?;
        for &k in &self.topics {
            self.hyperparams(k)?;
        }
        match (self.label, &self.corpus, &self.ingest) {
            (ExperimentLabel::Synthetic, None, None) => {
                self.synthetic_spec().validate()?;
            }
            (ExperimentLabel::Synthetic, _, _) => {
                return Err(Error::invalid("synthetic experiments take no corpus or ingest section"));
            }
            (_, Some(_), Some(_)) | (_, None, None) => {
                return Err(Error::invalid("give exactly one of corpus or [ingest]"));
            }
            _ if self.synthetic.is_some() => {
                return Err(Error::invalid("[synthetic] only applies to label = \"synthetic\""));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn hyperparams(&self, topics: usize) -> Result<Hyperparams> {
        Hyperparams::new(topics, self.alpha_scale / topics as f64, self.beta)
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        self.synthetic.clone().unwrap_or_default()
    }

    /// `BRANCHLDA_WORKERS` if set, else the `workers` key.
    pub fn effective_workers(&self) -> Result<Option<usize>> {
        match std::env::var(WORKERS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(Some(n)),
                _ => Err(Error::invalid(format!("{WORKERS_ENV}={v:?} is not a positive integer"))),
            },
            Err(_) => Ok(self.workers),
        }
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::with_capacity(self.methods.len() * self.topics.len() * self.replicates);
        for &method in &self.methods {
            for &topics in &self.topics {
                for replicate in 0..self.replicates {
                    cells.push(Cell { method, topics, replicate });
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSource {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub documents: usize,
    pub vocab_size: usize,
    pub vocab_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<TruthSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ingest: Option<IngestReport>,
}

/// Builds the corpus named by the config.
pub fn resolve_corpus(config: &ExperimentConfig) -> Result<(Corpus, CorpusSource)> {
    let summary = |kind: &str, path: Option<PathBuf>, c: &Corpus| CorpusSource {
        kind: kind.into(),
        path,
        documents: c.num_docs(),
        vocab_size: c.vocab_size(),
        vocab_sha256: c.vocabulary.digest(),
        truth: None,
        ingest: None,
    };
    if config.label == ExperimentLabel::Synthetic {
        let spec = config.synthetic_spec();
        let s = generate(&spec)?;
        let source = CorpusSource { truth: Some(s.truth.summary(&spec)), ..summary("synthetic", None, &s.corpus) };
        return Ok((s.corpus, source));
    }
    if let Some(dir) = &config.corpus {
        let c = read_corpus(dir)?;
        let source = summary("directory", Some(dir.clone()), &c);
        return Ok((c, source));
    }
    let mut ic = config.ingest.clone().ok_or_else(|| Error::invalid("no corpus source"))?;
    ic.label = config.label.label_kind().expect("checked non-synthetic");
    let (c, report) = ingest(&ic)?;
    let source = CorpusSource { ingest: Some(report), ..summary("ingest", None, &c) };
    Ok((c, source))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub method: Method,
    pub topics: usize,
    pub replicate: usize,
}

impl Cell {
    pub fn seed(&self, master: u64) -> u64 {
        derive_seed(master, &[tag::EXPERIMENT, self.topics as u64, self.replicate as u64])
    }

    pub fn key(&self) -> String {
        format!("{}-k{}-r{}", self.method, self.topics, self.replicate)
    }
}

/// Runs one cell. LDA and sLDA cells are a single replicate of their
/// protocol; sLDA uses σ = SD(labels). The trace's audit is checked here.
pub fn run_cell(corpus: &Corpus, config: &ExperimentConfig, cell: Cell) -> Result<SearchTrace> {
    let hyper = config.hyperparams(cell.topics)?;
    let seed = cell.seed(config.seed);
    let search = SearchConfig { seed, ..config.search.clone() };
    let single = SearchConfig { n_runs: 1, ..search.clone() };
    let trace = match cell.method {
        Method::Lda => run_lda_baseline(corpus, hyper, &single)?,
        Method::BestOf => best_of_search(corpus, hyper, &search)?,
        Method::Branching => branching_search(corpus, hyper, &search)?,
        Method::Slda => run_slda(corpus, hyper, SigmaPolicy::LabelSd, config.slda, &single)?,
    };
    trace.check_disjoint()?;
    Ok(trace)
}

/// The reported model of a trace: the single replicate for LDA and sLDA,
/// the highest-scoring checkpoint winner for Best-Of, the final parent for
/// Branching.
pub fn reported_winner(trace: &SearchTrace) -> Option<&crate::search::HoldoutEval> {
    match trace.method {
        Method::Lda | Method::Slda => trace.winners.first(),
        Method::BestOf => trace.best_winner(),
        Method::Branching => trace.winners.last(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: Method,
    pub topics: usize,
    pub replicate: usize,
    pub holdout_r2: f64,
    /// Training text log-likelihood of the reported chain.
    pub loglik: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub cell: Cell,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub genealogies: Vec<(Cell, Genealogy)>,
    pub failures: Vec<CellFailure>,
}

/// Runs every cell, in parallel up to the worker limit. A failing cell
/// yields a row of NaNs and a [`CellFailure`]; the rest still run.
pub fn run_experiment(config: &ExperimentConfig, corpus: &Corpus) -> Result<ExperimentOutput> {
    config.validate()?;
    let cells = config.cells();
    let results = with_workers(config.effective_workers()?, || {
        map_indices(cells.len(), |i| {
            let start = Instant::now();
            let r = run_cell(corpus, config, cells[i]);
            (r, start.elapsed().as_secs_f64())
        })
    })?;

    let mut out = ExperimentOutput { rows: Vec::new(), genealogies: Vec::new(), failures: Vec::new() };
    for (cell, (result, wall_seconds)) in cells.into_iter().zip(results) {
        let winner = result.and_then(|t| {
            let w = reported_winner(&t).cloned().ok_or_else(|| Error::Invariant("trace has no winner".into()))?;
            Ok((t, w))
        });
        let (holdout_r2, loglik) = match winner {
            Ok((trace, w)) => {
                out.genealogies.push((cell, trace.genealogy()));
                (w.holdout_r2, w.loglik)
            }
            Err(e) => {
                out.failures.push(CellFailure { cell, error: e.to_string() });
                (f64::NAN, f64::NAN)
            }
        };
        out.rows.push(ResultRow {
            method: cell.method,
            topics: cell.topics,
            replicate: cell.replicate,
            holdout_r2,
            loglik,
            wall_seconds,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoglikSummary {
    pub method: Method,
    pub topics: usize,
    pub replicates: usize,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

/// Per topic count: spread of the per-method median log-likelihoods relative
/// to their mean magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoglikSpread {
    pub topics: usize,
    pub methods: usize,
    pub relative_range: f64,
}

/// Medians over the successful replicates of each (method, topics) pair, in
/// first-appearance order.
pub fn loglik_summary(rows: &[ResultRow]) -> Vec<LoglikSummary> {
    let mut keys: Vec<(Method, usize)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.method, r.topics)) {
            keys.push((r.method, r.topics));
        }
    }
    keys.into_iter()
        .map(|(method, topics)| {
            let v: Vec<f64> = rows
                .iter()
                .filter(|r| r.method == method && r.topics == topics && r.loglik.is_finite())
                .map(|r| r.loglik)
                .collect();
            LoglikSummary {
                method,
                topics,
                replicates: v.len(),
                median: median(&v),
                min: v.iter().copied().fold(f64::NAN, f64::min),
                max: v.iter().copied().fold(f64::NAN, f64::max),
            }
        })
        .collect()
}

pub fn loglik_spread(summary: &[LoglikSummary]) -> Vec<LoglikSpread> {
    let mut topics: Vec<usize> = summary.iter().map(|s| s.topics).collect();
    topics.sort_unstable();
    topics.dedup();
    topics
        .into_iter()
        .map(|k| {
            let m: Vec<f64> =
                summary.iter().filter(|s| s.topics == k && s.median.is_finite()).map(|s| s.median).collect();
            let hi = m.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = m.iter().copied().fold(f64::INFINITY, f64::min);
            let scale = m.iter().map(|x| x.abs()).sum::<f64>() / m.len() as f64;
            let relative_range = if m.is_empty() { f64::NAN } else { (hi - lo) / scale };
            LoglikSpread { topics: k, methods: m.len(), relative_range }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub schema_version: u32,
    pub results_columns: Vec<String>,
    pub config: ExperimentConfig,
    pub corpus: CorpusSource,
    pub cells: usize,
    pub failures: Vec<CellFailure>,
}

pub fn results_csv(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RESULTS_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.method.to_string(),
            r.topics.to_string(),
            r.replicate.to_string(),
            r.holdout_r2.to_string(),
            r.loglik.to_string(),
            format!("{:.3}", r.wall_seconds),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Invariant(format!("csv buffer: {e}")))
}

fn loglik_csv(summary: &[LoglikSummary]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "topics", "replicates", "median_loglik", "min_loglik", "max_loglik"])?;
    for s in summary {
        w.write_record([
            s.method.to_string(),
            s.topics.to_string(),
            s.replicates.to_string(),
            s.median.to_string(),
            s.min.to_string(),
            s.max.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Invariant(format!("csv buffer: {e}")))
}

fn spread_csv(spread: &[LoglikSpread]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["topics", "methods", "relative_range"])?;
    for s in spread {
        w.write_record([s.topics.to_string(), s.methods.to_string(), s.relative_range.to_string()])?;
    }
    w.into_inner().map_err(|e| Error::Invariant(format!("csv buffer: {e}")))
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes `results.csv`, `loglik.csv`, `loglik_spread.csv`, `manifest.json`
/// and `genealogy/<method>-k<K>-r<replicate>.json` under `dir`.
pub fn write_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    source: &CorpusSource,
    out: &ExperimentOutput,
) -> Result<()> {
    let summary = loglik_summary(&out.rows);
    write_file(&dir.join("results.csv"), &results_csv(&out.rows)?)?;
    write_file(&dir.join("loglik.csv"), &loglik_csv(&summary)?)?;
    write_file(&dir.join("loglik_spread.csv"), &spread_csv(&loglik_spread(&summary))?)?;
    for (cell, g) in &out.genealogies {
        write_file(&dir.join("genealogy").join(format!("{}.json", cell.key())), &json_bytes(g)?)?;
    }
    let manifest = Manifest {
        schema: RESULTS_SCHEMA.into(),
        schema_version: RESULTS_SCHEMA_VERSION,
        results_columns: RESULTS_COLUMNS.iter().map(|s| s.to_string()).collect(),
        config: config.clone(),
        corpus: source.clone(),
        cells: out.rows.len(),
        failures: out.failures.clone(),
    };
    write_file(&dir.join("manifest.json"), &json_bytes(&manifest)?)
}
