use std::path::Path;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use branchlda::corpus::io::{read_corpus, read_to_string, write_corpus, write_file};
use branchlda::corpus::{AssemblyMode, Corpus, Document, LabelKind, SentimentTiming, Split, StemmerKind};
use branchlda::diagnostics::{
    concentration_curve, default_sigma_grid, log_ratio_growth, tiny_ratio_check, GrowthRow, SweepRow, TinyInstance,
    TinyRatioCheck, TinySpec,
};
use branchlda::experiment::{
    ingest as run_ingest, resolve_corpus, run_experiment, top_topics_report, write_outputs, ExperimentConfig,
    IngestConfig,
};
use branchlda::math::sample_sd;
use branchlda::rng::{derive_seed, tag};
use branchlda::sampler::{init_chain, load_model, save_model, ChainState, Hyperparams, ModelFile};
use branchlda::search::{
    best_of_search, branching_search, holdout_eval, run_lda_baseline, run_slda, KeepRule, Method, SearchConfig,
};
use branchlda::slda::{m_step, stochastic_em, EmSchedule, RegressionFit, SigmaPolicy};
use branchlda::synth::{generate, SyntheticSpec};

use crate::{
    ExperimentArgs, IngestArgs, KeepArg, LabelArg, ModeArg, PropCheckArgs, ReportArgs, SearchArgs, SigmaSweepArgs,
    SimulateArgs, StemmerArg, TimingArg, TrainLdaArgs, TrainSldaArgs,
};

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_file(path, &bytes)?;
    Ok(())
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|e| anyhow!("{p:?}: {e}")))
        .collect::<Result<Vec<T>>>()
        .with_context(|| format!("parsing list {s:?}"))
}

fn hyperparams(topics: usize, alpha: Option<f64>, beta: f64) -> Result<Hyperparams> {
    Ok(Hyperparams::new(topics, alpha.unwrap_or(5.0 / topics as f64), beta)?)
}

/// Train ∪ validation documents and the holdout documents.
fn training_split(corpus: &Corpus) -> Result<(Corpus, Vec<Document>)> {
    let chain = corpus.subset(&corpus.indices_where(|d| d.split != Split::Holdout));
    if chain.num_docs() == 0 {
        bail!("corpus has no train or validation documents");
    }
    let holdout = corpus.documents.iter().filter(|d| d.split == Split::Holdout).cloned().collect();
    Ok((chain, holdout))
}

#[derive(Serialize)]
struct TrainSummary {
    method: Method,
    hyperparams: Hyperparams,
    documents: usize,
    sweeps: u64,
    loglik: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    r2_in: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    holdout_r2: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    notes: Vec<String>,
}

/// Saves the model and summary; holdout R² is reported when the corpus has a
/// holdout split and the regression could be fit.
fn finish_training(
    out: &Path,
    method: Method,
    corpus: &Corpus,
    state: &ChainState,
    fit: Option<RegressionFit>,
    mut notes: Vec<String>,
    fold_in_sweeps: usize,
    keep_z: bool,
    seed: u64,
) -> Result<()> {
    let (chain, holdout) = training_split(corpus)?;
    let holdout_r2 = match (&fit, holdout.is_empty()) {
        (Some(f), false) => {
            let seed = derive_seed(seed, &[tag::FOLD_IN]);
            match holdout_eval(state, &chain.labels(), &holdout, Some(f), fold_in_sweeps, seed) {
                Ok(h) => Some(h.r2),
                Err(e) => {
                    notes.push(format!("holdout R² unavailable: {e}"));
                    None
                }
            }
        }
        _ => None,
    };
    let summary = TrainSummary {
        method,
        hyperparams: state.hyper(),
        documents: chain.num_docs(),
        sweeps: state.iteration(),
        loglik: state.log_likelihood(),
        r2_in: fit.as_ref().map(|f| f.r2_in),
        holdout_r2,
        notes,
    };
    let model = ModelFile::from_chain(state, corpus.vocabulary.digest(), keep_z, fit);
    save_model(&out.join("model.json"), &model)?;
    write_json(&out.join("summary.json"), &summary)?;
    eprintln!(
        "{method}: K={} loglik={:.1} r2_in={} holdout_r2={}",
        state.topics(),
        summary.loglik,
        summary.r2_in.map_or("-".into(), |r| format!("{r:.4}")),
        summary.holdout_r2.map_or("-".into(), |r| format!("{r:.4}")),
    );
    Ok(())
}

pub fn ingest(a: IngestArgs) -> Result<ExitCode> {
    let config = IngestConfig {
        articles: a.articles,
        returns: a.returns,
        calendar: a.calendar,
        lexicon: a.lexicon,
        ticker_map: a.ticker_map,
        stopwords: a.stopwords,
        stemmer: match a.stemmer {
            StemmerArg::Porter => StemmerKind::Porter,
            StemmerArg::None => StemmerKind::None,
        },
        min_count: a.min_count,
        min_len: a.min_len,
        max_tickers: a.max_tickers,
        mode: match a.mode {
            ModeArg::Merge => AssemblyMode::MergePerCompanyPeriod,
            ModeArg::PerArticle => AssemblyMode::PerArticle,
        },
        label: match a.label {
            LabelArg::Return => LabelKind::Return,
            LabelArg::SquaredReturn => LabelKind::SquaredReturn,
            LabelArg::Sentiment => LabelKind::Sentiment,
        },
        sentiment_timing: match a.sentiment_timing {
            TimingArg::Post => SentimentTiming::PostMerge,
            TimingArg::Pre => SentimentTiming::PreMerge,
        },
        split: a.splits.parse()?,
        seed: a.seed,
    };
    let (corpus, report) = run_ingest(&config)?;
    write_corpus(&a.out, &corpus)?;
    write_json(&a.out.join("ingest_report.json"), &report)?;
    eprintln!(
        "{} documents ({} train, {} validation, {} holdout), {} words",
        report.documents, report.train, report.validation, report.holdout, report.vocab_size
    );
    Ok(ExitCode::SUCCESS)
}

pub fn train_lda(a: TrainLdaArgs) -> Result<ExitCode> {
    let corpus = read_corpus(&a.corpus)?;
    let (chain, _) = training_split(&corpus)?;
    let alpha = if a.alpha_auto { None } else { a.alpha };
    let hyper = hyperparams(a.topics, alpha, a.beta)?;
    let mut state = init_chain(&chain, hyper, a.seed)?;
    state.run(&chain, a.iters)?;
    let mut notes = Vec::new();
    let fit = match m_step(&state.all_proportions(), &chain.labels()) {
        Ok(f) => Some(f),
        Err(e) => {
            notes.push(format!("no regression: {e}"));
            None
        }
    };
    finish_training(&a.out, Method::Lda, &corpus, &state, fit, notes, a.fold_in_sweeps, a.keep_z, a.seed)?;
    Ok(ExitCode::SUCCESS)
}

pub fn train_slda(a: TrainSldaArgs) -> Result<ExitCode> {
    let corpus = read_corpus(&a.corpus)?;
    let (chain, _) = training_split(&corpus)?;
    let hyper = hyperparams(a.topics, a.alpha, a.beta)?;
    let policy: SigmaPolicy = a.sigma.parse()?;
    let schedule = EmSchedule { em_rounds: a.em_rounds, e_sweeps_per_round: a.e_sweeps, burn_in_sweeps: a.burn_in };
    let out = stochastic_em(&chain, hyper, policy, schedule, a.seed)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["round", "sigma", "r2_in"])?;
    for r in &out.trace {
        w.write_record([r.round.to_string(), r.sigma.to_string(), r.r2_in.to_string()])?;
    }
    write_file(&a.out.join("trace.csv"), &w.into_inner()?)?;
    finish_training(
        &a.out,
        Method::Slda,
        &corpus,
        &out.state,
        Some(out.fit),
        Vec::new(),
        a.fold_in_sweeps,
        a.keep_z,
        a.seed,
    )?;
    Ok(ExitCode::SUCCESS)
}

pub fn search(a: SearchArgs) -> Result<ExitCode> {
    let method: Method = a.method.parse()?;
    let corpus = read_corpus(&a.corpus)?;
    let hyper = hyperparams(a.topics, a.alpha, a.beta)?;
    let config = SearchConfig {
        n_runs: a.runs,
        burn_in: a.burn_in,
        subrun_len: a.subrun,
        n_rounds: a.rounds,
        n_checkpoints: a.checkpoints,
        k_folds: a.folds,
        keep_rule: match a.keep {
            KeepArg::Best => KeepRule::Best,
            KeepArg::SecondBest => KeepRule::SecondBest,
        },
        exclude_parent: a.exclude_parent,
        fixed_folds: a.fixed_folds,
        lda_iters: a.lda_iters,
        fold_in_sweeps: a.fold_in_sweeps,
        seed: a.seed,
        ..SearchConfig::default()
    };
    let trace = match method {
        Method::Lda => run_lda_baseline(&corpus, hyper, &config)?,
        Method::BestOf => best_of_search(&corpus, hyper, &config)?,
        Method::Branching => branching_search(&corpus, hyper, &config)?,
        Method::Slda => {
            let schedule =
                EmSchedule { em_rounds: a.em_rounds, e_sweeps_per_round: a.e_sweeps, burn_in_sweeps: a.burn_in };
            run_slda(&corpus, hyper, a.sigma.parse()?, schedule, &config)?
        }
    };
    trace.check_disjoint()?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "topics", "replicate", "holdout_r2", "loglik"])?;
    for e in &trace.winners {
        w.write_record([
            method.to_string(),
            a.topics.to_string(),
            e.index.to_string(),
            e.holdout_r2.to_string(),
            e.loglik.to_string(),
        ])?;
        eprintln!("{method} {}: holdout R² {:.4}", e.index, e.holdout_r2);
    }
    write_file(&a.out.join("results.csv"), &w.into_inner()?)?;
    write_json(&a.out.join("genealogy.json"), &trace.genealogy())?;
    if a.audit {
        write_json(&a.out.join("trace.json"), &trace)?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn simulate(a: SimulateArgs) -> Result<ExitCode> {
    let target_r2 = match (a.target_r2, a.sigma_star) {
        (None, None) => Some(0.25),
        (t, _) => t,
    };
    let spec = SyntheticSpec {
        topics: a.topics,
        vocab: a.vocab,
        docs: a.docs,
        doc_len: a.doc_len,
        alpha: a.alpha.unwrap_or(5.0 / a.topics.max(1) as f64),
        beta: a.beta,
        eta_star: a.eta_star.as_deref().map(parse_list).transpose()?,
        sigma_star: a.sigma_star,
        target_r2,
        split: a.splits.parse()?,
        seed: a.seed,
    };
    let s = generate(&spec)?;
    write_corpus(&a.out, &s.corpus)?;
    let summary = s.truth.summary(&spec);
    write_json(&a.out.join("ground_truth.json"), &summary)?;
    eprintln!("{} documents, σ* = {:.6}", s.corpus.num_docs(), summary.sigma_star);
    Ok(ExitCode::SUCCESS)
}

fn load_instance(s: &str) -> Result<TinyInstance> {
    if let Some(n) = s.strip_prefix("builtin:") {
        return Ok(TinyInstance::builtin(n.parse().context("builtin index")?)?);
    }
    let spec: TinySpec = serde_json::from_str(&read_to_string(Path::new(s))?)?;
    Ok(TinyInstance::from_spec(&spec)?)
}

#[derive(Serialize)]
struct RatioOutput {
    check: TinyRatioCheck,
    #[serde(skip_serializing_if = "Option::is_none")]
    growth: Option<Vec<GrowthRow>>,
}

pub fn prop_check(a: PropCheckArgs) -> Result<ExitCode> {
    let tiny = load_instance(&a.instance)?;
    if a.which == 1 {
        let grid = match &a.sigma_grid {
            Some(g) => parse_list(g)?,
            None => default_sigma_grid(&tiny, &tiny.eta),
        };
        let report = concentration_curve(&tiny, &tiny.eta, &grid)?;
        eprintln!(
            "{}: |Z_Δ| = {}, TV at smallest σ = {:.3e}, threshold σ = {}",
            report.instance,
            report.z_delta_size,
            report.tv.last().copied().unwrap_or(f64::NAN),
            report.threshold_sigma.map_or("-".into(), |s| format!("{s:.3e}")),
        );
        write_json(&a.out, &report)?;
    } else {
        let check = tiny_ratio_check(&tiny)?;
        let growth = match a.growth_docs {
            Some(docs) => Some(log_ratio_growth(docs, &tiny.eta, &parse_list(&a.doc_lens)?, a.seed)?),
            None => None,
        };
        eprintln!(
            "{}: log R identity {:.6}, definitional {:.6}, max path gap {:.3e}",
            check.instance,
            check.report.log_r_identity,
            check.report.log_r_definitional.unwrap_or(f64::NAN),
            check.max_path_gap
        );
        write_json(&a.out, &RatioOutput { check, growth })?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn sigma_sweep(a: SigmaSweepArgs) -> Result<ExitCode> {
    let corpus = read_corpus(&a.corpus)?;
    let topics: Vec<usize> = parse_list(&a.topics)?;
    let mut sigmas: Vec<f64> = parse_list(&a.sigmas)?;
    if a.relative {
        let (chain, _) = training_split(&corpus)?;
        let sd = sample_sd(&chain.labels());
        sigmas.iter_mut().for_each(|s| *s *= sd);
    }
    let seeds: Vec<u64> = (0..a.seeds).map(|i| a.seed + i).collect();
    let schedule = EmSchedule { em_rounds: a.em_rounds, e_sweeps_per_round: a.e_sweeps, burn_in_sweeps: a.burn_in };
    let rows = branchlda::diagnostics::sigma_sweep(&corpus, &topics, &sigmas, &seeds, schedule, a.fold_in_sweeps)?;
    write_file(&a.out, &sweep_csv(&rows)?)?;
    Ok(ExitCode::SUCCESS)
}

fn sweep_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sigma", "K", "seed", "in_sample", "out_sample"])?;
    for r in rows {
        w.write_record([
            r.sigma.to_string(),
            r.topics.to_string(),
            r.seed.to_string(),
            r.in_sample.to_string(),
            r.out_sample.to_string(),
        ])?;
    }
    Ok(w.into_inner()?)
}

pub fn experiment(a: ExperimentArgs) -> Result<ExitCode> {
    let config = ExperimentConfig::load(&a.config)?;
    let (corpus, source) = resolve_corpus(&config)?;
    eprintln!("{} cells on {} documents", config.cells().len(), corpus.num_docs());
    let out = run_experiment(&config, &corpus)?;
    write_outputs(&a.out, &config, &source, &out)?;
    if out.failures.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    for f in &out.failures {
        eprintln!("failed {}: {}", f.cell.key(), f.error);
    }
    Ok(ExitCode::from(2))
}

pub fn report(a: ReportArgs) -> Result<ExitCode> {
    let model = load_model(&a.model)?;
    let corpus = read_corpus(&a.corpus)?;
    if model.vocab_sha256 != corpus.vocabulary.digest() {
        bail!("model was trained on a different vocabulary");
    }
    let eta = &model.regression.as_ref().ok_or_else(|| anyhow!("model has no regression coefficients"))?.eta_hat;
    let report = top_topics_report(&model.topic_model(), eta, &corpus.vocabulary, a.topics, a.words)?;
    match &a.out {
        Some(p) => write_json(p, &report)?,
        None => print!("{report}"),
    }
    Ok(ExitCode::SUCCESS)
}
