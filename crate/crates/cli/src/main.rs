//! `branchlda` command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "branchlda", version, about = "Topic models selected to explain document labels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a labeled corpus from news articles and per-period returns.
    Ingest(IngestArgs),
    /// Train plain LDA on the train and validation documents.
    TrainLda(TrainLdaArgs),
    /// Train sLDA by stochastic EM on the train and validation documents.
    TrainSlda(TrainSldaArgs),
    /// Run one selection procedure and evaluate its winners on the holdout.
    Search(SearchArgs),
    /// Draw a corpus from the generative model with a planted label R².
    Simulate(SimulateArgs),
    /// Posterior concentration (1) or log-ratio (2) checks on a tiny instance.
    PropCheck(PropCheckArgs),
    /// Fixed-σ sLDA table of in-sample and out-of-sample R².
    SigmaSweep(SigmaSweepArgs),
    /// Run a full experiment grid from a TOML config.
    Experiment(ExperimentArgs),
    /// Topics with the most negative and most positive coefficients.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Merge,
    PerArticle,
}

#[derive(Clone, Copy, ValueEnum)]
enum LabelArg {
    Return,
    SquaredReturn,
    Sentiment,
}

#[derive(Clone, Copy, ValueEnum)]
enum TimingArg {
    Post,
    Pre,
}

#[derive(Clone, Copy, ValueEnum)]
enum StemmerArg {
    Porter,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum KeepArg {
    Best,
    SecondBest,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    articles: PathBuf,
    #[arg(long)]
    returns: PathBuf,
    #[arg(long)]
    calendar: PathBuf,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// CSV of alias,ticker rows.
    #[arg(long)]
    ticker_map: Option<PathBuf>,
    /// Replaces the built-in stopword list.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "porter")]
    stemmer: StemmerArg,
    #[arg(long, default_value_t = 7)]
    min_count: usize,
    #[arg(long, default_value_t = 50)]
    min_len: usize,
    #[arg(long, default_value_t = 3)]
    max_tickers: usize,
    #[arg(long, value_enum, default_value = "merge")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "return")]
    label: LabelArg,
    #[arg(long, value_enum, default_value = "post")]
    sentiment_timing: TimingArg,
    #[arg(long, default_value = "0.8,0.1,0.1")]
    splits: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainLdaArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    topics: usize,
    /// Sets α = 5/K (the default when --alpha is absent).
    #[arg(long, conflicts_with = "alpha")]
    alpha_auto: bool,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
    #[arg(long, default_value_t = 700)]
    iters: usize,
    #[arg(long, default_value_t = 100)]
    fold_in_sweeps: usize,
    /// Store the final topic assignments in the model file.
    #[arg(long)]
    keep_z: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainSldaArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    topics: usize,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
    /// fixed:VALUE, residual or label-sd.
    #[arg(long, default_value = "label-sd")]
    sigma: String,
    #[arg(long, default_value_t = 250)]
    burn_in: usize,
    #[arg(long, default_value_t = 9)]
    em_rounds: usize,
    #[arg(long, default_value_t = 50)]
    e_sweeps: usize,
    #[arg(long, default_value_t = 100)]
    fold_in_sweeps: usize,
    #[arg(long)]
    keep_z: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SearchArgs {
    /// lda, best-of, branching or slda.
    #[arg(long)]
    method: String,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    topics: usize,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 250)]
    burn_in: usize,
    #[arg(long, default_value_t = 50)]
    subrun: usize,
    #[arg(long, default_value_t = 8)]
    rounds: usize,
    #[arg(long, default_value_t = 10)]
    checkpoints: usize,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 700)]
    lda_iters: usize,
    #[arg(long, default_value_t = 100)]
    fold_in_sweeps: usize,
    #[arg(long, value_enum, default_value = "best")]
    keep: KeepArg,
    #[arg(long)]
    exclude_parent: bool,
    /// One fold partition for every scoring event.
    #[arg(long)]
    fixed_folds: bool,
    /// σ policy for --method slda.
    #[arg(long, default_value = "label-sd")]
    sigma: String,
    #[arg(long, default_value_t = 9)]
    em_rounds: usize,
    #[arg(long, default_value_t = 50)]
    e_sweeps: usize,
    /// Also write the full trace with every audited document set.
    #[arg(long)]
    audit: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    topics: usize,
    #[arg(long, default_value_t = 500)]
    vocab: usize,
    #[arg(long, default_value_t = 2000)]
    docs: usize,
    #[arg(long, default_value_t = 50)]
    doc_len: usize,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
    /// Comma-separated η*; drawn standard normal when absent.
    #[arg(long)]
    eta_star: Option<String>,
    #[arg(long, conflicts_with = "sigma_star")]
    target_r2: Option<f64>,
    #[arg(long)]
    sigma_star: Option<f64>,
    #[arg(long, default_value = "0.8,0.1,0.1")]
    splits: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PropCheckArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    which: u8,
    /// A tiny-instance JSON file or builtin:N.
    #[arg(long)]
    instance: String,
    /// Comma-separated σ values; defaults to a grid derived from the instance.
    #[arg(long)]
    sigma_grid: Option<String>,
    /// With --which 2: also run the growth check on this many documents.
    #[arg(long)]
    growth_docs: Option<usize>,
    #[arg(long, default_value = "10,20,40,80")]
    doc_lens: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SigmaSweepArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Comma-separated topic counts.
    #[arg(long)]
    topics: String,
    /// Comma-separated σ values.
    #[arg(long)]
    sigmas: String,
    /// Interpret σ values as multiples of the training label SD.
    #[arg(long)]
    relative: bool,
    /// Number of seeds; seed i is --seed + i.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 250)]
    burn_in: usize,
    #[arg(long, default_value_t = 9)]
    em_rounds: usize,
    #[arg(long, default_value_t = 50)]
    e_sweeps: usize,
    #[arg(long, default_value_t = 100)]
    fold_in_sweeps: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Model file written by train-lda or train-slda.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 3)]
    topics: usize,
    #[arg(long, default_value_t = 10)]
    words: usize,
    /// Write the report as JSON here instead of printing it.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::TrainLda(a) => commands::train_lda(a),
        Command::TrainSlda(a) => commands::train_slda(a),
        Command::Search(a) => commands::search(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::PropCheck(a) => commands::prop_check(a),
        Command::SigmaSweep(a) => commands::sigma_sweep(a),
        Command::Experiment(a) => commands::experiment(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
