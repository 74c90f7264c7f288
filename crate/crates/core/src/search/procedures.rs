use super::score::{cv_score, holdout_eval, CvOutcome};
use super::{select, AuditRecord, CandidateScore, HoldoutEval, Method, RoundRecord, SearchConfig, SearchTrace};
use crate::corpus::{Corpus, Document, Split};
use crate::error::{Error, Result};
use crate::parallel::{map_indices, map_mut};
use crate::rng::{derive_seed, tag};
use crate::sampler::{init_chain, ChainState, Hyperparams};
use crate::slda::{stochastic_em, EmSchedule, RegressionFit, SigmaPolicy};

/// Train ∪ validation as the chain corpus (in corpus order), plus the
/// holdout documents and the index maps back to the full corpus.
#[derive(Debug, Clone)]
pub struct SplitView {
    pub chain: Corpus,
    pub chain_index: Vec<usize>,
    /// Chain positions of the validation documents.
    pub validation: Vec<usize>,
    pub labels: Vec<f64>,
    pub holdout: Vec<Document>,
    pub holdout_index: Vec<usize>,
}

impl SplitView {
    pub fn new(corpus: &Corpus) -> Result<Self> {
        let chain_index = corpus.indices_where(|d| d.split != Split::Holdout);
        let holdout_index = corpus.split_indices(Split::Holdout);
        let chain = corpus.subset(&chain_index);
        let validation: Vec<usize> =
            chain.documents.iter().enumerate().filter(|(_, d)| d.split == Split::Validation).map(|(i, _)| i).collect();
        if validation.is_empty() || holdout_index.is_empty() || validation.len() == chain.num_docs() {
            return Err(Error::invalid("corpus needs non-empty train, validation and holdout splits"));
        }
        let labels = chain.labels();
        let holdout = holdout_index.iter().map(|&i| corpus.documents[i].clone()).collect();
        Ok(Self { chain, chain_index, validation, labels, holdout, holdout_index })
    }
}

struct Ctx<'a> {
    view: &'a SplitView,
    config: &'a SearchConfig,
    method: Method,
    audit: Vec<AuditRecord>,
    tilted_updates: u64,
}

impl<'a> Ctx<'a> {
    fn new(corpus: &'a Corpus, config: &'a SearchConfig, method: Method, view: &'a SplitView) -> Result<Self> {
        config.validate()?;
        debug_assert_eq!(view.chain.num_docs() + view.holdout.len(), corpus.num_docs());
        Ok(Self { view, config, method, audit: Vec::new(), tilted_updates: 0 })
    }

    fn fold_seed(&self, round: usize, run_id: usize) -> u64 {
        if self.config.fixed_folds {
            derive_seed(self.config.seed, &[tag::FOLDS])
        } else {
            derive_seed(self.config.seed, &[tag::FOLDS, round as u64, run_id as u64])
        }
    }

    fn score(&self, state: &ChainState, round: usize, run_id: usize) -> Result<CvOutcome> {
        let mut out = cv_score(
            state,
            &self.view.labels,
            &self.view.validation,
            self.config.k_folds,
            self.fold_seed(round, run_id),
        )?;
        out.score.run_id = run_id;
        Ok(out)
    }

    fn keep(&mut self, round: usize, out: CvOutcome) -> CandidateScore {
        let to_corpus = |v: Vec<usize>| -> Vec<usize> { v.into_iter().map(|p| self.view.chain_index[p]).collect() };
        let run_id = out.score.run_id;
        let records: Vec<AuditRecord> = out
            .audit
            .into_iter()
            .map(|a| AuditRecord {
                context: format!("{} round {round} run {run_id} {}", self.method, a.context),
                fit_docs: to_corpus(a.fit_docs),
                eval_docs: to_corpus(a.eval_docs),
            })
            .collect();
        self.audit.extend(records);
        out.score
    }

    fn select_round(&mut self, round: usize, parent: Option<usize>, outcomes: Vec<CvOutcome>) -> RoundRecord {
        let candidates: Vec<CandidateScore> = outcomes.into_iter().map(|o| self.keep(round, o)).collect();
        let scores: Vec<f64> = candidates.iter().map(|c| c.cv_r2).collect();
        let winner = candidates[select(&scores, self.config.keep_rule)].run_id;
        RoundRecord { round, parent, candidates, winner }
    }

    /// Holdout evaluations of `finals` (index, run id, state, optional sLDA fit), in parallel.
    fn evaluate(&mut self, finals: &[(usize, usize, &ChainState, Option<&RegressionFit>)]) -> Result<Vec<HoldoutEval>> {
        let view = self.view;
        let config = self.config;
        let method_tag = self.method as u64;
        let results = map_indices(finals.len(), |i| {
            let (index, _, state, fit) = finals[i];
            let seed = derive_seed(config.seed, &[tag::FOLD_IN, method_tag, index as u64]);
            holdout_eval(state, &view.labels, &view.holdout, fit, config.fold_in_sweeps, seed)
        });
        let mut evals = Vec::with_capacity(finals.len());
        for (&(index, run_id, state, _), res) in finals.iter().zip(results) {
            let out = res?;
            self.audit.push(AuditRecord {
                context: format!("{} holdout {index}", self.method),
                fit_docs: view.chain_index.clone(),
                eval_docs: out.scored.iter().map(|&p| view.holdout_index[p]).collect(),
            });
            evals.push(HoldoutEval {
                index,
                run_id,
                sweep_count: state.iteration(),
                holdout_r2: out.r2,
                in_sample_r2: out.fit.r2_in,
                loglik: state.log_likelihood(),
                eta_hat: out.fit.eta_hat,
                excluded_holdout: out.excluded,
            });
        }
        Ok(evals)
    }

    fn finish(self, topics: usize, rounds: Vec<RoundRecord>, winners: Vec<HoldoutEval>) -> SearchTrace {
        SearchTrace {
            method: self.method,
            topics,
            config: self.config.clone(),
            rounds,
            winners,
            audit: self.audit,
            tilted_updates: self.tilted_updates,
        }
    }

    /// Search procedures must only ever run the plain update.
    fn check_untilted(&self, states: &[&ChainState]) -> Result<()> {
        let n: u64 = states.iter().map(|s| s.tilted_updates()).sum();
        if n > 0 {
            return Err(Error::Invariant(format!("{} chain performed {n} tilted updates", self.method)));
        }
        Ok(())
    }
}

fn collect<T>(v: Vec<Result<T>>) -> Result<Vec<T>> {
    v.into_iter().collect()
}

/// `n_runs` replicates of plain LDA for `lda_iters` sweeps on train ∪ validation,
/// each evaluated on the holdout.
pub fn run_lda_baseline(corpus: &Corpus, hyper: Hyperparams, config: &SearchConfig) -> Result<SearchTrace> {
    let view = SplitView::new(corpus)?;
    let mut ctx = Ctx::new(corpus, config, Method::Lda, &view)?;
    let states = collect(map_indices(config.n_runs, |r| {
        let mut s = init_chain(&view.chain, hyper, derive_seed(config.seed, &[tag::LDA, r as u64]))?;
        s.run(&view.chain, config.lda_iters)?;
        Ok(s)
    }))?;
    ctx.check_untilted(&states.iter().collect::<Vec<_>>())?;
    let finals: Vec<_> = states.iter().enumerate().map(|(r, s)| (r, r, s, None)).collect();
    let winners = ctx.evaluate(&finals)?;
    Ok(ctx.finish(hyper.topics, Vec::new(), winners))
}

/// `n_runs` independent chains scored at burn_in, burn_in + subrun_len, …;
/// the cv-best chain at each checkpoint is kept and evaluated on the holdout.
pub fn best_of_search(corpus: &Corpus, hyper: Hyperparams, config: &SearchConfig) -> Result<SearchTrace> {
    let view = SplitView::new(corpus)?;
    let mut ctx = Ctx::new(corpus, config, Method::BestOf, &view)?;
    let mut chains = collect(map_indices(config.n_runs, |r| {
        init_chain(&view.chain, hyper, derive_seed(config.seed, &[tag::BEST_OF, r as u64]))
    }))?;

    let mut rounds = Vec::with_capacity(config.n_checkpoints);
    let mut snapshots = Vec::with_capacity(config.n_checkpoints);
    for c in 0..config.n_checkpoints {
        let sweeps = if c == 0 { config.burn_in } else { config.subrun_len };
        let ctx_ref = &ctx;
        let outcomes = collect(map_mut(&mut chains, |r, s| {
            s.run(&view.chain, sweeps)?;
            ctx_ref.score(s, c, r)
        }))?;
        let record = ctx.select_round(c, None, outcomes);
        snapshots.push(chains[record.winner].clone());
        rounds.push(record);
    }
    ctx.check_untilted(&chains.iter().collect::<Vec<_>>())?;
    let finals: Vec<_> = snapshots.iter().enumerate().map(|(c, s)| (c, rounds[c].winner, s, None)).collect();
    let winners = ctx.evaluate(&finals)?;
    Ok(ctx.finish(hyper.topics, rounds, winners))
}

/// Round 0 runs `n_runs` independent chains for burn_in sweeps and keeps
/// the cv-best as parent. Each later round forks the parent into `n_runs`
/// children (fresh seeds, identical z), runs them `subrun_len` sweeps, and
/// keeps the cv-best among children and parent. The last
/// `max_holdout_winners` parents are evaluated on the holdout.
pub fn branching_search(corpus: &Corpus, hyper: Hyperparams, config: &SearchConfig) -> Result<SearchTrace> {
    let view = SplitView::new(corpus)?;
    let mut ctx = Ctx::new(corpus, config, Method::Branching, &view)?;
    let n = config.n_runs;

    let mut first = collect(map_indices(n, |r| {
        init_chain(&view.chain, hyper, derive_seed(config.seed, &[tag::BRANCHING, r as u64]))
    }))?;
    let ctx_ref = &ctx;
    let outcomes = collect(map_mut(&mut first, |r, s| {
        s.run(&view.chain, config.burn_in)?;
        ctx_ref.score(s, 0, r)
    }))?;
    ctx.check_untilted(&first.iter().collect::<Vec<_>>())?;
    let record = ctx.select_round(0, None, outcomes);
    let mut parent = first.swap_remove(record.winner);
    drop(first);
    let mut parent_id = record.winner;
    let mut rounds = vec![record];
    let mut parents = vec![parent.clone()];

    for round in 1..=config.n_rounds {
        let mut children: Vec<ChainState> =
            (0..n).map(|c| parent.fork(derive_seed(config.seed, &[tag::CHILD, round as u64, c as u64]))).collect();
        let ctx_ref = &ctx;
        let mut outcomes = collect(map_mut(&mut children, |c, s| {
            s.run(&view.chain, config.subrun_len)?;
            ctx_ref.score(s, round, c)
        }))?;
        if !config.exclude_parent {
            outcomes.push(ctx.score(&parent, round, n)?);
        }
        ctx.check_untilted(&children.iter().chain([&parent]).collect::<Vec<_>>())?;
        let record = ctx.select_round(round, Some(parent_id), outcomes);
        if record.winner < n {
            parent = children.swap_remove(record.winner);
        }
        parent_id = record.winner;
        parents.push(parent.clone());
        rounds.push(record);
    }

    let keep_from = parents.len().saturating_sub(config.max_holdout_winners);
    let finals: Vec<_> = (keep_from..parents.len()).map(|r| (r, rounds[r].winner, &parents[r], None)).collect();
    let winners = ctx.evaluate(&finals)?;
    Ok(ctx.finish(hyper.topics, rounds, winners))
}

/// `n_runs` stochastic-EM replicates on train ∪ validation; each final
/// regression is evaluated on the holdout.
pub fn run_slda(
    corpus: &Corpus,
    hyper: Hyperparams,
    policy: SigmaPolicy,
    schedule: EmSchedule,
    config: &SearchConfig,
) -> Result<SearchTrace> {
    let view = SplitView::new(corpus)?;
    let mut ctx = Ctx::new(corpus, config, Method::Slda, &view)?;
    let outputs = collect(map_indices(config.n_runs, |r| {
        stochastic_em(&view.chain, hyper, policy, schedule, derive_seed(config.seed, &[tag::SLDA, r as u64]))
    }))?;
    ctx.tilted_updates = outputs.iter().map(|o| o.state.tilted_updates()).sum();
    let finals: Vec<_> = outputs.iter().enumerate().map(|(r, o)| (r, r, &o.state, Some(&o.fit))).collect();
    let winners = ctx.evaluate(&finals)?;
    Ok(ctx.finish(hyper.topics, Vec::new(), winners))
}
