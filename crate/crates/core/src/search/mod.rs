//! Model selection by cross-validated predictive R² on the validation split,
//! and the holdout protocol shared by every method.
//!
//! Chains are always sampled on train ∪ validation with the plain LDA update;
//! labels only enter through regressions on z̄. Every regression that produces
//! a reported R² leaves an [`AuditRecord`] naming the documents it was fit on
//! and the documents it was scored on, so disjointness can be checked from the
//! trace alone.

mod procedures;
mod score;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use procedures::{best_of_search, branching_search, run_lda_baseline, run_slda, SplitView};
pub use score::{cv_score, holdout_eval, predictive_r2, CvOutcome, HoldoutOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KeepRule {
    #[default]
    Best,
    SecondBest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Lda,
    #[serde(alias = "best_of")]
    BestOf,
    Branching,
    Slda,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Lda, Method::BestOf, Method::Branching, Method::Slda];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Lda => "lda",
            Method::BestOf => "best-of",
            Method::Branching => "branching",
            Method::Slda => "slda",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "lda" => Ok(Method::Lda),
            "best-of" | "best_of" => Ok(Method::BestOf),
            "branching" => Ok(Method::Branching),
            "slda" => Ok(Method::Slda),
            other => Err(Error::invalid(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Independent chains per round (Best-Of, Branching round 0), children
    /// per later branching round, or replicates for LDA and sLDA.
    pub n_runs: usize,
    pub burn_in: usize,
    pub subrun_len: usize,
    /// Branching rounds after the initial one.
    pub n_rounds: usize,
    /// Best-Of checkpoints, at burn_in + c·subrun_len for c in 0..n.
    pub n_checkpoints: usize,
    pub k_folds: usize,
    pub keep_rule: KeepRule,
    pub exclude_parent: bool,
    /// Reuse one fold partition for every scoring event.
    pub fixed_folds: bool,
    /// Sweeps for each plain-LDA replicate.
    pub lda_iters: usize,
    pub fold_in_sweeps: usize,
    /// Branching round winners evaluated on the holdout (the most recent ones).
    pub max_holdout_winners: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            n_runs: 10,
            burn_in: 250,
            subrun_len: 50,
            n_rounds: 8,
            n_checkpoints: 10,
            k_folds: 5,
            keep_rule: KeepRule::Best,
            exclude_parent: false,
            fixed_folds: false,
            lda_iters: 700,
            fold_in_sweeps: crate::sampler::DEFAULT_FOLD_IN_SWEEPS,
            max_holdout_winners: 10,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::invalid("n_runs must be at least 1"));
        }
        if self.k_folds < 2 {
            return Err(Error::invalid("k_folds must be at least 2"));
        }
        if self.n_checkpoints == 0 || self.max_holdout_winners == 0 {
            return Err(Error::invalid("n_checkpoints and max_holdout_winners must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub run_id: usize,
    pub sweep_count: u64,
    /// Mean of `fold_r2s`.
    pub cv_r2: f64,
    pub fold_r2s: Vec<f64>,
    pub fold_seed: u64,
}

/// One selection event: a Best-Of checkpoint or a branching round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Run id of the previous round's winner (branching rounds ≥ 1).
    pub parent: Option<usize>,
    pub candidates: Vec<CandidateScore>,
    pub winner: usize,
}

impl RoundRecord {
    pub fn winner_score(&self) -> &CandidateScore {
        self.candidates.iter().find(|c| c.run_id == self.winner).expect("winner is a candidate")
    }
}

/// Holdout evaluation of one final model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutEval {
    /// Checkpoint, round or replicate index, depending on the method.
    pub index: usize,
    pub run_id: usize,
    pub sweep_count: u64,
    pub holdout_r2: f64,
    pub in_sample_r2: f64,
    /// Text-only log p(w | z) of the train ∪ validation chain.
    pub loglik: f64,
    pub eta_hat: Vec<f64>,
    pub excluded_holdout: usize,
}

/// Documents (indices into the full corpus) behind one reported R².
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub context: String,
    pub fit_docs: Vec<usize>,
    pub eval_docs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub method: Method,
    pub topics: usize,
    pub config: SearchConfig,
    pub rounds: Vec<RoundRecord>,
    pub winners: Vec<HoldoutEval>,
    pub audit: Vec<AuditRecord>,
    /// Label-tilted site updates performed by any chain of the procedure.
    pub tilted_updates: u64,
}

impl SearchTrace {
    /// Fails if any audited regression was scored on a document it was fit on.
    pub fn check_disjoint(&self) -> Result<()> {
        for rec in &self.audit {
            if rec.fit_docs.is_empty() || rec.eval_docs.is_empty() {
                return Err(Error::Invariant(format!("{}: empty fit or eval set", rec.context)));
            }
            let fit: std::collections::HashSet<usize> = rec.fit_docs.iter().copied().collect();
            if let Some(d) = rec.eval_docs.iter().find(|d| fit.contains(d)) {
                return Err(Error::Invariant(format!("{}: document {d} used to fit and to evaluate", rec.context)));
            }
        }
        Ok(())
    }

    /// The winner whose selection score was highest, ties to the earliest.
    /// For LDA and sLDA replicates (no selection) this is the first replicate.
    pub fn best_winner(&self) -> Option<&HoldoutEval> {
        if self.rounds.is_empty() {
            return self.winners.first();
        }
        let score_of = |w: &HoldoutEval| self.rounds[w.index].winner_score().cv_r2;
        self.winners.iter().fold(None, |best: Option<&HoldoutEval>, w| match best {
            Some(b) if score_of(b) >= score_of(w) => Some(b),
            _ => Some(w),
        })
    }
}

/// A [`SearchTrace`] without the per-regression document lists, for
/// artifacts that only need the selection history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genealogy {
    pub method: Method,
    pub topics: usize,
    pub config: SearchConfig,
    pub rounds: Vec<RoundRecord>,
    pub winners: Vec<HoldoutEval>,
    pub audit_records: usize,
    pub audit_disjoint: bool,
    pub tilted_updates: u64,
}

impl SearchTrace {
    pub fn genealogy(&self) -> Genealogy {
        Genealogy {
            method: self.method,
            topics: self.topics,
            config: self.config.clone(),
            rounds: self.rounds.clone(),
            winners: self.winners.clone(),
            audit_records: self.audit.len(),
            audit_disjoint: self.check_disjoint().is_ok(),
            tilted_updates: self.tilted_updates,
        }
    }
}

/// Index of the kept candidate: highest score (or second highest), ties to
/// the lowest position.
pub fn select(scores: &[f64], rule: KeepRule) -> usize {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    match rule {
        KeepRule::Best => order[0],
        KeepRule::SecondBest => *order.get(1).unwrap_or(&order[0]),
    }
}
