use super::{AuditRecord, CandidateScore};
use crate::corpus::{shuffle_indices, Document};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::sampler::{fold_in, ChainState, TopicModel};
use crate::slda::{m_step, predict, RegressionFit};

/// 1 − Σ(y′ − η̂ᵀz̄′)² / Σ(y′ − ȳ′)² with ȳ′ the mean of `y_prime`. η̂ is
/// used as given.
pub fn predictive_r2(eta_hat: &[f64], zbar_prime: &[Vec<f64>], y_prime: &[f64]) -> Result<f64> {
    if zbar_prime.len() != y_prime.len() {
        return Err(Error::invalid(format!("{} proportion rows for {} labels", zbar_prime.len(), y_prime.len())));
    }
    if y_prime.len() < 2 {
        return Err(Error::invalid("predictive R² needs at least two documents"));
    }
    if zbar_prime.iter().any(|r| r.len() != eta_hat.len()) {
        return Err(Error::invalid("proportion rows do not match the coefficient length"));
    }
    let mean = y_prime.iter().sum::<f64>() / y_prime.len() as f64;
    let sst: f64 = y_prime.iter().map(|y| (y - mean) * (y - mean)).sum();
    if sst == 0.0 {
        return Err(Error::ConstantLabels);
    }
    let sse: f64 = zbar_prime.iter().zip(y_prime).map(|(z, y)| (y - predict(eta_hat, z)).powi(2)).sum();
    Ok(1.0 - sse / sst)
}

/// Cross-validated score plus one audit record per fold. Audit indices are
/// positions in the chain's corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub score: CandidateScore,
    pub audit: Vec<AuditRecord>,
}

/// Shuffles `validation` (chain positions) under `seed`, deals it into
/// `k_folds` folds by position, and for each fold regresses the other folds'
/// labels on their z̄ and scores the held fold. `labels` is indexed by chain
/// position.
pub fn cv_score(
    state: &ChainState,
    labels: &[f64],
    validation: &[usize],
    k_folds: usize,
    seed: u64,
) -> Result<CvOutcome> {
    if k_folds < 2 {
        return Err(Error::invalid("k_folds must be at least 2"));
    }
    if labels.len() != state.num_docs() {
        return Err(Error::invalid("labels do not match the chain"));
    }
    if validation.len() < 2 * k_folds {
        return Err(Error::invalid(format!(
            "{} validation documents cannot form {k_folds} folds of two or more",
            validation.len()
        )));
    }
    let mut rng = rng_from_seed(seed);
    let order = shuffle_indices(validation.len(), &mut rng);
    let fold_of: Vec<usize> = {
        let mut f = vec![0; validation.len()];
        for (pos, &i) in order.iter().enumerate() {
            f[i] = pos % k_folds;
        }
        f
    };

    let mut fold_r2s = Vec::with_capacity(k_folds);
    let mut audit = Vec::with_capacity(k_folds);
    for fold in 0..k_folds {
        let mut fit = Vec::with_capacity(validation.len());
        let mut eval = Vec::with_capacity(validation.len() / k_folds + 1);
        for (i, &d) in validation.iter().enumerate() {
            if fold_of[i] == fold {
                eval.push(d);
            } else {
                fit.push(d);
            }
        }
        if fit.len() <= state.topics() {
            return Err(Error::Underdetermined { docs: fit.len(), topics: state.topics() });
        }
        let reg = m_step(&rows(state, &fit), &pick(labels, &fit))?;
        fold_r2s.push(predictive_r2(&reg.eta_hat, &rows(state, &eval), &pick(labels, &eval))?);
        audit.push(AuditRecord { context: format!("fold {fold}"), fit_docs: fit, eval_docs: eval });
    }
    let cv_r2 = fold_r2s.iter().sum::<f64>() / k_folds as f64;
    Ok(CvOutcome {
        score: CandidateScore { run_id: 0, sweep_count: state.iteration(), cv_r2, fold_r2s, fold_seed: seed },
        audit,
    })
}

fn rows(state: &ChainState, idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&j| state.topic_proportions(j)).collect()
}

fn pick(labels: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&j| labels[j]).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutOutcome {
    pub fit: RegressionFit,
    pub r2: f64,
    /// Positions in `holdout` that were scored.
    pub scored: Vec<usize>,
    /// Holdout documents with no in-vocabulary word.
    pub excluded: usize,
}

/// Holdout protocol: η̂ from every chain document's final z̄ (or `fit` when
/// supplied, e.g. an sLDA M-step on the same documents), fold-in of the
/// held-out documents against the chain's frozen topics, predictive R².
pub fn holdout_eval(
    state: &ChainState,
    labels: &[f64],
    holdout: &[Document],
    fit: Option<&RegressionFit>,
    fold_in_sweeps: usize,
    seed: u64,
) -> Result<HoldoutOutcome> {
    let reg = match fit {
        Some(f) => f.clone(),
        None => m_step(&state.all_proportions(), labels)?,
    };
    let model = TopicModel::from_chain(state);
    let folded = fold_in(&model, holdout, fold_in_sweeps, seed);
    let mut zbar = Vec::with_capacity(holdout.len());
    let mut y = Vec::with_capacity(holdout.len());
    let mut scored = Vec::with_capacity(holdout.len());
    for (i, p) in folded.proportions.into_iter().enumerate() {
        if let Some(p) = p {
            zbar.push(p);
            y.push(holdout[i].label);
            scored.push(i);
        }
    }
    let r2 = predictive_r2(&reg.eta_hat, &zbar, &y)?;
    Ok(HoldoutOutcome { fit: reg, r2, scored, excluded: folded.excluded.len() })
}
